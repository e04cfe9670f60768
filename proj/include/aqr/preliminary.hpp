#pragma once

#include "aqr/basis.hpp"
#include "aqr/formula.hpp"
#include "aqr/shash.hpp"
#include "aqr/types.hpp"

#include <optional>

namespace aqr {

// A rebuildable linear predictor: term recipes plus coefficients.
struct LinearPredictor {
  std::vector<TermDesign> terms;
  int d = 0;
  Vector beta;

  Vector eval(const Dataset& data, std::vector<std::uint8_t>* clamped = nullptr) const;
};

// Gaussian location-scale fit: mean model on the quantile-side terms,
// log-variance model on the variance-side terms (or a constant).
struct LocationScaleFit {
  Vector alpha_hat;
  Vector kappa_hat;
  Vector z;  // standardized residuals (y - alpha) / kappa
  double d_alpha = 0.0;
  bool converged = false;
  int sweeps = 0;
  LinearPredictor mean;
  std::optional<LinearPredictor> variance;  // eta = log kappa^2
  double kappa_const = 0.0;                 // constant-variance mode

  Vector predict_alpha(const Dataset& data) const;
  Vector predict_kappa(const Dataset& data) const;
};

LocationScaleFit fit_location_scale(const ModelSpec& spec, const Dataset& data);

struct BandwidthResult {
  Vector h_star;
  bool capped = false;  // the symmetric-density singularity guard engaged
};

// Asymptotically MSE-optimal loss bandwidth
//   h*(x) = [ (d/n) 9 f_z(q_tau) / (pi^4 f'_z(q_tau)^2) ]^(1/3) kappa(x),
// capped at 10 * mean(kappa) where f'_z vanishes.
BandwidthResult optimal_bandwidth(double tau, Eigen::Index n, double d,
                                  const SinhArcsinhFit& shash, const Vector& kappa);

struct BandwidthDecomposition {
  double lambda = 0.0;
  Vector sigma_tilde;  // mean exactly 1
  Vector sigma;        // lambda * sigma_i == h_star_i
};

// Split h* into the loss smoothness lambda = mean(h*)/sigma0 and the
// x-dependent scale sigma(x) = h*(x)/lambda.
BandwidthDecomposition decompose_bandwidth(const Vector& h_star, double sigma0);

// Manual bandwidth from a bias budget eps: h = eps sqrt(2 pi kappa)/(2 log 2),
// with kappa the response variance. Sets *warned when eps >= 1.
Vector err_to_bandwidth(double eps, const Vector& kappa_variance, bool* warned = nullptr);

// Upper bound 2 log(2) h sup_y f(y) on the quantile-level bias induced by the
// smoothed loss.
double bias_bound(double h, double sup_f);

}  // namespace aqr
