#pragma once

#include "aqr/basis.hpp"
#include "aqr/calibrate.hpp"
#include "aqr/formula.hpp"
#include "aqr/preliminary.hpp"
#include "aqr/shash.hpp"
#include "aqr/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aqr {

struct FitOptions {
  std::optional<double> err;                         // manual bias budget
  std::optional<std::pair<double, double>> bracket;  // log sigma0 search bracket
  double brent_tol = 1e-2;
};

// Shared tau-independent stage: location-scale fit and residual density.
struct PreliminaryFit {
  LocationScaleFit ls;
  SinhArcsinhFit shash;
};

PreliminaryFit preliminary_fit(const ModelSpec& spec, const Dataset& data);

struct CheckBin {
  double mu_lo, mu_hi;   // fitted-value range of the bin
  int count;
  double proportion;     // observed share of negative residuals
  double lo, hi;         // 95% binomial reference interval around tau
};

struct TermEdf {
  std::string label;
  int k_prime;
  double edf;
};

struct CheckReport {
  double theor_prop_neg = 0.0;  // tau
  double actual_prop_neg = 0.0;
  double integrated_abs_bias = 0.0;
  std::vector<CheckBin> binned_props;
  std::vector<TermEdf> edf_vs_kprime;
  double laml_grad_lo = 0.0, laml_grad_hi = 0.0;
  bool laml_converged = false;
  bool laml_hessian_pd = false;
  bool laml_hessian_checked = false;
  int model_rank = 0;
  int model_dim = 0;
};

struct FittedQuantileModel {
  ModelSpec spec;
  std::string formula;
  double tau = 0.0;
  double sigma0 = 0.0;
  double lambda = 0.0;
  Vector h_star;       // per training row
  Vector sigma_tilde;  // mean-1 scale profile
  Vector beta;
  Vector gamma;
  Matrix V;    // posterior covariance (I + S_gamma)^{-1}
  Matrix V_s;  // sandwich covariance
  double edf_total = 0.0;
  std::vector<double> edf_per_term;
  int Mp = 0;
  double laml = 0.0;
  double penalized_deviance = 0.0;
  CalibrationTrace calibration;

  // Preliminary-stage summary.
  double d_alpha = 0.0;
  SinhArcsinhFit shash;
  bool bandwidth_capped = false;
  bool ls_converged = false;
  std::optional<double> err;

  // Prediction recipes.
  std::vector<TermDesign> terms;
  int d = 0;
  LinearPredictor ls_mean;
  std::optional<LinearPredictor> ls_variance;
  double kappa_const = 0.0;

  // Retained training references (empty on models loaded from disk).
  Vector train_y, train_fitted, train_alpha, train_kappa;

  bool converged_inner = false;
  bool converged_laml = false;
  Vector laml_grad;
  bool laml_hessian_pd = false;
  bool laml_hessian_checked = false;

  Vector alpha_at(const Dataset& data) const { return ls_mean.eval(data); }
  Vector kappa_at(const Dataset& data) const;
};

FittedQuantileModel fit_quantile(const ModelSpec& spec, const Dataset& data, double tau,
                                 const FitOptions& options = {});

struct MultiFitResult {
  std::vector<std::optional<FittedQuantileModel>> fits;  // aligned with taus
  std::vector<std::string> errors;                       // empty string on success
  PreliminaryFit preliminary;
};

// Shares the preliminary stage across quantiles; per-tau failures are
// isolated and reported alongside the successful fits.
MultiFitResult fit_multi(const ModelSpec& spec, const Dataset& data,
                         const std::vector<double>& taus, const FitOptions& options = {});

struct Prediction {
  Vector mu;
  Vector se;  // empty unless requested
  std::vector<std::uint8_t> clamped;
};

Prediction predict(const FittedQuantileModel& model, const Dataset& newdata, bool want_se,
                   bool use_sandwich = false);

// Diagnostics against the supplied data (training data for the paper-style
// report); uses the stored preliminary model as the reference c.d.f.
CheckReport check(const FittedQuantileModel& model, const Dataset& data);
// Convenience overload over the retained training vectors.
CheckReport check(const FittedQuantileModel& model);

// Per-tau total pinball loss of predictions (columns of pred) against y.
Vector pinball_score(const Vector& y, const Matrix& pred, const std::vector<double>& taus);

// Minimum over grid rows of the gap between consecutive-quantile predictions;
// negative values indicate crossing.
double crossing_report(const std::vector<const FittedQuantileModel*>& models, const Dataset& grid);

}  // namespace aqr
