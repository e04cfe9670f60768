#include "aqr/preliminary.hpp"

#include "aqr/errors.hpp"
#include "aqr/laml.hpp"

#include <cmath>
#include <stdexcept>

namespace aqr {

Vector LinearPredictor::eval(const Dataset& data, std::vector<std::uint8_t>* clamped) const {
  Matrix X = design_rows(terms, data, d, OutOfRange::Clamp, clamped);
  return X * beta;
}

Vector LocationScaleFit::predict_alpha(const Dataset& data) const { return mean.eval(data); }

Vector LocationScaleFit::predict_kappa(const Dataset& data) const {
  if (!variance) return Vector::Constant(data.n, kappa_const);
  Vector eta = variance->eval(data);
  return (0.5 * eta.array()).exp();
}

LocationScaleFit fit_location_scale(const ModelSpec& spec, const Dataset& data) {
  auto yIt = data.scalars.find(spec.response);
  if (yIt == data.scalars.end()) throw DataError("missing response column '" + spec.response + "'");
  const Vector& y = yIt->second;
  const Eigen::Index n = y.size();

  double ybar = y.mean();
  double ysd = std::sqrt((y.array() - ybar).square().sum() / std::max<Eigen::Index>(n - 1, 1));
  if (!(ysd > 1e-12 * (1.0 + std::abs(ybar))))
    throw DataError("zero-variance response: location-scale model is degenerate");

  FullDesign mean_design = build_design(spec, data, DesignSide::Quantile);
  std::optional<FullDesign> var_design;
  if (!spec.variance_terms.empty()) var_design = build_design(spec, data, DesignSide::Variance);

  LocationScaleFit fit;
  fit.kappa_hat = Vector::Constant(n, ysd);
  fit.alpha_hat = Vector::Constant(n, ybar);

  std::optional<Vector> gamma_mean, gamma_var, beta_mean, beta_var;
  const int max_sweeps = 25;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    fit.sweeps = sweep + 1;
    GaussianFamily mean_family(y, fit.kappa_hat);
    LamlResult mean_fit = optimize_gamma(mean_design, mean_family, gamma_mean, beta_mean);
    gamma_mean = mean_fit.gamma;
    beta_mean = mean_fit.beta_fit.beta;
    Vector alpha_new = mean_design.X * mean_fit.beta_fit.beta;
    fit.d_alpha = mean_fit.beta_fit.edf_total;
    fit.mean.terms = mean_design.terms;
    fit.mean.d = mean_design.d;
    fit.mean.beta = mean_fit.beta_fit.beta;

    Vector e2 = (y - alpha_new).array().square();
    Vector kappa_new;
    if (var_design) {
      GammaLogFamily var_family(e2);
      LamlResult var_fit = optimize_gamma(*var_design, var_family, gamma_var, beta_var);
      gamma_var = var_fit.gamma;
      beta_var = var_fit.beta_fit.beta;
      Vector eta = var_design->X * var_fit.beta_fit.beta;
      kappa_new = (0.5 * eta.array()).exp();
      fit.variance = LinearPredictor{var_design->terms, var_design->d, var_fit.beta_fit.beta};
    } else {
      double denom = std::max<double>(static_cast<double>(n) - fit.d_alpha, 1.0);
      fit.kappa_const = std::sqrt(e2.sum() / denom);
      kappa_new = Vector::Constant(n, fit.kappa_const);
    }
    kappa_new = kappa_new.cwiseMax(1e-8 * ysd);

    double da = (alpha_new - fit.alpha_hat).cwiseAbs().maxCoeff() / ysd;
    double dk = ((kappa_new - fit.kappa_hat).cwiseAbs().array() / fit.kappa_hat.array()).maxCoeff();
    fit.alpha_hat = alpha_new;
    fit.kappa_hat = kappa_new;
    if (std::max(da, dk) < 1e-4) {
      fit.converged = true;
      break;
    }
  }

  fit.z = (y - fit.alpha_hat).array() / fit.kappa_hat.array();
  return fit;
}

BandwidthResult optimal_bandwidth(double tau, Eigen::Index n, double d,
                                  const SinhArcsinhFit& shash, const Vector& kappa) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("optimal_bandwidth: tau outside (0, 1)");
  if (!(d > 0.0 && static_cast<double>(n) > d))
    throw std::invalid_argument("optimal_bandwidth: need n > d > 0");
  if ((kappa.array() <= 0.0).any()) throw std::invalid_argument("optimal_bandwidth: kappa must be positive");

  double q = shash.quantile(tau);
  double f = shash.pdf(q);
  double fp = shash.dpdf(q);
  double pi4 = std::pow(M_PI, 4);
  double base = (d / static_cast<double>(n)) * 9.0 * f / (pi4 * fp * fp);
  double unit = std::cbrt(base);

  BandwidthResult out;
  double cap = 10.0 * kappa.mean();
  out.h_star = unit * kappa;
  for (Eigen::Index i = 0; i < out.h_star.size(); ++i) {
    if (!std::isfinite(out.h_star[i]) || out.h_star[i] > cap) {
      out.h_star[i] = cap;
      out.capped = true;
    }
  }
  return out;
}

BandwidthDecomposition decompose_bandwidth(const Vector& h_star, double sigma0) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("decompose_bandwidth: sigma0 must be positive");
  if (h_star.size() == 0 || (h_star.array() <= 0.0).any())
    throw std::invalid_argument("decompose_bandwidth: h_star must be positive");
  BandwidthDecomposition out;
  double hbar = h_star.mean();
  out.lambda = hbar / sigma0;
  out.sigma = h_star / out.lambda;
  out.sigma_tilde = h_star / hbar;
  return out;
}

Vector err_to_bandwidth(double eps, const Vector& kappa_variance, bool* warned) {
  if (!(eps > 0.0)) throw std::invalid_argument("err_to_bandwidth: eps must be positive");
  if ((kappa_variance.array() <= 0.0).any())
    throw std::invalid_argument("err_to_bandwidth: kappa must be positive");
  if (warned) *warned = eps >= 1.0;
  return eps * (2.0 * M_PI * kappa_variance.array()).sqrt() / (2.0 * std::log(2.0));
}

double bias_bound(double h, double sup_f) {
  if (!(h > 0.0 && sup_f > 0.0)) throw std::invalid_argument("bias_bound: h and sup_f must be positive");
  return 2.0 * std::log(2.0) * h * sup_f;
}

}  // namespace aqr
