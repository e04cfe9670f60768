#include "aqr/model.hpp"

#include "aqr/errors.hpp"
#include "aqr/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace aqr {

Vector FittedQuantileModel::kappa_at(const Dataset& data) const {
  if (!ls_variance) return Vector::Constant(data.n, kappa_const);
  Vector eta = ls_variance->eval(data);
  return (0.5 * eta.array()).exp();
}

PreliminaryFit preliminary_fit(const ModelSpec& spec, const Dataset& data) {
  PreliminaryFit out;
  out.ls = fit_location_scale(spec, data);
  out.shash = fit_shash(out.ls.z);
  return out;
}

namespace {

// Central finite-difference Hessian of G in log gamma; negative definiteness
// at the optimum is what the diagnostics report as "positive definite" for
// the minimization form.
bool laml_hessian_pd(const FullDesign& design, const ElfFamily& family, const Vector& gamma,
                     const Vector& beta_hat, bool* checked) {
  const int m = static_cast<int>(gamma.size());
  *checked = false;
  if (m == 0 || m > 6) return false;
  const double h = 1e-2;
  Vector rho = gamma.array().log();
  std::optional<Vector> warm = beta_hat;
  auto G = [&](const Vector& r) {
    LamlValue v = laml_value(design, r.array().exp(), family, warm);
    warm = v.fit.beta;
    return v.G;
  };
  Matrix H(m, m);
  double g0 = G(rho);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double v;
      if (i == j) {
        Vector rp = rho, rm = rho;
        rp[i] += h;
        rm[i] -= h;
        v = (G(rp) - 2.0 * g0 + G(rm)) / (h * h);
      } else {
        Vector rpp = rho, rpm = rho, rmp = rho, rmm = rho;
        rpp[i] += h; rpp[j] += h;
        rpm[i] += h; rpm[j] -= h;
        rmp[i] -= h; rmp[j] += h;
        rmm[i] -= h; rmm[j] -= h;
        v = (G(rpp) - G(rpm) - G(rmp) + G(rmm)) / (4.0 * h * h);
      }
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  *checked = true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(-H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

FittedQuantileModel fit_one(const ModelSpec& spec, const Dataset& data, double tau,
                            const FitOptions& options, const PreliminaryFit& prelim,
                            const FullDesign& design) {
  const Vector& y = data.scalars.at(spec.response);

  // Bandwidth plan: automatic MSE-optimal, or from the manual bias budget.
  Vector h_star;
  bool capped = false;
  if (options.err) {
    Vector kappa_var = prelim.ls.kappa_hat.array().square();
    h_star = err_to_bandwidth(*options.err, kappa_var);
  } else {
    BandwidthResult bw =
        optimal_bandwidth(tau, data.n, std::max(prelim.ls.d_alpha, 1.0), prelim.shash,
                          prelim.ls.kappa_hat);
    h_star = bw.h_star;
    capped = bw.capped;
  }

  CalibrateOptions copts;
  copts.bracket = options.bracket;
  copts.tol = options.brent_tol;
  CalibrationResult cal;
  try {
    cal = calibrate_sigma0(design, y, h_star, tau, copts);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("calibration stage: ") + e.what());
  }

  FittedQuantileModel m;
  m.spec = spec;
  m.formula = render_formula(spec);
  m.tau = tau;
  m.sigma0 = cal.sigma0;
  m.lambda = cal.lambda;
  m.h_star = h_star;
  m.sigma_tilde = cal.sigma_tilde;
  m.beta = cal.laml.beta_fit.beta;
  m.gamma = cal.laml.gamma;
  m.V = cal.laml.beta_fit.V;
  m.V_s = cal.sandwich.V_s;
  m.edf_total = cal.laml.beta_fit.edf_total;
  m.edf_per_term = cal.laml.beta_fit.edf_per_term;
  m.Mp = design.Mp;
  m.laml = cal.laml.laml;
  m.penalized_deviance = cal.laml.beta_fit.penalized_deviance;
  m.calibration = cal.trace;
  m.d_alpha = prelim.ls.d_alpha;
  m.shash = prelim.shash;
  m.bandwidth_capped = capped;
  m.ls_converged = prelim.ls.converged;
  m.err = options.err;
  m.terms = design.terms;
  m.d = design.d;
  m.ls_mean = prelim.ls.mean;
  m.ls_variance = prelim.ls.variance;
  m.kappa_const = prelim.ls.kappa_const;
  m.train_y = y;
  m.train_fitted = design.X * m.beta;
  m.train_alpha = prelim.ls.alpha_hat;
  m.train_kappa = prelim.ls.kappa_hat;
  m.converged_inner = cal.laml.beta_fit.converged;
  m.converged_laml = cal.laml.converged;
  m.laml_grad = cal.laml.grad_at_opt;

  ElfParams params(tau, cal.lambda, cal.sigma);
  ElfFamily family(y, params);
  m.laml_hessian_pd = laml_hessian_pd(design, family, m.gamma, m.beta, &m.laml_hessian_checked);
  return m;
}

}  // namespace

FittedQuantileModel fit_quantile(const ModelSpec& spec, const Dataset& data, double tau,
                                 const FitOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("fit_quantile: tau outside (0, 1)");
  data.validate();
  PreliminaryFit prelim;
  try {
    prelim = preliminary_fit(spec, data);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("preliminary stage: ") + e.what());
  }
  FullDesign design = build_design(spec, data, DesignSide::Quantile);
  return fit_one(spec, data, tau, options, prelim, design);
}

MultiFitResult fit_multi(const ModelSpec& spec, const Dataset& data,
                         const std::vector<double>& taus, const FitOptions& options) {
  if (taus.empty()) throw std::invalid_argument("fit_multi: no quantiles requested");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0))
      throw std::invalid_argument("fit_multi: tau outside (0, 1)");
    if (i > 0 && !(taus[i] > taus[i - 1]))
      throw std::invalid_argument("fit_multi: taus must be strictly increasing");
  }
  data.validate();
  MultiFitResult out;
  out.preliminary = preliminary_fit(spec, data);
  FullDesign design = build_design(spec, data, DesignSide::Quantile);
  for (double tau : taus) {
    try {
      out.fits.push_back(fit_one(spec, data, tau, options, out.preliminary, design));
      out.errors.emplace_back();
    } catch (const std::exception& e) {
      out.fits.push_back(std::nullopt);
      out.errors.emplace_back(e.what());
    }
  }
  return out;
}

Prediction predict(const FittedQuantileModel& model, const Dataset& newdata, bool want_se,
                   bool use_sandwich) {
  Prediction out;
  Matrix X = design_rows(model.terms, newdata, model.d, OutOfRange::Clamp, &out.clamped);
  out.mu = X * model.beta;
  if (want_se) {
    const Matrix& C = use_sandwich ? model.V_s : model.V;
    out.se.resize(newdata.n);
    for (Eigen::Index i = 0; i < newdata.n; ++i)
      out.se[i] = std::sqrt(std::max(0.0, double(X.row(i) * C * X.row(i).transpose())));
  }
  return out;
}

namespace {

CheckReport check_impl(const FittedQuantileModel& model, const Vector& y, const Vector& mu,
                       const Vector& alpha, const Vector& kappa) {
  const Eigen::Index n = y.size();
  CheckReport rep;
  rep.theor_prop_neg = model.tau;

  Eigen::Index nneg = 0;
  double bias = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] < mu[i]) ++nneg;
    double zhat = (mu[i] - alpha[i]) / kappa[i];
    bias += std::abs(model.shash.cdf(zhat) - model.tau);
  }
  rep.actual_prop_neg = static_cast<double>(nneg) / n;
  rep.integrated_abs_bias = bias / n;

  // Ten equal-count bins ordered by fitted value, with binomial 95% reference
  // intervals around tau.
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return mu[a] < mu[b]; });
  int nbins = static_cast<int>(std::min<Eigen::Index>(10, n));
  for (int b = 0; b < nbins; ++b) {
    Eigen::Index lo = n * b / nbins, hi = n * (b + 1) / nbins;
    if (hi <= lo) continue;
    CheckBin bin;
    bin.count = static_cast<int>(hi - lo);
    bin.mu_lo = mu[order[lo]];
    bin.mu_hi = mu[order[hi - 1]];
    int neg = 0;
    for (Eigen::Index t = lo; t < hi; ++t)
      if (y[order[t]] < mu[order[t]]) ++neg;
    bin.proportion = static_cast<double>(neg) / bin.count;
    bin.lo = static_cast<double>(binomial_quantile(0.025, bin.count, model.tau)) / bin.count;
    bin.hi = static_cast<double>(binomial_quantile(0.975, bin.count, model.tau)) / bin.count;
    rep.binned_props.push_back(bin);
  }

  for (std::size_t t = 0; t < model.terms.size(); ++t) {
    const TermDesign& td = model.terms[t];
    if (td.kind != ColumnKind::Smooth && td.kind != ColumnKind::FunctionalSmooth) continue;
    rep.edf_vs_kprime.push_back({td.label, td.width,
                                 t < model.edf_per_term.size() ? model.edf_per_term[t] : 0.0});
  }

  if (model.laml_grad.size() > 0) {
    rep.laml_grad_lo = model.laml_grad.minCoeff();
    rep.laml_grad_hi = model.laml_grad.maxCoeff();
  }
  rep.laml_converged = model.converged_laml;
  rep.laml_hessian_pd = model.laml_hessian_pd;
  rep.laml_hessian_checked = model.laml_hessian_checked;
  rep.model_dim = model.d;
  // V positive definite at the fit implies full rank; report the dimension
  // actually identifiable under the rank tolerance.
  Eigen::SelfAdjointEigenSolver<Matrix> es(model.V, Eigen::EigenvaluesOnly);
  double mx = es.eigenvalues().cwiseAbs().maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > kRankTol * mx) ++rank;
  rep.model_rank = rank;
  return rep;
}

}  // namespace

CheckReport check(const FittedQuantileModel& model, const Dataset& data) {
  auto it = data.scalars.find(model.spec.response);
  if (it == data.scalars.end())
    throw DataError("check: missing response column '" + model.spec.response + "'");
  Prediction pred = predict(model, data, false);
  Vector alpha = model.alpha_at(data);
  Vector kappa = model.kappa_at(data);
  return check_impl(model, it->second, pred.mu, alpha, kappa);
}

CheckReport check(const FittedQuantileModel& model) {
  if (model.train_y.size() == 0)
    throw DataError("check: model carries no training data; pass the data set explicitly");
  return check_impl(model, model.train_y, model.train_fitted, model.train_alpha,
                    model.train_kappa);
}

Vector pinball_score(const Vector& y, const Matrix& pred, const std::vector<double>& taus) {
  if (pred.rows() != y.size())
    throw std::invalid_argument("pinball_score: prediction rows do not match y");
  if (pred.cols() != static_cast<Eigen::Index>(taus.size()))
    throw std::invalid_argument("pinball_score: one prediction column per tau required");
  Vector out(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      total += pinball(y[i] - pred(i, k), taus[k], 1.0);
    out[k] = total;
  }
  return out;
}

double crossing_report(const std::vector<const FittedQuantileModel*>& models,
                       const Dataset& grid) {
  if (models.size() < 2) throw std::invalid_argument("crossing_report: need at least two models");
  for (const auto* m : models) {
    if (m == nullptr) throw std::invalid_argument("crossing_report: null model");
    if (m->formula != models.front()->formula)
      throw DataError("crossing_report: models were fitted with different formulas");
  }
  Matrix preds(grid.n, models.size());
  for (std::size_t k = 0; k < models.size(); ++k)
    preds.col(k) = predict(*models[k], grid, false).mu;
  double min_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < grid.n; ++i)
    for (std::size_t k = 0; k + 1 < models.size(); ++k)
      min_gap = std::min(min_gap, preds(i, k + 1) - preds(i, k));
  return min_gap;
}

}  // namespace aqr
