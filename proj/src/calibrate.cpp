#include "aqr/calibrate.hpp"

#include "aqr/errors.hpp"
#include "aqr/preliminary.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace aqr {

SandwichCov sandwich_cov(const FullDesign& design, const BetaFit& fit, const ElfFamily& family,
                         const Vector& gamma) {
  const Eigen::Index n = design.X.rows();
  const int d = design.d;
  double denom = static_cast<double>(n) - fit.edf_total;
  if (!(denom > 0.0))
    throw NumericalError("gradient covariance ill-defined: n <= edf");

  // Per-observation gradient of the loss w.r.t. beta is -d1_i x_i, so the
  // uncentered covariance is X' diag(d1^2) X.
  Vector eta = design.X * fit.beta;
  Vector d1sq(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double g = family.d1(i, eta[i]);
    d1sq[i] = g * g;
  }
  SandwichCov out;
  out.Sigma_grad = (static_cast<double>(n) / denom) *
                   (design.X.transpose() * d1sq.asDiagonal() * design.X);
  out.Sigma_grad = 0.5 * (out.Sigma_grad + out.Sigma_grad.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(out.Sigma_grad);
  double mx = es.eigenvalues().maxCoeff();
  if (!(mx > 0.0) || !std::isfinite(mx)) {
    std::ostringstream os;
    os << "singular gradient covariance (largest eigenvalue " << mx << ")";
    throw NumericalError(os.str());
  }
  double floor = 1e-6 * mx;
  Vector inv_eigs(d);
  for (int i = 0; i < d; ++i) {
    double e = es.eigenvalues()[i];
    if (e < floor) {
      e = floor;
      out.ridge_used = floor;
    }
    inv_eigs[i] = 1.0 / e;
  }
  Matrix Sigma_inv =
      es.eigenvectors() * inv_eigs.asDiagonal() * es.eigenvectors().transpose();

  Matrix Sg = design.assemble_penalty(gamma);
  Matrix H = fit.neg_hessian * Sigma_inv * fit.neg_hessian + Sg;
  H = 0.5 * (H + H.transpose());
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    H.diagonal().array() += 1e-10 * (H.trace() / d + 1.0);
    llt.compute(H);
    if (llt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "sandwich covariance not positive definite (condition estimate "
         << mx / floor << ")";
      throw NumericalError(os.str());
    }
  }
  out.V_s = llt.solve(Matrix::Identity(d, d));
  out.V_s = 0.5 * (out.V_s + out.V_s.transpose());
  return out;
}

double ikl_core(const Matrix& X, const Matrix& V, const Matrix& V_s) {
  const Eigen::Index n = X.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = X.row(i) * V * X.row(i).transpose();
    double vs = X.row(i) * V_s * X.row(i).transpose();
    if (!(v > 0.0) || !(vs > 0.0))
      throw NumericalError("nonpositive posterior variance in IKL evaluation");
    double r = vs / v;
    total += std::sqrt(r + std::log(1.0 / r));
  }
  return total / static_cast<double>(n);
}

double ikl_loss(const FullDesign& design, const BetaFit& fit, const SandwichCov& sandwich) {
  return ikl_core(design.X, fit.V, sandwich.V_s);
}

BrentResult brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                           int max_evals) {
  if (!(a < b)) throw std::invalid_argument("brent_minimize: need a < b");
  const double gold = 0.5 * (3.0 - std::sqrt(5.0));
  BrentResult res;
  int evals = 0;
  auto eval = [&](double x) {
    if (evals >= max_evals) throw NumericalError("brent_minimize: evaluation budget exceeded");
    ++evals;
    double fx = f(x);
    res.trace.push_back({x, fx});
    return fx;
  };

  double x = a + gold * (b - a), w = x, v = x;
  double fx = eval(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < max_evals; ++iter) {
    double m = 0.5 * (a + b);
    double tol1 = tol * std::abs(x) + 1e-12;
    double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) {
      res.converged = true;
      break;
    }
    double p = 0.0, q = 0.0, r = 0.0;
    bool use_golden = true;
    if (std::abs(e) > tol1 && std::isfinite(fx) && std::isfinite(fw) && std::isfinite(fv)) {
      r = (x - w) * (fx - fv);
      q = (x - v) * (fx - fw);
      p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      double etmp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etmp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (m > x ? tol1 : -tol1);
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x < m ? b : a) - x;
      d = gold * e;
    }
    double u = x + (std::abs(d) >= tol1 ? d : (d > 0 ? tol1 : -tol1));
    double fu = eval(u);
    if (fu <= fx) {
      if (u < x)
        b = x;
      else
        a = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  // Return the best point actually evaluated.
  res.x = x;
  res.f = fx;
  for (const auto& t : res.trace) {
    if (t.f < res.f) {
      res.f = t.f;
      res.x = t.x;
    }
  }
  return res;
}

bool detect_discontinuity(const std::vector<CalibrationEvaluation>& evaluations) {
  if (evaluations.size() < 3) return false;
  std::vector<CalibrationEvaluation> sorted = evaluations;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.log_sigma0 < b.log_sigma0; });
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  for (const auto& e : sorted) {
    if (!std::isfinite(e.ikl)) return true;
    fmin = std::min(fmin, e.ikl);
    fmax = std::max(fmax, e.ikl);
  }
  // A jump counts as a discontinuity when its per-unit slope exceeds 10x the
  // local scale (the steeper of the two neighboring slopes) and the jump is
  // not just noise relative to the trace's range.
  const std::size_t m = sorted.size() - 1;
  std::vector<double> jump(m), slope(m);
  for (std::size_t i = 0; i < m; ++i) {
    double dx = std::max(sorted[i + 1].log_sigma0 - sorted[i].log_sigma0, 1e-12);
    jump[i] = std::abs(sorted[i + 1].ikl - sorted[i].ikl);
    slope[i] = jump[i] / dx;
  }
  for (std::size_t i = 0; i < m; ++i) {
    double local = 0.0;
    if (i > 0) local = std::max(local, slope[i - 1]);
    if (i + 1 < m) local = std::max(local, slope[i + 1]);
    bool material = jump[i] > 1e-3 * (fmax - fmin) + 1e-12;
    if (material && slope[i] > 10.0 * (local + 1e-12)) return true;
  }
  return false;
}

CalibrationResult calibrate_sigma0(const FullDesign& design, const Vector& y,
                                   const Vector& h_star, double tau,
                                   const CalibrateOptions& opts) {
  CalibrationResult result;
  CalibrationTrace& trace = result.trace;

  std::optional<Vector> gamma_warm, beta_warm;
  double best_ikl = std::numeric_limits<double>::infinity();
  int failures = 0, attempts = 0;

  auto objective = [&](double ls0) -> double {
    ++attempts;
    double sigma0 = std::exp(ls0);
    double ikl = std::numeric_limits<double>::infinity();
    bool converged_inner = false;
    try {
      BandwidthDecomposition dec = decompose_bandwidth(h_star, sigma0);
      ElfParams params(tau, dec.lambda, dec.sigma);
      ElfFamily family(y, params);
      LamlResult laml = optimize_gamma(design, family, gamma_warm, beta_warm);
      gamma_warm = laml.gamma;
      beta_warm = laml.beta_fit.beta;
      SandwichCov sw = sandwich_cov(design, laml.beta_fit, family, laml.gamma);
      ikl = ikl_loss(design, laml.beta_fit, sw);
      converged_inner = laml.converged && laml.beta_fit.converged;
      if (ikl < best_ikl) {
        best_ikl = ikl;
        result.sigma0 = sigma0;
        result.log_sigma0 = ls0;
        result.ikl = ikl;
        result.lambda = dec.lambda;
        result.sigma_tilde = dec.sigma_tilde;
        result.sigma = dec.sigma;
        result.laml = laml;
        result.sandwich = sw;
      }
    } catch (const NumericalError&) {
      ++failures;
    }
    trace.evaluations.push_back({ls0, ikl, converged_inner});
    return ikl;
  };

  double center = std::log(h_star.mean());
  double a = opts.bracket ? opts.bracket->first : center - 5.0;
  double b = opts.bracket ? opts.bracket->second : center + 3.0;

  // Make sure the bracket contains an interior minimum before running Brent;
  // expand 3x toward the lower end on failure.
  double fa = objective(a);
  double fb = objective(b);
  double m = 0.5 * (a + b);
  double fm = objective(m);
  int expansions = 0;
  while (!(fm <= fa && fm <= fb) && expansions < opts.max_bracket_expansions) {
    ++expansions;
    double width = b - a;
    if (fa < fb) {
      a = a - 2.0 * width;  // new width is 3x, extended toward a
      fa = objective(a);
    } else {
      b = b + 2.0 * width;
      fb = objective(b);
    }
    m = 0.5 * (a + b);
    fm = objective(m);
  }
  trace.bracket_lo = a;
  trace.bracket_hi = b;
  trace.boundary_warning = !(fm <= fa && fm <= fb);

  brent_minimize(objective, a, b, opts.tol, 100);
  trace.tolerance_achieved = opts.tol;

  if (attempts > 0 && failures == attempts)
    throw NumericalError("calibrate_sigma0: every inner fit failed");

  // Best point across everything evaluated, bracketing included.
  trace.argmin = result.log_sigma0;
  trace.discontinuity = detect_discontinuity(trace.evaluations);

  if (!std::isfinite(result.ikl) || result.laml.beta_fit.beta.size() == 0)
    throw NumericalError("calibrate_sigma0: no usable evaluation");
  return result;
}

}  // namespace aqr
