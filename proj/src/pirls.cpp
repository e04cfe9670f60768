#include "aqr/pirls.hpp"

#include "aqr/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace aqr {

namespace {

// Cholesky solve of H x = b with an escalating ridge retry; H must be
// symmetric. Reports the ridge actually used.
Matrix solve_spd(const Matrix& H, const Matrix& B, double* ridge_out) {
  double base = 1e-10 * H.trace() / H.rows();
  if (!(base > 0.0)) base = 1e-12;
  double ridge = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Matrix Hr = H;
    if (ridge > 0.0) Hr.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(Hr);
    if (llt.info() == Eigen::Success) {
      if (ridge_out) *ridge_out = ridge;
      return llt.solve(B);
    }
    ridge = ridge == 0.0 ? base : ridge * 100.0;
  }
  throw NumericalError("singular working system in penalized IRLS (penalty floor needed)");
}

void fill_curvature(const Family& family, const Vector& eta, Vector& w, Vector& g) {
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    w[i] = family.weight(i, eta[i]);
    g[i] = family.d1(i, eta[i]);
  }
}

}  // namespace

double penalized_deviance(const FullDesign& design, const Vector& gamma, const Family& family,
                          const Vector& beta, Vector* grad) {
  Vector eta = design.X * beta;
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    dev += 2.0 * (family.saturated(i) - family.loglik(i, eta[i]));
  Matrix Sg = design.assemble_penalty(gamma);
  double crit = dev + beta.dot(Sg * beta);
  if (grad) {
    Vector d1(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) d1[i] = family.d1(i, eta[i]);
    *grad = -2.0 * (design.X.transpose() * d1) + 2.0 * (Sg * beta);
  }
  return crit;
}

BetaFit fit_beta(const FullDesign& design, const Vector& gamma, const Family& family,
                 const std::optional<Vector>& beta0, const PirlsOptions& opts) {
  const Eigen::Index n = design.X.rows();
  const int d = design.d;
  if (family.n() != n) throw std::invalid_argument("fit_beta: family size does not match design");
  if (gamma.size() != design.n_penalties())
    throw std::invalid_argument("fit_beta: gamma length does not match penalty count");
  if ((gamma.array() <= 0.0).any()) throw std::invalid_argument("fit_beta: gamma must be positive");

  Matrix Sg = design.assemble_penalty(gamma);

  // Gaussian warm start: penalized least squares on the family's working
  // response.
  auto default_start = [&]() {
    Vector y0(n);
    for (Eigen::Index i = 0; i < n; ++i) y0[i] = family.init_response(i);
    Matrix H0 = design.X.transpose() * design.X + Sg;
    H0.diagonal().array() += 1e-8 * (H0.trace() / d + 1.0);
    double r = 0.0;
    return solve_spd(H0, design.X.transpose() * y0, &r);
  };

  BetaFit fit;
  if (beta0) {
    fit.beta = *beta0;
    if (fit.beta.size() != d) throw std::invalid_argument("fit_beta: beta0 has wrong length");
  } else {
    fit.beta = default_start();
  }

  Vector eta = design.X * fit.beta;
  Vector w(n), g(n);
  double crit = penalized_deviance(design, gamma, family, fit.beta, nullptr);
  if (beta0 && !std::isfinite(crit)) {
    // A supplied start can be useless at this gamma (overflowed link scale);
    // fall back to the least-squares start.
    fit.beta = default_start();
    eta = design.X * fit.beta;
    crit = penalized_deviance(design, gamma, family, fit.beta, nullptr);
  }
  if (opts.crit_trace) opts.crit_trace->push_back(crit);

  bool converged = false;
  bool stalled = false;
  int iter = 0;
  double grad_norm = 0.0;
  for (; iter < opts.max_iter; ++iter) {
    fill_curvature(family, eta, w, g);
    Vector grad_half = design.X.transpose() * g - Sg * fit.beta;  // -grad(crit)/2
    grad_norm = 2.0 * grad_half.cwiseAbs().maxCoeff();

    Matrix H = design.X.transpose() * w.asDiagonal() * design.X + Sg;
    double ridge = 0.0;
    Vector step = solve_spd(H, grad_half, &ridge);
    if (ridge > 0.0) fit.ridge_used = true;

    // Near-singular working systems can propose wild steps; cap the length so
    // halving can always reach the descent region.
    double cap = 1e3 * (1.0 + fit.beta.cwiseAbs().maxCoeff());
    double len = step.cwiseAbs().maxCoeff();
    if (len > cap) step *= cap / len;

    // Step-halving on the penalized deviance.
    double new_crit = crit;
    Vector new_beta = fit.beta;
    bool accepted = false;
    double alpha = 1.0;
    for (int h = 0; h < 40; ++h) {
      Vector cand = fit.beta + alpha * step;
      double c = penalized_deviance(design, gamma, family, cand, nullptr);
      if (std::isfinite(c) && c < crit) {
        new_beta = cand;
        new_crit = c;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    double change = crit - new_crit;
    fit.beta = new_beta;
    crit = new_crit;
    eta = design.X * fit.beta;
    if (opts.crit_trace && accepted) opts.crit_trace->push_back(crit);

    bool grad_ok = grad_norm < opts.grad_tol * (1.0 + std::abs(crit));
    bool change_ok = change < opts.change_tol * (1.0 + std::abs(crit));
    if ((grad_ok && change_ok) || (!accepted && grad_ok)) {
      converged = true;
      ++iter;
      break;
    }
    if (!accepted) {
      stalled = true;  // no representable decrease along the Newton direction
      break;
    }
  }

  // Refresh the gradient and curvature at the final beta.
  fill_curvature(family, eta, w, g);
  Vector grad_final = -2.0 * (design.X.transpose() * g - Sg * fit.beta);
  fit.grad_norm = grad_final.cwiseAbs().maxCoeff();
  converged = converged || fit.grad_norm < opts.grad_tol * (1.0 + std::abs(crit));
  // A stalled line search on this convex criterion means the remaining descent
  // is below the evaluation noise floor; accept unless the gradient is gross.
  converged = converged || (stalled && fit.grad_norm < 1e-3 * (1.0 + std::abs(crit)));
  if (!converged && opts.throw_on_failure) {
    std::ostringstream os;
    os << "penalized IRLS did not converge after " << iter
       << " iterations (gradient max-norm " << fit.grad_norm << ")";
    throw NumericalError(os.str());
  }

  fit.converged = converged;
  fit.iterations = iter;
  fit.penalized_deviance = crit;
  fit.neg_hessian = design.X.transpose() * w.asDiagonal() * design.X;
  Matrix H = fit.neg_hessian + Sg;
  double ridge = 0.0;
  fit.V = solve_spd(H, Matrix::Identity(d, d), &ridge);
  if (ridge > 0.0) fit.ridge_used = true;
  fit.V = 0.5 * (fit.V + fit.V.transpose());

  Matrix VI = fit.V * fit.neg_hessian;
  fit.edf_total = VI.trace();
  fit.edf_per_term.clear();
  for (const auto& t : design.terms) {
    double e = 0.0;
    for (int j = t.offset; j < t.offset + t.width; ++j) e += VI(j, j);
    fit.edf_per_term.push_back(e);
  }
  return fit;
}

}  // namespace aqr
