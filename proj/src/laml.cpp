#include "aqr/laml.hpp"

#include "aqr/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace aqr {

namespace {

double logdet_spd(const Matrix& H) {
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) {
    Matrix Hr = H;
    Hr.diagonal().array() += 1e-10 * (H.trace() / H.rows() + 1.0);
    llt.compute(Hr);
    if (llt.info() != Eigen::Success) throw NumericalError("log-determinant of indefinite matrix");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

double log_pseudo_det(const Matrix& S) {
  if (S.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  double mx = es.eigenvalues().cwiseAbs().maxCoeff();
  if (mx <= 0.0) return 0.0;
  double out = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > kRankTol * mx) out += std::log(es.eigenvalues()[i]);
  return out;
}

LamlValue laml_value(const FullDesign& design, const Vector& gamma, const Family& family,
                     const std::optional<Vector>& beta0) {
  LamlValue out;
  out.fit = fit_beta(design, gamma, family, beta0);
  double ll_sat = 0.0;
  for (Eigen::Index i = 0; i < family.n(); ++i) ll_sat += family.saturated(i);
  Matrix Sg = design.assemble_penalty(gamma);
  double log_h = logdet_spd(out.fit.neg_hessian + Sg);
  double log_s = log_pseudo_det(Sg);
  out.G = -0.5 * out.fit.penalized_deviance + ll_sat - 0.5 * (log_h - log_s) +
          0.5 * design.Mp * std::log(2.0 * M_PI);
  return out;
}

Vector default_gamma0(const FullDesign& design) {
  Matrix XtX = design.X.transpose() * design.X;
  auto refs = design.penalty_refs();
  Vector g0(refs.size());
  for (std::size_t j = 0; j < refs.size(); ++j) {
    const auto& td = design.terms[refs[j].term_index];
    const Matrix& S = td.penalties[refs[j].penalty_index].S;
    double tx = XtX.block(td.offset, td.offset, td.width, td.width).trace();
    double ts = S.trace();
    g0[j] = ts > 0.0 ? std::max(tx / ts, 1e-8) : 1.0;
  }
  return g0;
}

LamlResult optimize_gamma(const FullDesign& design, const Family& family,
                          const std::optional<Vector>& gamma0,
                          const std::optional<Vector>& beta0, const LamlOptions& opts) {
  const int m = design.n_penalties();
  LamlResult res;
  if (m == 0) {
    LamlValue v = laml_value(design, Vector(0), family, beta0);
    res.gamma = Vector(0);
    res.laml = v.G;
    res.beta_fit = std::move(v.fit);
    res.converged = true;
    res.grad_at_opt = Vector(0);
    return res;
  }

  Vector rho = (gamma0 ? *gamma0 : default_gamma0(design)).array().log();
  rho = rho.cwiseMax(opts.log_gamma_min).cwiseMin(opts.log_gamma_max);

  // Warm start carried across every marginal-likelihood evaluation.
  std::optional<Vector> beta_warm = beta0;
  auto eval = [&](const Vector& r) -> LamlValue {
    Vector g = r.array().exp();
    LamlValue v = laml_value(design, g, family, beta_warm);
    beta_warm = v.fit.beta;
    return v;
  };
  // Failures at a trial point reject the candidate instead of aborting the
  // whole selection.
  auto try_eval = [&](const Vector& r) -> std::optional<LamlValue> {
    try {
      return eval(r);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  LamlValue cur = eval(rho);
  Vector best_rho = rho;
  LamlValue best = cur;

  auto fd_grad = [&](const Vector& r, double f_at_r) -> Vector {
    Vector g(m);
    for (int j = 0; j < m; ++j) {
      Vector rp = r, rm = r;
      rp[j] += opts.fd_step;
      rm[j] -= opts.fd_step;
      double fp = eval(rp).G;
      double fm = eval(rm).G;
      g[j] = (fp - fm) / (2.0 * opts.fd_step);
    }
    (void)f_at_r;
    return g;
  };

  Vector grad = fd_grad(rho, cur.G);
  Matrix Hinv = Matrix::Identity(m, m);
  bool converged = grad.cwiseAbs().maxCoeff() < opts.grad_tol * (1.0 + std::abs(cur.G));
  int iter = 0;

  while (!converged && iter < opts.max_iter) {
    ++iter;
    Vector p = Hinv * grad;  // ascent direction
    if (grad.dot(p) <= 0.0) {
      Hinv = Matrix::Identity(m, m);
      p = grad;
    }
    // Keep single moves within a few log-units so warm starts stay useful.
    double plen = p.cwiseAbs().maxCoeff();
    if (plen > opts.max_step) p *= opts.max_step / plen;

    // Backtracking line search on -G (Armijo).
    double alpha = 1.0;
    double g_dot_p = grad.dot(p);
    Vector rho_new = rho;
    LamlValue cand = cur;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls) {
      Vector r = (rho + alpha * p).cwiseMax(opts.log_gamma_min).cwiseMin(opts.log_gamma_max);
      std::optional<LamlValue> v = try_eval(r);
      if (v && std::isfinite(v->G) && v->G >= cur.G + 1e-4 * alpha * g_dot_p) {
        rho_new = r;
        cand = std::move(*v);
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;

    Vector grad_new = fd_grad(rho_new, cand.G);
    Vector s = rho_new - rho;
    Vector yv = grad - grad_new;  // gradient of -G increases along s
    double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      Matrix I = Matrix::Identity(m, m);
      Matrix A = I - (s * yv.transpose()) / sy;
      Hinv = A * Hinv * A.transpose() + (s * s.transpose()) / sy;
    }
    rho = rho_new;
    cur = std::move(cand);
    grad = grad_new;
    if (cur.G > best.G) {
      best = cur;
      best_rho = rho;
    }
    converged = grad.cwiseAbs().maxCoeff() < opts.grad_tol * (1.0 + std::abs(cur.G));
    if (s.cwiseAbs().maxCoeff() < 1e-10) break;
  }

  if (cur.G > best.G) {
    best = cur;
    best_rho = rho;
  }
  res.gamma = best_rho.array().exp();
  res.laml = best.G;
  res.beta_fit = std::move(best.fit);
  res.outer_iterations = iter;
  res.converged = converged;
  bool at_current = best_rho.size() == rho.size() && (best_rho - rho).isZero(0.0);
  res.grad_at_opt = at_current ? grad : fd_grad(best_rho, best.G);
  return res;
}

}  // namespace aqr
