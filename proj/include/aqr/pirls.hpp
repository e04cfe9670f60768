#pragma once

#include "aqr/basis.hpp"
#include "aqr/family.hpp"
#include "aqr/types.hpp"

#include <optional>
#include <vector>

namespace aqr {

struct BetaFit {
  Vector beta;
  double penalized_deviance = 0.0;  // deviance criterion value at beta
  Matrix neg_hessian;               // X' W X, loss curvature at beta
  Matrix V;                         // (neg_hessian + S_gamma)^{-1}
  double edf_total = 0.0;
  std::vector<double> edf_per_term;  // aligned with FullDesign::terms
  int iterations = 0;
  double grad_norm = 0.0;
  bool ridge_used = false;
  bool converged = false;
};

struct PirlsOptions {
  int max_iter = 200;
  double grad_tol = 1e-7;     // relative gradient max-norm
  double change_tol = 1e-9;   // relative criterion change
  bool throw_on_failure = true;
  std::vector<double>* crit_trace = nullptr;  // criterion after each accepted step
};

// Penalized deviance sum_i Dev_i + beta' S_gamma beta and its gradient.
double penalized_deviance(const FullDesign& design, const Vector& gamma, const Family& family,
                          const Vector& beta, Vector* grad = nullptr);

// Newton / penalized IRLS minimization of the penalized deviance, with
// step-halving; gamma must be strictly positive componentwise (it may be
// empty when the design carries no penalties).
BetaFit fit_beta(const FullDesign& design, const Vector& gamma, const Family& family,
                 const std::optional<Vector>& beta0 = std::nullopt,
                 const PirlsOptions& opts = {});

}  // namespace aqr
