#pragma once

#include "aqr/basis.hpp"
#include "aqr/family.hpp"
#include "aqr/pirls.hpp"

#include <optional>

namespace aqr {

struct LamlValue {
  double G = 0.0;
  BetaFit fit;
};

// Sum of log eigenvalues above the rank tolerance (log pseudo-determinant).
double log_pseudo_det(const Matrix& S);

// Laplace approximate marginal likelihood at fixed gamma:
//   G = -V_D(beta_hat)/2 + ll_sat - [log|X'WX + S_g| - log|S_g|_+]/2
//       + (Mp/2) log(2 pi)
// where |S_g|_+ is the product of eigenvalues above the rank tolerance.
LamlValue laml_value(const FullDesign& design, const Vector& gamma, const Family& family,
                     const std::optional<Vector>& beta0 = std::nullopt);

struct LamlResult {
  Vector gamma;
  double laml = 0.0;
  BetaFit beta_fit;
  int outer_iterations = 0;
  bool converged = false;
  Vector grad_at_opt;  // dG/d log(gamma) at the returned point
};

struct LamlOptions {
  int max_iter = 100;
  double grad_tol = 1e-5;   // relative, on dG/d log gamma
  double fd_step = 1e-4;    // central-difference step in log gamma
  double log_gamma_min = -25.0;
  double log_gamma_max = 25.0;
  double max_step = 4.0;    // per-iteration cap on |delta log gamma|
};

// Scale-matched default start: per block, trace of the X'X diagonal block
// over trace(S_l).
Vector default_gamma0(const FullDesign& design);

// Quasi-Newton (BFGS) maximization of G over log gamma with finite-difference
// gradients; inner fits are warm-started across evaluations. Never returns a
// point with G below the starting value.
LamlResult optimize_gamma(const FullDesign& design, const Family& family,
                          const std::optional<Vector>& gamma0 = std::nullopt,
                          const std::optional<Vector>& beta0 = std::nullopt,
                          const LamlOptions& opts = {});

}  // namespace aqr
