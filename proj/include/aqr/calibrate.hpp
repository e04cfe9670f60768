#pragma once

#include "aqr/basis.hpp"
#include "aqr/elf.hpp"
#include "aqr/laml.hpp"
#include "aqr/pirls.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace aqr {

struct SandwichCov {
  Matrix Sigma_grad;  // finite-sample scaled gradient covariance
  Matrix V_s;         // (I Sigma^-1 I + S_gamma)^{-1}
  double ridge_used = 0.0;  // eigenvalue floor applied to Sigma_grad, 0 if none
};

// Gradient-covariance ("sandwich") posterior covariance at the converged fit.
SandwichCov sandwich_cov(const FullDesign& design, const BetaFit& fit, const ElfFamily& family,
                         const Vector& gamma);

// n^-1 sum_i [ v_s_i / v_i + log(v_i / v_s_i) ]^(1/2) over the design rows,
// with v = x'Vx and v_s = x'V_s x. Always >= 1, with equality iff v_s == v.
double ikl_core(const Matrix& X, const Matrix& V, const Matrix& V_s);
double ikl_loss(const FullDesign& design, const BetaFit& fit, const SandwichCov& sandwich);

struct BrentEval {
  double x;
  double f;
};

struct BrentResult {
  double x = 0.0;
  double f = 0.0;
  std::vector<BrentEval> trace;
  bool converged = false;
};

// Brent local minimization (golden section + parabolic interpolation) on
// [a, b]; records every function evaluation. Throws NumericalError past
// max_evals.
BrentResult brent_minimize(const std::function<double(double)>& f, double a, double b, double tol,
                           int max_evals = 100);

struct CalibrationEvaluation {
  double log_sigma0;
  double ikl;
  bool converged_inner;
};

struct CalibrationTrace {
  std::vector<CalibrationEvaluation> evaluations;
  double bracket_lo = 0.0, bracket_hi = 0.0;
  double argmin = 0.0;
  double tolerance_achieved = 0.0;
  bool discontinuity = false;
  bool boundary_warning = false;
};

// True when some consecutive jump (by log_sigma0 order) exceeds 10x the local
// scale of the evaluations, or any value is non-finite.
bool detect_discontinuity(const std::vector<CalibrationEvaluation>& evaluations);

struct CalibrateOptions {
  std::optional<std::pair<double, double>> bracket;  // in log sigma0
  double tol = 1e-2;
  int max_bracket_expansions = 4;
};

// Full state of the winning IKL evaluation.
struct CalibrationResult {
  double sigma0 = 0.0;
  double log_sigma0 = 0.0;
  double ikl = 0.0;
  double lambda = 0.0;
  Vector sigma_tilde;
  Vector sigma;
  LamlResult laml;
  SandwichCov sandwich;
  CalibrationTrace trace;
};

// Outer iteration: Brent search over log sigma0 of the IKL loss, each
// evaluation running the smoothing-parameter and coefficient fits at the
// implied (lambda, sigma(x)). Inner fits are warm-started from the previous
// evaluation.
CalibrationResult calibrate_sigma0(const FullDesign& design, const Vector& y,
                                   const Vector& h_star, double tau,
                                   const CalibrateOptions& opts = {});

}  // namespace aqr
