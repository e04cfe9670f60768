#pragma once

#include "aqr/formula.hpp"
#include "aqr/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aqr {

// Relative tolerance used everywhere a penalty rank or null-space dimension
// is decided (fraction of the largest eigenvalue).
inline constexpr double kRankTol = 1e-7;

enum class OutOfRange { Reject, Clamp };

// B-spline basis with k functions of the given degree and equally spaced
// knots extended `degree` deep beyond [lo, hi]. Rows sum to 1 on [lo, hi].
// Under Reject, x outside [lo, hi] throws DataError; under Clamp the value is
// clamped to the range and the row is flagged in `clamped` (when non-null).
Matrix bspline_basis(const Vector& x, int k, int degree, double lo, double hi,
                     OutOfRange policy = OutOfRange::Reject,
                     std::vector<std::uint8_t>* clamped = nullptr);

struct PenaltySpec {
  Matrix S;           // symmetric PSD, block-local
  int nullspace_dim;  // k - rank(S) under kRankTol
};

// Order-th difference penalty S = D'D; rank k - order.
PenaltySpec difference_penalty(int k, int order);

// Cyclic second-difference penalty with wrap-around rows; nullspace holds
// constants only.
PenaltySpec cyclic_difference_penalty(int k, int order);

// Wrapped B-spline basis: k + degree raw functions folded modulo k so the
// fitted function and penalty agree at x = lo and x = hi.
Matrix cyclic_basis(const Vector& x, int k, int degree, double lo, double hi,
                    OutOfRange policy = OutOfRange::Reject,
                    std::vector<std::uint8_t>* clamped = nullptr);

// Order-2 difference penalty split into n_sp locally weighted PSD pieces
// S_l = D' diag(w_l) D whose sum recovers difference_penalty(k, 2).
std::vector<PenaltySpec> adaptive_penalties(int k, int n_sp);

// Discrete weighted-quantile transform of a basis: entry (i, j) is
// (1/m) * sum_l b_j(probs(i,l)) * weights(i,l).
Matrix functional_columns(int k, int degree, double lo, double hi, const Matrix& probs,
                          const Matrix& weights, OutOfRange policy = OutOfRange::Reject,
                          std::vector<std::uint8_t>* clamped = nullptr);

enum class ColumnKind { Intercept, Linear, Factor, Smooth, FunctionalSmooth };

// One term's slice of the full design: constrained basis, penalties, and
// everything needed to rebuild the same columns on new data.
struct TermDesign {
  ColumnKind kind = ColumnKind::Linear;
  Term term;          // parsed term (meaningful fields depend on kind)
  std::string label;  // e.g. "(Intercept)", "dem48", "f:dow", "s(doy)"
  int offset = 0;     // first column in X
  int width = 0;
  Matrix basis;  // n x width, constraints already applied
  std::vector<PenaltySpec> penalties;
  Matrix centering;                         // raw-k x width null-space transform Z
  double lo = 0.0, hi = 0.0;                // covariate (or probability) range
  std::vector<std::string> factor_labels;   // training levels, Factor only
};

enum class DesignSide { Quantile, Variance };

struct FullDesign {
  Matrix X;
  int d = 0;
  std::vector<TermDesign> terms;
  int Mp = 0;  // d - rank(sum of penalty blocks at gamma = 1)

  int n_penalties() const;
  // d x d penalty sum_l gamma_l S_l, blocks embedded at their term offsets.
  Matrix assemble_penalty(const Vector& gamma) const;
  // Flat list of (term index, penalty index, offset) in gamma order.
  struct PenaltyRef {
    int term_index;
    int penalty_index;
    int offset;
  };
  std::vector<PenaltyRef> penalty_refs() const;
};

// Evaluate the constrained basis over a data set; every term variable must be
// present with the right kind. Under Clamp, per-row flags mark rows where a
// smooth input fell outside its training range.
Matrix design_rows(const std::vector<TermDesign>& terms, const Dataset& data, int d,
                   OutOfRange policy, std::vector<std::uint8_t>* clamped = nullptr);

// Constrained basis of a smooth term evaluated at scalar points (the effect
// curve basis); for functional smooths the points live on the probability
// axis. n x width.
Matrix smooth_term_curve(const TermDesign& td, const Vector& x, OutOfRange policy);

FullDesign build_design(const ModelSpec& spec, const Dataset& data, DesignSide side);

}  // namespace aqr
