#include "aqr/basis.hpp"

#include "aqr/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace aqr {

namespace {

// Values of the degree+1 B-splines that are nonzero at x (NURBS-book scheme).
// Knots are implicit: t_i = lo + (i - degree) * dx. Returns the knot span j
// with t_j <= x < t_{j+1}, clamped so x = hi uses the last interior span.
int bspline_nonzero(double x, int k, int degree, double lo, double dx, double* out) {
  int span = degree + static_cast<int>(std::floor((x - lo) / dx));
  span = std::max(degree, std::min(span, k - 1));
  auto knot = [&](int i) { return lo + (i - degree) * dx; };
  std::vector<double> left(degree + 1), right(degree + 1);
  out[0] = 1.0;
  for (int d = 1; d <= degree; ++d) {
    left[d] = x - knot(span + 1 - d);
    right[d] = knot(span + d) - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      double tmp = out[r] / (right[r + 1] + left[d - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[d - r] * tmp;
    }
    out[d] = saved;
  }
  return span;
}

double clamp_or_reject(double x, double lo, double hi, OutOfRange policy, bool* flag) {
  if (x >= lo && x <= hi) return x;
  if (policy == OutOfRange::Reject) {
    std::ostringstream os;
    os << "value " << x << " outside basis range [" << lo << ", " << hi << "]";
    throw DataError(os.str());
  }
  if (flag) *flag = true;
  return std::min(std::max(x, lo), hi);
}

Matrix difference_matrix(int k, int order) {
  Matrix D = Matrix::Identity(k, k);
  for (int o = 0; o < order; ++o) {
    int rows = static_cast<int>(D.rows());
    Matrix next(rows - 1, k);
    for (int i = 0; i + 1 < rows; ++i) next.row(i) = D.row(i + 1) - D.row(i);
    D = next;
  }
  return D;
}

int nullspace_dim_of(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  double mx = es.eigenvalues().cwiseAbs().maxCoeff();
  if (mx <= 0.0) return static_cast<int>(S.rows());
  int rank = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > kRankTol * mx) ++rank;
  return static_cast<int>(S.rows()) - rank;
}

}  // namespace

Matrix bspline_basis(const Vector& x, int k, int degree, double lo, double hi, OutOfRange policy,
                     std::vector<std::uint8_t>* clamped) {
  if (degree < 0) throw std::invalid_argument("bspline_basis: negative degree");
  if (k < degree + 1) throw std::invalid_argument("bspline_basis: k < degree + 1");
  if (!(lo < hi)) throw std::invalid_argument("bspline_basis: empty range");
  double dx = (hi - lo) / (k - degree);
  Matrix B = Matrix::Zero(x.size(), k);
  std::vector<double> vals(degree + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    bool flag = false;
    double xi = clamp_or_reject(x[i], lo, hi, policy, &flag);
    if (flag && clamped) (*clamped)[i] = 1;
    int span = bspline_nonzero(xi, k, degree, lo, dx, vals.data());
    for (int r = 0; r <= degree; ++r) B(i, span - degree + r) = vals[r];
  }
  return B;
}

PenaltySpec difference_penalty(int k, int order) {
  if (order < 1 || order >= k) throw std::invalid_argument("difference_penalty: need 1 <= order < k");
  Matrix D = difference_matrix(k, order);
  return {D.transpose() * D, order};
}

PenaltySpec cyclic_difference_penalty(int k, int order) {
  if (order < 1 || order >= k) throw std::invalid_argument("cyclic_difference_penalty: bad order");
  // Row i holds the order-th difference stencil wrapped modulo k.
  Matrix D = Matrix::Zero(k, k);
  std::vector<double> stencil(order + 1);
  for (int j = 0; j <= order; ++j) {
    double c = 1.0;
    for (int t = 0; t < j; ++t) c = c * (order - t) / (t + 1);
    stencil[j] = ((order - j) % 2 == 0 ? c : -c);
  }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= order; ++j) D(i, (i + j) % k) += stencil[j];
  Matrix S = D.transpose() * D;
  return {S, nullspace_dim_of(S)};
}

Matrix cyclic_basis(const Vector& x, int k, int degree, double lo, double hi, OutOfRange policy,
                    std::vector<std::uint8_t>* clamped) {
  if (k < 4) throw std::invalid_argument("cyclic_basis: k < 4");
  if (!(lo < hi)) throw std::invalid_argument("cyclic_basis: empty range");
  // k + degree raw functions with knot spacing (hi - lo) / k; columns are
  // identified modulo k, which makes rows at lo and hi coincide.
  int kraw = k + degree;
  double dx = (hi - lo) / k;
  Matrix B = Matrix::Zero(x.size(), k);
  std::vector<double> vals(degree + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    bool flag = false;
    double xi = clamp_or_reject(x[i], lo, hi, policy, &flag);
    if (flag && clamped) (*clamped)[i] = 1;
    int span = bspline_nonzero(xi, kraw, degree, lo, dx, vals.data());
    for (int r = 0; r <= degree; ++r) B(i, (span - degree + r) % k) += vals[r];
  }
  return B;
}

std::vector<PenaltySpec> adaptive_penalties(int k, int n_sp) {
  if (n_sp < 1 || n_sp > k - 2) throw std::invalid_argument("adaptive_penalties: need 1 <= n_sp <= k - 2");
  Matrix D = difference_matrix(k, 2);
  int m = k - 2;  // number of second differences
  Matrix W;
  if (n_sp == 1) {
    W = Matrix::Ones(m, 1);
  } else {
    // Partition-of-unity weights over the difference index, so the pieces
    // sum back to the plain order-2 penalty.
    Vector idx(m);
    for (int i = 0; i < m; ++i) idx[i] = static_cast<double>(i);
    int wdeg = std::min(3, n_sp - 1);
    W = bspline_basis(idx, n_sp, wdeg, 0.0, static_cast<double>(m - 1));
  }
  std::vector<PenaltySpec> out;
  out.reserve(n_sp);
  for (int l = 0; l < n_sp; ++l) {
    Matrix S = D.transpose() * W.col(l).asDiagonal() * D;
    out.push_back({S, nullspace_dim_of(S)});
  }
  return out;
}

Matrix functional_columns(int k, int degree, double lo, double hi, const Matrix& probs,
                          const Matrix& weights, OutOfRange policy,
                          std::vector<std::uint8_t>* clamped) {
  if (probs.rows() != weights.rows() || probs.cols() != weights.cols())
    throw DataError("functional_columns: probs and weights shapes differ");
  if (probs.cols() < 1) throw DataError("functional_columns: empty probability rows");
  Eigen::Index n = probs.rows(), m = probs.cols();
  double dx = (hi - lo) / (k - degree);
  Matrix B = Matrix::Zero(n, k);
  std::vector<double> vals(degree + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index l = 0; l < m; ++l) {
      bool flag = false;
      double p = clamp_or_reject(probs(i, l), lo, hi, policy, &flag);
      if (flag && clamped) (*clamped)[i] = 1;
      int span = bspline_nonzero(p, k, degree, lo, dx, vals.data());
      for (int r = 0; r <= degree; ++r) B(i, span - degree + r) += vals[r] * weights(i, l);
    }
  }
  return B / static_cast<double>(m);
}

int FullDesign::n_penalties() const {
  int m = 0;
  for (const auto& t : terms) m += static_cast<int>(t.penalties.size());
  return m;
}

std::vector<FullDesign::PenaltyRef> FullDesign::penalty_refs() const {
  std::vector<PenaltyRef> refs;
  for (int ti = 0; ti < static_cast<int>(terms.size()); ++ti)
    for (int pi = 0; pi < static_cast<int>(terms[ti].penalties.size()); ++pi)
      refs.push_back({ti, pi, terms[ti].offset});
  return refs;
}

Matrix FullDesign::assemble_penalty(const Vector& gamma) const {
  Matrix S = Matrix::Zero(d, d);
  int g = 0;
  for (const auto& t : terms)
    for (const auto& p : t.penalties) {
      S.block(t.offset, t.offset, t.width, t.width) += gamma[g] * p.S;
      ++g;
    }
  if (g != gamma.size()) throw std::invalid_argument("assemble_penalty: gamma length mismatch");
  return S;
}

namespace {

const Vector& scalar_column(const Dataset& data, const std::string& name) {
  auto it = data.scalars.find(name);
  if (it == data.scalars.end()) {
    if (data.has_factor(name) || data.has_matrix(name))
      throw DataError("column '" + name + "' is not a numeric scalar column");
    throw DataError("missing column '" + name + "'");
  }
  return it->second;
}

const FactorColumn& factor_column(const Dataset& data, const std::string& name) {
  auto it = data.factors.find(name);
  if (it == data.factors.end()) {
    if (data.has_scalar(name) || data.has_matrix(name))
      throw DataError("column '" + name + "' is not a factor column");
    throw DataError("missing factor column '" + name + "'");
  }
  return it->second;
}

const Matrix& matrix_column(const Dataset& data, const std::string& name) {
  auto it = data.matrices.find(name);
  if (it == data.matrices.end()) throw DataError("missing matrix column '" + name + "'");
  return it->second;
}

// Orthonormal basis of the null space of c' (k x (k-1)), from the full QR of c.
Matrix constraint_nullspace(const Vector& c) {
  Eigen::Index k = c.size();
  Eigen::HouseholderQR<Matrix> qr(c);
  Matrix Q = qr.householderQ();
  return Q.rightCols(k - 1);
}

// Raw (unconstrained) smooth basis + penalties for one term over given data.
struct RawSmooth {
  Matrix B;
  std::vector<PenaltySpec> penalties;
  double lo, hi;
};

RawSmooth raw_smooth(const Term& term, const Dataset& data, OutOfRange policy,
                     std::vector<std::uint8_t>* clamped, bool fitting, double lo_hint,
                     double hi_hint) {
  RawSmooth out;
  if (!term.by_variable.empty()) {
    const Matrix& probs = matrix_column(data, term.variable);
    const Matrix& weights = matrix_column(data, term.by_variable);
    if (fitting) {
      out.lo = probs.minCoeff();
      out.hi = probs.maxCoeff();
      for (Eigen::Index i = 0; i < probs.rows(); ++i)
        for (Eigen::Index l = 1; l < probs.cols(); ++l)
          if (!(probs(i, l) > probs(i, l - 1)))
            throw DataError("probability rows of '" + term.variable + "' must be strictly increasing");
      if (!(out.lo < out.hi)) throw DataError("degenerate probability range in '" + term.variable + "'");
    } else {
      out.lo = lo_hint;
      out.hi = hi_hint;
    }
    if (term.basis != BasisType::PS)
      throw DataError("matrix-by smooth on '" + term.variable + "' supports bs=\"ps\" only");
    out.B = functional_columns(term.k, term.degree, out.lo, out.hi, probs, weights, policy, clamped);
    out.penalties = {difference_penalty(term.k, 2)};
    return out;
  }
  const Vector& x = scalar_column(data, term.variable);
  if (fitting) {
    out.lo = x.minCoeff();
    out.hi = x.maxCoeff();
    if (!(out.lo < out.hi)) throw DataError("degenerate range for smooth variable '" + term.variable + "'");
  } else {
    out.lo = lo_hint;
    out.hi = hi_hint;
  }
  switch (term.basis) {
    case BasisType::PS:
      out.B = bspline_basis(x, term.k, term.degree, out.lo, out.hi, policy, clamped);
      out.penalties = {difference_penalty(term.k, 2)};
      break;
    case BasisType::CC:
      out.B = cyclic_basis(x, term.k, term.degree, out.lo, out.hi, policy, clamped);
      out.penalties = {cyclic_difference_penalty(term.k, 2)};
      break;
    case BasisType::AD: {
      out.B = bspline_basis(x, term.k, term.degree, out.lo, out.hi, policy, clamped);
      out.penalties = adaptive_penalties(term.k, std::min(5, term.k - 2));
      break;
    }
  }
  return out;
}

Matrix factor_dummies(const FactorColumn& fc, const std::vector<std::string>& train_labels,
                      Eigen::Index n) {
  int L = static_cast<int>(train_labels.size());
  Matrix B = Matrix::Zero(n, L - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string& lab = fc.labels.at(fc.levels[i]);
    auto it = std::find(train_labels.begin(), train_labels.end(), lab);
    if (it == train_labels.end())
      throw DataError("factor level '" + lab + "' at row " + std::to_string(i) +
                      " was not seen in training");
    int j = static_cast<int>(it - train_labels.begin());
    if (j > 0) B(i, j - 1) = 1.0;  // treatment contrasts, first level dropped
  }
  return B;
}

}  // namespace

Matrix design_rows(const std::vector<TermDesign>& terms, const Dataset& data, int d,
                   OutOfRange policy, std::vector<std::uint8_t>* clamped) {
  Matrix X = Matrix::Zero(data.n, d);
  if (clamped) clamped->assign(data.n, 0);
  for (const auto& td : terms) {
    switch (td.kind) {
      case ColumnKind::Intercept:
        X.col(td.offset).setOnes();
        break;
      case ColumnKind::Linear:
        X.col(td.offset) = scalar_column(data, td.term.variable);
        break;
      case ColumnKind::Factor:
        X.block(0, td.offset, data.n, td.width) =
            factor_dummies(factor_column(data, td.term.variable), td.factor_labels, data.n);
        break;
      case ColumnKind::Smooth:
      case ColumnKind::FunctionalSmooth: {
        RawSmooth raw = raw_smooth(td.term, data, policy, clamped, false, td.lo, td.hi);
        X.block(0, td.offset, data.n, td.width) = raw.B * td.centering;
        break;
      }
    }
  }
  return X;
}

Matrix smooth_term_curve(const TermDesign& td, const Vector& x, OutOfRange policy) {
  if (td.kind != ColumnKind::Smooth && td.kind != ColumnKind::FunctionalSmooth)
    throw DataError("'" + td.label + "' is not a smooth term");
  const Term& t = td.term;
  Matrix raw;
  if (td.kind == ColumnKind::FunctionalSmooth || t.basis == BasisType::PS ||
      t.basis == BasisType::AD) {
    raw = bspline_basis(x, t.k, t.degree, td.lo, td.hi, policy);
  } else {
    raw = cyclic_basis(x, t.k, t.degree, td.lo, td.hi, policy);
  }
  return raw * td.centering;
}

FullDesign build_design(const ModelSpec& spec, const Dataset& data, DesignSide side) {
  const std::vector<Term>& src =
      side == DesignSide::Quantile ? spec.quantile_terms : spec.variance_terms;
  bool intercept = side == DesignSide::Quantile ? spec.has_intercept : true;

  FullDesign design;
  int offset = 0;
  if (intercept) {
    TermDesign td;
    td.kind = ColumnKind::Intercept;
    td.label = "(Intercept)";
    td.offset = offset;
    td.width = 1;
    td.basis = Matrix::Ones(data.n, 1);
    design.terms.push_back(std::move(td));
    offset += 1;
  }
  for (const Term& term : src) {
    TermDesign td;
    td.term = term;
    td.offset = offset;
    switch (term.kind) {
      case TermKind::Linear: {
        td.kind = ColumnKind::Linear;
        td.label = term.variable;
        td.width = 1;
        td.basis = scalar_column(data, term.variable);
        break;
      }
      case TermKind::Factor: {
        const FactorColumn& fc = factor_column(data, term.variable);
        if (fc.labels.size() < 2)
          throw DataError("factor '" + term.variable + "' has fewer than two levels");
        td.kind = ColumnKind::Factor;
        td.label = "f:" + term.variable;
        td.factor_labels = fc.labels;
        td.width = static_cast<int>(fc.labels.size()) - 1;
        td.basis = factor_dummies(fc, fc.labels, data.n);
        break;
      }
      case TermKind::Smooth: {
        td.kind = term.by_variable.empty() ? ColumnKind::Smooth : ColumnKind::FunctionalSmooth;
        td.label = term.by_variable.empty() ? "s(" + term.variable + ")"
                                            : "s(" + term.variable + "):" + term.by_variable;
        RawSmooth raw = raw_smooth(term, data, OutOfRange::Reject, nullptr, true, 0, 0);
        td.lo = raw.lo;
        td.hi = raw.hi;
        // Sum-to-zero constraint: drop one dimension along the null space of
        // the column-sum vector, and keep the transform for prediction.
        Vector c = raw.B.colwise().sum();
        Matrix Z = constraint_nullspace(c);
        td.centering = Z;
        td.basis = raw.B * Z;
        td.width = static_cast<int>(td.basis.cols());
        for (const auto& p : raw.penalties) {
          Matrix Sc = Z.transpose() * p.S * Z;
          Sc = 0.5 * (Sc + Sc.transpose());
          td.penalties.push_back({Sc, nullspace_dim_of(Sc)});
        }
        break;
      }
    }
    offset += td.width;
    design.terms.push_back(std::move(td));
  }

  design.d = offset;
  design.X = Matrix::Zero(data.n, design.d);
  for (const auto& td : design.terms) design.X.block(0, td.offset, data.n, td.width) = td.basis;

  // Null-space dimension of the summed penalty at gamma = 1.
  int m = design.n_penalties();
  if (m == 0) {
    design.Mp = design.d;
  } else {
    Matrix Ssum = design.assemble_penalty(Vector::Ones(m));
    design.Mp = nullspace_dim_of(Ssum);
  }
  return design;
}

void Dataset::validate() const {
  auto check_len = [&](Eigen::Index len, const std::string& name) {
    if (len != n) throw DataError("column '" + name + "' has length " + std::to_string(len) +
                                  ", expected " + std::to_string(n));
  };
  for (const auto& [name, v] : scalars) {
    check_len(v.size(), name);
    if (!v.allFinite()) throw DataError("non-finite value in column '" + name + "'");
  }
  for (const auto& [name, m] : matrices) {
    check_len(m.rows(), name);
    if (!m.allFinite()) throw DataError("non-finite value in matrix column '" + name + "'");
  }
  for (const auto& [name, f] : factors) {
    check_len(static_cast<Eigen::Index>(f.levels.size()), name);
    std::set<int> seen(f.levels.begin(), f.levels.end());
    for (int lvl : f.levels)
      if (lvl < 0 || lvl >= static_cast<int>(f.labels.size()))
        throw DataError("factor '" + name + "' has out-of-range level index");
    for (int j = 0; j < static_cast<int>(f.labels.size()); ++j)
      if (!seen.count(j)) throw DataError("factor '" + name + "' has unused level '" + f.labels[j] + "'");
  }
}

}  // namespace aqr
