#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

namespace aqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A factor column: per-row level index plus the level labels, in order of
// first appearance. Level indices are contiguous from 0.
struct FactorColumn {
  std::vector<int> levels;
  std::vector<std::string> labels;
};

// In-memory data set. Columns are keyed by name; matrix columns hold one
// n x m block per name (used for functional covariates).
struct Dataset {
  Eigen::Index n = 0;
  std::map<std::string, Vector> scalars;
  std::map<std::string, FactorColumn> factors;
  std::map<std::string, Matrix> matrices;

  bool has_scalar(const std::string& name) const { return scalars.count(name) > 0; }
  bool has_factor(const std::string& name) const { return factors.count(name) > 0; }
  bool has_matrix(const std::string& name) const { return matrices.count(name) > 0; }

  // Throws DataError if any column length disagrees with n, any value is
  // non-finite, or factor levels are not contiguous from 0.
  void validate() const;
};

}  // namespace aqr
