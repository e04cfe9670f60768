#pragma once

#include "aqr/types.hpp"

#include <functional>

namespace aqr {

struct NelderMeadOptions {
  int max_iter = 2000;
  double tol = 1e-10;       // absolute spread of simplex function values
  double init_step = 0.1;   // initial simplex edge length per coordinate
};

struct NelderMeadResult {
  Vector x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization (reflection 1, expansion 2,
// contraction 1/2, shrink 1/2). The objective may return +inf to encode
// constraints.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opts = {});

}  // namespace aqr
