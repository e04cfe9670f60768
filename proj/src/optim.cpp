#include "aqr/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace aqr {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opts) {
  const int n = static_cast<int>(x0.size());
  std::vector<Vector> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int i = 0; i < n; ++i) xs[i + 1][i] += opts.init_step;
  for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);

  std::vector<int> ord(n + 1);
  auto sort_simplex = [&]() {
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fs[a] < fs[b]; });
  };

  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iter; ++iter) {
    sort_simplex();
    int best = ord[0], worst = ord[n], second = ord[n - 1];
    if (std::isfinite(fs[worst]) && fs[worst] - fs[best] < opts.tol) {
      converged = true;
      break;
    }
    Vector centroid = Vector::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += xs[i];
    centroid /= n;

    Vector xr = centroid + (centroid - xs[worst]);
    double fr = f(xr);
    if (fr < fs[best]) {
      Vector xe = centroid + 2.0 * (centroid - xs[worst]);
      double fe = f(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      xs[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    Vector xc = centroid + 0.5 * ((fr < fs[worst] ? xr : xs[worst]) - centroid);
    double fc = f(xc);
    if (fc < std::min(fr, fs[worst])) {
      xs[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
      fs[i] = f(xs[i]);
    }
  }

  sort_simplex();
  NelderMeadResult out;
  out.x = xs[ord[0]];
  out.f = fs[ord[0]];
  out.iterations = iter;
  out.converged = converged;
  return out;
}

}  // namespace aqr
