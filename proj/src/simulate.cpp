#include "aqr/simulate.hpp"

#include "aqr/errors.hpp"
#include "aqr/stats.hpp"

#include <cmath>

namespace aqr {

double Rng::uniform() {
  // 53 significant bits, shifted half a step into the open interval.
  std::uint64_t v = engine_();
  return (static_cast<double>(v >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double Rng::normal() { return normal_quantile(uniform()); }

double Rng::gamma_int(int shape) {
  double s = 0.0;
  for (int i = 0; i < shape; ++i) s += -std::log(uniform());
  return s;
}

Dataset simulate_preset(const std::string& preset, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw DataError("simulate: n must be at least 1");
  Rng rng(seed);
  Vector x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x[i] = n == 1 ? -3.0 : -3.0 + 6.0 * static_cast<double>(i) / (n - 1);

  if (preset == "appendixA") {
    for (Eigen::Index i = 0; i < n; ++i) y[i] = x[i] + x[i] * x[i] + rng.gamma_int(4);
  } else if (preset == "heteroNormal") {
    for (Eigen::Index i = 0; i < n; ++i)
      y[i] = x[i] + x[i] * x[i] + (1.0 + std::abs(x[i])) * rng.normal();
  } else if (preset == "sine") {
    for (Eigen::Index i = 0; i < n; ++i) y[i] = std::sin(3.0 * x[i]) + 0.3 * rng.normal();
  } else {
    throw DataError("unknown preset '" + preset + "'");
  }

  Dataset data;
  data.n = n;
  data.scalars.emplace("x", std::move(x));
  data.scalars.emplace("y", std::move(y));
  return data;
}

}  // namespace aqr
