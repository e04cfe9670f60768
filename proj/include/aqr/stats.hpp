#pragma once

#include <cmath>

namespace aqr {

// Numerically stable log(1 + exp(u)).
inline double softplus(double u) {
  double a = std::max(u, 0.0);
  return a + std::log1p(std::exp(-std::abs(u)));
}

inline double sigmoid(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  double e = std::exp(u);
  return e / (1.0 + e);
}

// log Beta(a, b) via log-Gamma; valid for a, b > 0.
inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile. Acklam's rational approximation refined by one
// Halley step, accurate to ~1e-15 over (0, 1).
double normal_quantile(double p);

// Smallest k with P(X <= k) >= p for X ~ Binomial(n, prob).
int binomial_quantile(double p, int n, double prob);

}  // namespace aqr
