#include "aqr/stats.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace aqr {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("normal_quantile: p outside [0, 1]");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement on Phi(x) - p.
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

int binomial_quantile(double p, int n, double prob) {
  if (n < 0) throw std::invalid_argument("binomial_quantile: n < 0");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("binomial_quantile: bad prob");
  if (prob == 0.0) return 0;
  if (prob == 1.0) return n;
  // Log pmf over 0..n, exponentiated with a max shift to avoid underflow;
  // n is small enough here (bin sizes) that O(n) is fine.
  std::vector<double> logpmf(n + 1);
  double lp = std::log(prob), lq = std::log1p(-prob);
  double lgn = std::lgamma(n + 1.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    logpmf[k] = lgn - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq;
    mx = std::max(mx, logpmf[k]);
  }
  double total = 0.0;
  for (int k = 0; k <= n; ++k) total += std::exp(logpmf[k] - mx);
  double cum = 0.0;
  for (int k = 0; k <= n; ++k) {
    cum += std::exp(logpmf[k] - mx);
    if (cum >= p * total) return k;
  }
  return n;
}

}  // namespace aqr
