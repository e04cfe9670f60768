#pragma once

#include "aqr/types.hpp"

namespace aqr {

// Sinh-arcsinh distribution: with r = (z - mu)/scale and
// t = sinh(delta * asinh(r) - eps), the density is
//   f(z) = (delta / scale) * sqrt((1 + t^2) / (1 + r^2)) * phi(t)
// and the c.d.f. is Phi(t). eps = 0, delta = 1 recovers N(mu, scale^2).
struct SinhArcsinhFit {
  double mu = 0.0;
  double scale = 1.0;
  double eps = 0.0;
  double delta = 1.0;
  bool fallback = false;  // Gaussian fallback engaged during fitting

  double pdf(double z) const;
  double dpdf(double z) const;  // derivative of the density in z
  double cdf(double z) const;
  double quantile(double q) const;
  double loglik(const Vector& z) const;
};

// Maximum-likelihood fit over (mu, log scale, eps, log delta) by simplex
// search; falls back to the moment-matched Gaussian member (flagged) when the
// search fails. Requires n >= 50.
SinhArcsinhFit fit_shash(const Vector& z);

}  // namespace aqr
