#include "aqr/shash.hpp"

#include "aqr/optim.hpp"
#include "aqr/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace aqr {

namespace {

struct Core {
  double r, t, tprime;  // tprime = dt/dz
};

Core core_at(const SinhArcsinhFit& p, double z) {
  Core c;
  c.r = (z - p.mu) / p.scale;
  double a = p.delta * std::asinh(c.r) - p.eps;
  c.t = std::sinh(a);
  c.tprime = std::cosh(a) * p.delta / (p.scale * std::sqrt(1.0 + c.r * c.r));
  return c;
}

}  // namespace

double SinhArcsinhFit::pdf(double z) const {
  Core c = core_at(*this, z);
  return normal_pdf(c.t) * c.tprime;
}

double SinhArcsinhFit::dpdf(double z) const {
  // log f = log delta - log scale + 0.5 log(1+t^2) - 0.5 log(1+r^2)
  //         - t^2/2 - log(2 pi)/2;  f' = f * d log f / dz.
  Core c = core_at(*this, z);
  double dlogf = (c.t / (1.0 + c.t * c.t) - c.t) * c.tprime -
                 c.r / ((1.0 + c.r * c.r) * scale);
  return pdf(z) * dlogf;
}

double SinhArcsinhFit::cdf(double z) const { return normal_cdf(core_at(*this, z).t); }

double SinhArcsinhFit::quantile(double q) const {
  double t = normal_quantile(q);
  return mu + scale * std::sinh((std::asinh(t) + eps) / delta);
}

double SinhArcsinhFit::loglik(const Vector& z) const {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double f = pdf(z[i]);
    if (!(f > 0.0) || !std::isfinite(f)) return -std::numeric_limits<double>::infinity();
    ll += std::log(f);
  }
  return ll;
}

SinhArcsinhFit fit_shash(const Vector& z) {
  if (z.size() < 50) throw std::invalid_argument("fit_shash: need at least 50 observations");
  double m = z.mean();
  double sd = std::sqrt((z.array() - m).square().sum() / (z.size() - 1));
  if (!(sd > 0.0)) throw std::invalid_argument("fit_shash: degenerate sample");

  SinhArcsinhFit gauss;
  gauss.mu = m;
  gauss.scale = sd;

  auto negll = [&](const Vector& th) -> double {
    if (std::abs(th[2]) > 8.0 || std::abs(th[3]) > 3.0) return std::numeric_limits<double>::infinity();
    SinhArcsinhFit p;
    p.mu = th[0];
    p.scale = std::exp(th[1]);
    p.eps = th[2];
    p.delta = std::exp(th[3]);
    double ll = p.loglik(z);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  Vector th0(4);
  th0 << m, std::log(sd), 0.0, 0.0;
  NelderMeadOptions opts;
  opts.max_iter = 4000;
  opts.tol = 1e-11;
  opts.init_step = 0.2;
  NelderMeadResult r1 = nelder_mead(negll, th0, opts);
  opts.init_step = 0.02;
  NelderMeadResult r2 = nelder_mead(negll, r1.x, opts);
  const NelderMeadResult& best = r2.f <= r1.f ? r2 : r1;

  if (!std::isfinite(best.f) || best.f > -gauss.loglik(z) + 1e-9) {
    // Search failed to beat the moment-matched Gaussian member.
    gauss.fallback = true;
    return gauss;
  }
  SinhArcsinhFit fit;
  fit.mu = best.x[0];
  fit.scale = std::exp(best.x[1]);
  fit.eps = best.x[2];
  fit.delta = std::exp(best.x[3]);
  return fit;
}

}  // namespace aqr
