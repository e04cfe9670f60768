#include "aqr/elf.hpp"
#include "aqr/errors.hpp"
#include "aqr/preliminary.hpp"
#include "aqr/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"

using namespace aqr;

namespace {

Dataset grid_data(int n, unsigned seed, bool hetero) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Dataset d;
  d.n = n;
  Vector x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -3.0 + 6.0 * i / (n - 1.0);
    double sd = hetero ? 1.0 + std::abs(x[i]) : 0.8;
    y[i] = x[i] + x[i] * x[i] + sd * gauss(rng);
  }
  d.scalars["x"] = x;
  d.scalars["y"] = y;
  return d;
}

double pearson(const Vector& a, const Vector& b) {
  Vector ac = a.array() - a.mean();
  Vector bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

// Reference densities for the bias-bound checks.
struct RefDensity {
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  double sup_f;
  double lo, hi;  // effective support for quadrature
};

RefDensity normal_ref() {
  return {[](double y) { return normal_pdf(y); }, [](double y) { return normal_cdf(y); },
          1.0 / std::sqrt(2.0 * M_PI), -14.0, 14.0};
}

RefDensity logistic_ref() {
  return {[](double y) {
            double s = sigmoid(y);
            return s * (1.0 - s);
          },
          [](double y) { return sigmoid(y); }, 0.25, -45.0, 45.0};
}

RefDensity gamma41_ref() {
  return {[](double y) { return y > 0.0 ? y * y * y * std::exp(-y) / 6.0 : 0.0; },
          [](double y) {
            if (y <= 0.0) return 0.0;
            return 1.0 - std::exp(-y) * (1.0 + y + y * y / 2.0 + y * y * y / 6.0);
          },
          27.0 * std::exp(-3.0) / 6.0, 0.0, 80.0};
}

// Population minimizer of the smoothed loss: the root of
// E[sigmoid((y - mu)/h)] = 1 - tau, found by bisection on quadrature values.
double smoothed_loss_minimizer(const RefDensity& f, double tau, double h) {
  auto mean_sig = [&](double mu) {
    return oracle::integrate_piecewise(
        [&](double y) { return sigmoid((y - mu) / h) * f.pdf(y); },
        {f.lo, mu - 5.0 * h, mu, mu + 5.0 * h, f.hi}, 1e-13);
  };
  double lo = f.lo - 10.0 * h, hi = f.hi + 10.0 * h;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mean_sig(mid) > 1.0 - tau)
      lo = mid;  // decreasing in mu
    else
      hi = mid;
    if (hi - lo < 1e-11) break;
  }
  return 0.5 * (lo + hi);
}

double expected_elf_loss(const RefDensity& f, double tau, double h, double mu) {
  return oracle::integrate_piecewise(
      [&](double y) { return elf_loss(y - mu, tau, h, 1.0) * f.pdf(y); },
      {f.lo, mu - 5.0 * h, mu, mu + 5.0 * h, f.hi}, 1e-12);
}

}  // namespace

TEST_CASE("location-scale fit, homoscedastic with empty variance model") {
  Dataset d = grid_data(2000, 1, false);
  ModelSpec spec = parse_formula("y ~ s(x, k=10)");
  LocationScaleFit fit = fit_location_scale(spec, d);
  CHECK(fit.converged);
  CHECK_FALSE(fit.variance.has_value());
  CHECK(std::abs(fit.kappa_const - 0.8) / 0.8 < 0.05);
  CHECK(std::abs(fit.z.mean()) < 0.05);
  double zsd = std::sqrt(fit.z.squaredNorm() / (fit.z.size() - 1));
  CHECK(std::abs(zsd - 1.0) < 0.05);
  // Mean function tracks x + x^2.
  const Vector& x = d.scalars["x"];
  Vector truth = x.array() + x.array().square();
  CHECK((fit.alpha_hat - truth).cwiseAbs().mean() < 0.15);
}

TEST_CASE("location-scale fit recovers a varying scale") {
  Dataset d = grid_data(3000, 2, true);
  ModelSpec spec = parse_formula("y ~ s(x, k=10) | s(x)");
  LocationScaleFit fit = fit_location_scale(spec, d);
  REQUIRE(fit.variance.has_value());
  const Vector& x = d.scalars["x"];
  Vector truth = 1.0 + x.array().abs();
  CHECK(pearson(fit.kappa_hat, truth) > 0.95);
  CHECK((fit.kappa_hat.array() > 0.0).all());
}

TEST_CASE("constant response is rejected") {
  Dataset d;
  d.n = 100;
  d.scalars["x"] = Vector::LinSpaced(100, -1.0, 1.0);
  d.scalars["y"] = Vector::Constant(100, 3.25);
  CHECK_THROWS_AS(fit_location_scale(parse_formula("y ~ s(x)"), d), DataError);
}

TEST_CASE("shash fit on standard normal draws") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  Vector z(5000);
  for (int i = 0; i < 5000; ++i) z[i] = gauss(rng);
  SinhArcsinhFit fit = fit_shash(z);
  CHECK_FALSE(fit.fallback);
  CHECK(std::abs(fit.eps) < 0.1);
  CHECK(std::abs(fit.delta - 1.0) < 0.1);

  // Independent grid-refined search cannot beat the returned likelihood.
  double best_grid = -1e300;
  for (double eps = -0.3; eps <= 0.3; eps += 0.05) {
    for (double ld = -0.3; ld <= 0.3; ld += 0.05) {
      SinhArcsinhFit cand;
      cand.mu = z.mean();
      cand.scale = std::sqrt(z.squaredNorm() / z.size());
      cand.eps = eps;
      cand.delta = std::exp(ld);
      best_grid = std::max(best_grid, cand.loglik(z));
    }
  }
  CHECK(fit.loglik(z) >= best_grid - 1e-6);
}

TEST_CASE("shash reduces to the normal at eps=0, delta=1") {
  SinhArcsinhFit p;  // defaults are the standard normal member
  for (double z : {-3.0, -1.2, 0.0, 0.4, 2.8}) {
    CHECK(p.pdf(z) == doctest::Approx(normal_pdf(z)).epsilon(1e-12));
    CHECK(p.cdf(z) == doctest::Approx(normal_cdf(z)).epsilon(1e-12));
  }
}

TEST_CASE("shash quantile inverts the cdf") {
  SinhArcsinhFit p;
  p.mu = 0.3;
  p.scale = 1.7;
  p.eps = -0.4;
  p.delta = 1.3;
  for (double q = 0.02; q < 1.0; q += 0.07) {
    double z = p.quantile(q);
    CHECK(p.cdf(z) == doctest::Approx(q).epsilon(1e-8));
    CHECK(p.quantile(p.cdf(z)) == doctest::Approx(z).epsilon(1e-8));
  }
  // Strictly increasing.
  double prev = p.quantile(0.01);
  for (double q = 0.06; q < 1.0; q += 0.05) {
    double cur = p.quantile(q);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("shash density integrates to one and derivative matches differences") {
  SinhArcsinhFit p;
  p.mu = -0.2;
  p.scale = 0.9;
  p.eps = 0.5;
  p.delta = 0.8;
  double mass = oracle::integrate_piecewise([&](double z) { return p.pdf(z); },
                                            {p.mu - 20.0 * p.scale, p.mu, p.mu + 20.0 * p.scale},
                                            1e-10);
  CHECK(std::abs(mass - 1.0) < 1e-5);
  for (double z : {-2.0, -0.5, 0.0, 0.3, 1.4, 3.0}) {
    double step = 1e-6;
    double fd = (p.pdf(z + step) - p.pdf(z - step)) / (2.0 * step);
    CHECK(p.dpdf(z) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("shash sample-size precondition") {
  Vector tiny = Vector::LinSpaced(10, -1.0, 1.0);
  CHECK_THROWS_AS(fit_shash(tiny), std::invalid_argument);
}

TEST_CASE("optimal bandwidth reproduces the normal-z hand value") {
  SinhArcsinhFit normal;  // standard normal member
  Vector kappa = Vector::Ones(100);
  BandwidthResult bw = optimal_bandwidth(0.9, 1000, 10.0, normal, kappa);
  CHECK_FALSE(bw.capped);
  CHECK(std::abs(bw.h_star[0] - 0.1474) < 1e-3);
  // Exact linearity in kappa.
  BandwidthResult bw2 = optimal_bandwidth(0.9, 1000, 10.0, normal, 2.0 * kappa);
  CHECK((bw2.h_star - 2.0 * bw.h_star).cwiseAbs().maxCoeff() < 1e-14);
  // Homogeneity of degree 1/3 in d/n.
  BandwidthResult bw8 = optimal_bandwidth(0.9, 1000, 80.0, normal, kappa);
  CHECK(bw8.h_star[0] == doctest::Approx(2.0 * bw.h_star[0]).epsilon(1e-10));
}

TEST_CASE("symmetric density at the median engages the cap") {
  SinhArcsinhFit normal;
  Vector kappa = Vector::Constant(50, 0.7);
  BandwidthResult bw = optimal_bandwidth(0.5, 1000, 10.0, normal, kappa);
  CHECK(bw.capped);
  CHECK((bw.h_star.array() == 10.0 * 0.7).all());
}

TEST_CASE("bandwidth decomposition identities") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  Vector h(40);
  for (int i = 0; i < 40; ++i) h[i] = unif(rng);

  SUBCASE("constant bandwidth") {
    Vector hc = Vector::Constant(40, 1.4);
    BandwidthDecomposition dec = decompose_bandwidth(hc, 2.0);
    CHECK(dec.lambda == doctest::Approx(0.7).epsilon(1e-14));
    CHECK((dec.sigma_tilde.array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK((dec.sigma.array() - 2.0).abs().maxCoeff() < 1e-12);
  }

  SUBCASE("reconstruction and normalization") {
    for (double sigma0 : {0.3, 1.0, 5.0}) {
      BandwidthDecomposition dec = decompose_bandwidth(h, sigma0);
      CHECK(std::abs(dec.sigma_tilde.mean() - 1.0) < 1e-12);
      for (int i = 0; i < 40; ++i)
        CHECK(dec.lambda * dec.sigma[i] == doctest::Approx(h[i]).epsilon(1e-14));
    }
  }

  SUBCASE("scaling sigma0 moves lambda only") {
    BandwidthDecomposition a = decompose_bandwidth(h, 1.0);
    BandwidthDecomposition b = decompose_bandwidth(h, 3.0);
    CHECK(b.lambda == doctest::Approx(a.lambda / 3.0).epsilon(1e-14));
    CHECK((a.sigma_tilde - b.sigma_tilde).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("manual bandwidth from the bias budget") {
  Vector one = Vector::Ones(1);
  bool warned = false;
  Vector h = err_to_bandwidth(0.05, one, &warned);
  CHECK_FALSE(warned);
  CHECK(h[0] == doctest::Approx(0.05 * std::sqrt(2.0 * M_PI) / (2.0 * std::log(2.0)))
                    .epsilon(1e-12));
  CHECK(std::abs(h[0] - 0.090417) < 1e-5);
  Vector h2 = err_to_bandwidth(0.10, one);
  CHECK(h2[0] == doctest::Approx(2.0 * h[0]).epsilon(1e-14));
  Vector h4 = err_to_bandwidth(0.05, 4.0 * one);
  CHECK(h4[0] == doctest::Approx(2.0 * h[0]).epsilon(1e-14));
  err_to_bandwidth(1.5, one, &warned);
  CHECK(warned);
  CHECK_THROWS_AS(err_to_bandwidth(0.0, one), std::invalid_argument);
}

TEST_CASE("bias bound closed form and round trip") {
  CHECK(bias_bound(0.3, 0.25) == doctest::Approx(2.0 * std::log(2.0) * 0.3 * 0.25).epsilon(1e-14));
  // err_to_bandwidth inverts the Gaussian form of the bound.
  double kappa_var = 2.3;
  Vector h = err_to_bandwidth(0.07, Vector::Constant(1, kappa_var));
  double sup_f = 1.0 / std::sqrt(2.0 * M_PI * kappa_var);
  CHECK(bias_bound(h[0], sup_f) == doctest::Approx(0.07).epsilon(1e-12));
}

TEST_CASE("measured smoothing bias never exceeds the bound") {
  std::vector<RefDensity> densities = {normal_ref(), logistic_ref(), gamma41_ref()};
  for (std::size_t di = 0; di < densities.size(); ++di) {
    const RefDensity& f = densities[di];
    for (double tau : {0.05, 0.25, 0.5, 0.75, 0.95}) {
      for (double h : {0.01, 0.1, 0.5, 1.0}) {
        double mu_star = smoothed_loss_minimizer(f, tau, h);
        double bias = std::abs(f.cdf(mu_star) - tau);
        CHECK(bias <= bias_bound(h, f.sup_f) + 1e-9);
      }
    }
  }
}

TEST_CASE("symmetric densities show no bias at the median") {
  for (const RefDensity& f : {normal_ref(), logistic_ref()}) {
    for (double h : {0.05, 0.3, 1.0}) {
      double mu_star = smoothed_loss_minimizer(f, 0.5, h);
      CHECK(std::abs(f.cdf(mu_star) - 0.5) < 1e-6);
    }
  }
}

TEST_CASE("bisection and golden-section oracles agree on the minimizer") {
  RefDensity f = gamma41_ref();
  double tau = 0.8, h = 0.3;
  double by_root = smoothed_loss_minimizer(f, tau, h);
  double q0 = 5.0;  // rough location of the 0.8 quantile of Gamma(4,1)
  double by_golden = oracle::golden_minimize(
      [&](double mu) { return expected_elf_loss(f, tau, h, mu); }, q0 - 3.0, q0 + 3.0, 1e-10);
  CHECK(std::abs(by_root - by_golden) < 1e-4);
}
