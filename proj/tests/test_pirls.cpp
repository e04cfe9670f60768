#include "aqr/basis.hpp"
#include "aqr/errors.hpp"
#include "aqr/optim.hpp"
#include "aqr/pirls.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <random>

using namespace aqr;

namespace {

FullDesign intercept_design(const Dataset& d) {
  return build_design(parse_formula("y ~ 1"), d, DesignSide::Quantile);
}

Dataset gaussian_sample(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Dataset d;
  d.n = n;
  Vector y(n), x(n);
  for (int i = 0; i < n; ++i) {
    y[i] = gauss(rng);
    x[i] = -2.0 + 4.0 * i / (n - 1.0);
  }
  d.scalars["y"] = y;
  d.scalars["x"] = x;
  return d;
}

}  // namespace

TEST_CASE("intercept-only fit lands near the empirical quantile") {
  Dataset d = gaussian_sample(2000, 99);
  const Vector& y = d.scalars["y"];
  FullDesign design = intercept_design(d);
  ElfFamily family(y, ElfParams(0.9, 0.01, 1.0, 2000));
  BetaFit fit = fit_beta(design, Vector(0), family);
  CHECK(fit.converged);

  Vector sorted = y;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  double empirical = sorted[static_cast<int>(0.9 * 2000)];
  CHECK(std::abs(fit.beta[0] - empirical) < 0.05);
}

TEST_CASE("matches a derivative-free minimizer on small problems") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 60, d = 4;
    Dataset data;
    data.n = n;
    Matrix X(n, d);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      for (int j = 1; j < d; ++j) X(i, j) = gauss(rng);
      y[i] = X(i, 1) - 0.5 * X(i, 2) + 0.3 * gauss(rng);
    }
    FullDesign design;
    design.X = X;
    design.d = d;
    TermDesign td;
    td.kind = ColumnKind::Linear;
    td.offset = 0;
    td.width = d;
    td.penalties.push_back(difference_penalty(d, 1));
    design.terms.push_back(td);
    design.Mp = 1;

    Vector gamma(1);
    gamma << 0.7;
    ElfFamily family(y, ElfParams(0.7, 0.15, 0.8, n));
    BetaFit fit = fit_beta(design, gamma, family);

    auto crit = [&](const Vector& b) { return penalized_deviance(design, gamma, family, b); };
    NelderMeadOptions opts;
    opts.max_iter = 20000;
    opts.tol = 1e-13;
    opts.init_step = 0.5;
    NelderMeadResult nm = nelder_mead(crit, Vector::Zero(d), opts);
    nm = nelder_mead(crit, nm.x, {20000, 1e-14, 0.01});
    CHECK((fit.beta - nm.x).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("huge gamma forces the fit into the penalty null space") {
  Dataset d = gaussian_sample(300, 5);
  Vector& y = d.scalars["y"];
  const Vector& x = d.scalars["x"];
  for (int i = 0; i < 300; ++i) y[i] = std::sin(2.0 * x[i]) + 0.1 * y[i];

  FullDesign design = build_design(parse_formula("y ~ s(x, k=12)"), d, DesignSide::Quantile);
  Vector gamma(1);
  gamma << 1e8;
  ElfFamily family(y, ElfParams(0.5, 0.1, 1.0, 300));
  BetaFit fit = fit_beta(design, gamma, family);

  // The smooth term collapses onto a straight line: second differences of the
  // fitted term over an x grid vanish.
  const TermDesign& td = design.terms[1];
  Vector term = design.X.block(0, td.offset, d.n, td.width) * fit.beta.segment(td.offset, td.width);
  // x is a grid, so compare against the best-fitting line.
  Matrix L(300, 2);
  L.col(0).setOnes();
  L.col(1) = x;
  Vector resid = term - L * (L.colPivHouseholderQr().solve(term));
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-4);
  CHECK(fit.edf_per_term[1] < 1.2);
}

TEST_CASE("criterion decreases monotonically across accepted steps") {
  Dataset d = gaussian_sample(400, 8);
  FullDesign design = build_design(parse_formula("y ~ s(x, k=10)"), d, DesignSide::Quantile);
  Vector gamma(1);
  gamma << 2.0;
  ElfFamily family(d.scalars["y"], ElfParams(0.8, 0.05, 0.7, 400));
  std::vector<double> trace;
  PirlsOptions opts;
  opts.crit_trace = &trace;
  fit_beta(design, gamma, family, std::nullopt, opts);
  REQUIRE(trace.size() > 1);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] < trace[i - 1]);
}

TEST_CASE("analytic criterion gradient matches finite differences") {
  Dataset d = gaussian_sample(80, 21);
  FullDesign design = build_design(parse_formula("y ~ s(x, k=6)"), d, DesignSide::Quantile);
  Vector gamma(1);
  gamma << 1.3;
  ElfFamily family(d.scalars["y"], ElfParams(0.3, 0.2, 1.1, 80));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 20; ++rep) {
    Vector beta(design.d);
    for (int j = 0; j < design.d; ++j) beta[j] = 0.5 * gauss(rng);
    Vector grad;
    penalized_deviance(design, gamma, family, beta, &grad);
    for (int j = 0; j < design.d; ++j) {
      Vector bp = beta, bm = beta;
      bp[j] += 1e-6;
      bm[j] -= 1e-6;
      double fd = (penalized_deviance(design, gamma, family, bp) -
                   penalized_deviance(design, gamma, family, bm)) /
                  2e-6;
      CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("effective degrees of freedom shrink as gamma grows") {
  Dataset d = gaussian_sample(500, 77);
  Vector& y = d.scalars["y"];
  const Vector& x = d.scalars["x"];
  for (int i = 0; i < 500; ++i) y[i] = std::sin(3.0 * x[i]) + 0.3 * y[i];
  FullDesign design = build_design(parse_formula("y ~ s(x, k=12)"), d, DesignSide::Quantile);
  ElfFamily family(y, ElfParams(0.5, 0.1, 0.5, 500));
  double prev = 1e300;
  for (double g : {1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6}) {
    Vector gamma(1);
    gamma << g;
    BetaFit fit = fit_beta(design, gamma, family);
    CHECK(fit.edf_total < prev + 1e-9);
    prev = fit.edf_total;
  }
}

TEST_CASE("preconditions and failure reporting") {
  Dataset d = gaussian_sample(50, 4);
  FullDesign design = build_design(parse_formula("y ~ s(x, k=5)"), d, DesignSide::Quantile);
  ElfFamily family(d.scalars["y"], ElfParams(0.5, 0.1, 1.0, 50));
  Vector bad_gamma(1);
  bad_gamma << -1.0;
  CHECK_THROWS_AS(fit_beta(design, bad_gamma, family), std::invalid_argument);
  CHECK_THROWS_AS(fit_beta(design, Vector(0), family), std::invalid_argument);

  Vector gamma(1);
  gamma << 1.0;
  PirlsOptions tight;
  tight.max_iter = 1;
  tight.grad_tol = 1e-16;
  tight.change_tol = 1e-18;
  CHECK_THROWS_AS(fit_beta(design, gamma, family, std::nullopt, tight), NumericalError);
  tight.throw_on_failure = false;
  BetaFit fit = fit_beta(design, gamma, family, std::nullopt, tight);
  CHECK_FALSE(fit.converged);
  CHECK(fit.grad_norm > 0.0);
}
