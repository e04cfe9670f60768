#include "aqr/errors.hpp"
#include "aqr/formula.hpp"

#include <doctest.h>

#include <random>
#include <string>
#include <vector>

using namespace aqr;

TEST_CASE("adaptive smooth with variance part") {
  ModelSpec spec = parse_formula("accel ~ s(times, k=20, bs=\"ad\") | s(times)");
  CHECK(spec.response == "accel");
  REQUIRE(spec.quantile_terms.size() == 1);
  CHECK(spec.quantile_terms[0].kind == TermKind::Smooth);
  CHECK(spec.quantile_terms[0].basis == BasisType::AD);
  CHECK(spec.quantile_terms[0].k == 20);
  REQUIRE(spec.variance_terms.size() == 1);
  CHECK(spec.variance_terms[0].basis == BasisType::PS);
  CHECK(spec.variance_terms[0].k == 10);
  CHECK(spec.has_intercept);
}

TEST_CASE("intercept-only formula") {
  ModelSpec spec = parse_formula("y ~ 1");
  CHECK(spec.response == "y");
  CHECK(spec.quantile_terms.empty());
  CHECK(spec.variance_terms.empty());
  CHECK(spec.has_intercept);
}

TEST_CASE("mixed factor, linear, smooth and cyclic variance model") {
  ModelSpec spec = parse_formula(
      "dem ~ f:dow + dem48 + s(tod, k=6) + s(temp) + s(doy, bs=\"cc\") | s(doy, bs=\"cc\")");
  REQUIRE(spec.quantile_terms.size() == 5);
  CHECK(spec.quantile_terms[0].kind == TermKind::Factor);
  CHECK(spec.quantile_terms[0].variable == "dow");
  CHECK(spec.quantile_terms[1].kind == TermKind::Linear);
  CHECK(spec.quantile_terms[2].k == 6);
  CHECK(spec.quantile_terms[4].basis == BasisType::CC);
  REQUIRE(spec.variance_terms.size() == 1);
  CHECK(spec.variance_terms[0].basis == BasisType::CC);
}

TEST_CASE("matrix-by smooth and dropped intercept") {
  ModelSpec spec = parse_formula("dem ~ s(probLev, by=qDem48) - 1");
  CHECK_FALSE(spec.has_intercept);
  CHECK(spec.quantile_terms[0].by_variable == "qDem48");
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse_formula(""), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~"), FormulaError);
  CHECK_THROWS_AS(parse_formula("~ s(x)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ s(x, bs=\"xx\")"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ s(x, k=2)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ s(x, bs=\"cc\", k=3)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ s(x, bs=\"ad\", k=9)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ s(x, k=5, k=6)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ s(x) + junk)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ te(x, z)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ ti(x)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ x + s(x)"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ x + x"), FormulaError);
  CHECK_THROWS_AS(parse_formula("y ~ x | s(v) - 1"), FormulaError);

  try {
    parse_formula("y ~ s(x, bs=\"nope\")");
    FAIL("expected FormulaError");
  } catch (const FormulaError& e) {
    CHECK(e.position() == 12);  // points at the quoted code
  }
}

TEST_CASE("parse is pure") {
  std::string text = "y ~ f:a + b + s(c, k=7) | s(c)";
  CHECK(parse_formula(text) == parse_formula(text));
}

namespace {

Term random_term(std::mt19937_64& rng, int idx) {
  std::uniform_int_distribution<int> kind_d(0, 2);
  Term t;
  t.variable = "v" + std::to_string(idx);
  switch (kind_d(rng)) {
    case 0: t.kind = TermKind::Linear; break;
    case 1: t.kind = TermKind::Factor; break;
    default: {
      t.kind = TermKind::Smooth;
      std::uniform_int_distribution<int> basis_d(0, 2);
      t.basis = static_cast<BasisType>(basis_d(rng));
      int kmin = t.basis == BasisType::AD ? 10 : (t.basis == BasisType::CC ? 4 : 3);
      std::uniform_int_distribution<int> k_d(kmin, kmin + 20);
      t.k = k_d(rng);
      if (t.basis == BasisType::PS && rng() % 4 == 0) t.by_variable = "m" + std::to_string(idx);
      break;
    }
  }
  return t;
}

}  // namespace

TEST_CASE("render/parse round trip over generated specs") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    ModelSpec spec;
    spec.response = "resp";
    std::uniform_int_distribution<int> nq_d(0, 4), nv_d(0, 2);
    int nq = nq_d(rng), nv = nv_d(rng);
    for (int i = 0; i < nq; ++i) spec.quantile_terms.push_back(random_term(rng, i));
    for (int i = 0; i < nv; ++i) spec.variance_terms.push_back(random_term(rng, 100 + i));
    spec.has_intercept = rng() % 4 != 0;
    ModelSpec reparsed = parse_formula(render_formula(spec));
    CHECK(reparsed == spec);
    // And the canonical form is a fixed point.
    CHECK(render_formula(reparsed) == render_formula(spec));
  }
}
