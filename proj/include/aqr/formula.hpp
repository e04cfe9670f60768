#pragma once

#include <string>
#include <vector>

namespace aqr {

enum class TermKind { Linear, Factor, Smooth };
enum class BasisType { PS, CC, AD };

std::string basis_code(BasisType b);

// One model term. Smooth-only fields keep their defaults for Linear/Factor.
struct Term {
  TermKind kind = TermKind::Linear;
  std::string variable;
  std::string by_variable;  // matrix covariate, smooth terms only
  BasisType basis = BasisType::PS;
  int k = 10;
  int degree = 3;

  bool operator==(const Term&) const = default;
};

// Parsed two-part formula: quantile model on the left of '|', variance model
// on the right (empty when absent, which selects constant-variance mode).
struct ModelSpec {
  std::string response;
  std::vector<Term> quantile_terms;
  std::vector<Term> variance_terms;
  bool has_intercept = true;

  bool operator==(const ModelSpec&) const = default;
};

// Grammar (also documented in the README):
//   formula   = response "~" termlist [ "|" termlist ]
//   termlist  = term { "+" term } [ "-" "1" ]
//   term      = "1" | ident | "f" ":" ident | smooth
//   smooth    = "s" "(" ident { "," option } ")"
//   option    = "k" "=" integer | "bs" "=" quoted-code | "by" "=" ident
// Throws FormulaError with the character position on any violation.
ModelSpec parse_formula(const std::string& text);

// Canonical text form; parse(render(spec)) == spec.
std::string render_formula(const ModelSpec& spec);

}  // namespace aqr
