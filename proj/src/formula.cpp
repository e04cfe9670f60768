#include "aqr/formula.hpp"

#include "aqr/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>

namespace aqr {

std::string basis_code(BasisType b) {
  switch (b) {
    case BasisType::PS: return "ps";
    case BasisType::CC: return "cc";
    case BasisType::AD: return "ad";
  }
  return "ps";
}

namespace {

struct Token {
  enum Type { Ident, Integer, String, Tilde, Plus, Minus, Pipe, LParen, RParen, Comma, Equal, Colon, End };
  Type type;
  std::string text;
  std::size_t pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) {}

  Token next() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    std::size_t start = i_;
    if (i_ >= s_.size()) return {Token::End, "", start};
    char c = s_[i_];
    switch (c) {
      case '~': ++i_; return {Token::Tilde, "~", start};
      case '+': ++i_; return {Token::Plus, "+", start};
      case '-': ++i_; return {Token::Minus, "-", start};
      case '|': ++i_; return {Token::Pipe, "|", start};
      case '(': ++i_; return {Token::LParen, "(", start};
      case ')': ++i_; return {Token::RParen, ")", start};
      case ',': ++i_; return {Token::Comma, ",", start};
      case '=': ++i_; return {Token::Equal, "=", start};
      case ':': ++i_; return {Token::Colon, ":", start};
      case '"': {
        ++i_;
        std::string out;
        while (i_ < s_.size() && s_[i_] != '"') out += s_[i_++];
        if (i_ >= s_.size()) throw FormulaError("unterminated string literal", start);
        ++i_;
        return {Token::String, out, start};
      }
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string out;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) out += s_[i_++];
      return {Token::Integer, out, start};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string out;
      while (i_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' || s_[i_] == '.'))
        out += s_[i_++];
      return {Token::Ident, out, start};
    }
    throw FormulaError(std::string("unexpected character '") + c + "'", start);
  }

 private:
  const std::string& s_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  explicit Parser(const std::string& s) : lex_(s) { advance(); }

  ModelSpec parse() {
    ModelSpec spec;
    spec.response = expect(Token::Ident, "response name").text;
    expect(Token::Tilde, "'~'");
    parse_termlist(spec.quantile_terms, &spec.has_intercept);
    if (cur_.type == Token::Pipe) {
      advance();
      parse_termlist(spec.variance_terms, nullptr);
    }
    if (cur_.type != Token::End) throw FormulaError("trailing input after formula", cur_.pos);
    validate(spec);
    return spec;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  Token expect(Token::Type t, const std::string& what) {
    if (cur_.type != t) throw FormulaError("expected " + what, cur_.pos);
    Token tok = cur_;
    advance();
    return tok;
  }

  void parse_termlist(std::vector<Term>& out, bool* intercept) {
    while (true) {
      if (cur_.type == Token::Integer && cur_.text == "1") {
        advance();  // bare intercept marker, adds no term
      } else {
        out.push_back(parse_term());
      }
      if (cur_.type == Token::Plus) {
        advance();
        continue;
      }
      if (cur_.type == Token::Minus) {
        std::size_t pos = cur_.pos;
        advance();
        Token one = expect(Token::Integer, "'1' after '-'");
        if (one.text != "1") throw FormulaError("only '- 1' may follow a term list", pos);
        if (intercept == nullptr)
          throw FormulaError("'- 1' is not allowed in the variance part", pos);
        *intercept = false;
      }
      break;
    }
  }

  Term parse_term() {
    Token head = expect(Token::Ident, "term");
    if (head.text == "te" || head.text == "ti") {
      if (cur_.type == Token::LParen)
        throw FormulaError("tensor smooths '" + head.text + "(...)' are unsupported", head.pos);
    }
    if (head.text == "s" && cur_.type == Token::LParen) return parse_smooth(head.pos);
    if (head.text == "f" && cur_.type == Token::Colon) {
      advance();
      Token var = expect(Token::Ident, "factor column name");
      Term t;
      t.kind = TermKind::Factor;
      t.variable = var.text;
      return t;
    }
    Term t;
    t.kind = TermKind::Linear;
    t.variable = head.text;
    return t;
  }

  Term parse_smooth(std::size_t spos) {
    expect(Token::LParen, "'('");
    Term t;
    t.kind = TermKind::Smooth;
    t.variable = expect(Token::Ident, "smooth variable").text;
    bool saw_k = false, saw_bs = false, saw_by = false;
    while (cur_.type == Token::Comma) {
      advance();
      Token key = expect(Token::Ident, "option name");
      expect(Token::Equal, "'='");
      if (key.text == "k") {
        if (saw_k) throw FormulaError("duplicate option 'k'", key.pos);
        saw_k = true;
        Token v = expect(Token::Integer, "integer for k");
        t.k = std::stoi(v.text);
      } else if (key.text == "bs") {
        if (saw_bs) throw FormulaError("duplicate option 'bs'", key.pos);
        saw_bs = true;
        Token v = expect(Token::String, "quoted basis code");
        if (v.text == "ps")
          t.basis = BasisType::PS;
        else if (v.text == "cc")
          t.basis = BasisType::CC;
        else if (v.text == "ad")
          t.basis = BasisType::AD;
        else
          throw FormulaError("unknown basis code \"" + v.text + "\"", v.pos);
      } else if (key.text == "by") {
        if (saw_by) throw FormulaError("duplicate option 'by'", key.pos);
        saw_by = true;
        t.by_variable = expect(Token::Ident, "matrix column name").text;
      } else {
        throw FormulaError("unknown option '" + key.text + "'", key.pos);
      }
    }
    expect(Token::RParen, "')'");
    int kmin = t.basis == BasisType::AD ? 10 : (t.basis == BasisType::CC ? 4 : 3);
    if (t.k < kmin)
      throw FormulaError("k=" + std::to_string(t.k) + " below minimum " + std::to_string(kmin) +
                             " for bs=\"" + basis_code(t.basis) + "\"",
                         spos);
    return t;
  }

  static void validate(const ModelSpec& spec) {
    if (spec.response.empty()) throw FormulaError("empty response", 0);
    auto check_part = [](const std::vector<Term>& terms) {
      for (std::size_t i = 0; i < terms.size(); ++i) {
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
          const Term &a = terms[i], &b = terms[j];
          if (a.variable != b.variable) continue;
          if (a.kind == b.kind && a.by_variable == b.by_variable)
            throw FormulaError("duplicate term on '" + a.variable + "'", 0);
          bool lin_and_smooth = (a.kind == TermKind::Linear && b.kind == TermKind::Smooth) ||
                                (a.kind == TermKind::Smooth && b.kind == TermKind::Linear);
          if (lin_and_smooth)
            throw FormulaError("'" + a.variable + "' appears as both a linear and a smooth term", 0);
        }
      }
    };
    check_part(spec.quantile_terms);
    check_part(spec.variance_terms);
  }

  Lexer lex_;
  Token cur_{Token::End, "", 0};
};

}  // namespace

ModelSpec parse_formula(const std::string& text) {
  if (text.empty()) throw FormulaError("empty formula", 0);
  return Parser(text).parse();
}

std::string render_formula(const ModelSpec& spec) {
  auto render_term = [](const Term& t) -> std::string {
    switch (t.kind) {
      case TermKind::Linear: return t.variable;
      case TermKind::Factor: return "f:" + t.variable;
      case TermKind::Smooth: {
        std::ostringstream os;
        os << "s(" << t.variable << ", k=" << t.k << ", bs=\"" << basis_code(t.basis) << "\"";
        if (!t.by_variable.empty()) os << ", by=" << t.by_variable;
        os << ")";
        return os.str();
      }
    }
    return "";
  };
  std::ostringstream os;
  os << spec.response << " ~ ";
  if (spec.quantile_terms.empty()) {
    os << "1";
  } else {
    for (std::size_t i = 0; i < spec.quantile_terms.size(); ++i) {
      if (i) os << " + ";
      os << render_term(spec.quantile_terms[i]);
    }
  }
  if (!spec.has_intercept) os << " - 1";
  if (!spec.variance_terms.empty()) {
    os << " | ";
    for (std::size_t i = 0; i < spec.variance_terms.size(); ++i) {
      if (i) os << " + ";
      os << render_term(spec.variance_terms[i]);
    }
  }
  return os.str();
}

}  // namespace aqr
