#pragma once

// Recursive-descent parsers for formula text and for element literals such
// as "E12 + E21", "diag(1,-1)", "i*one" or "E11@2".

#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eflab/algebra.hpp"
#include "eflab/formula.hpp"

namespace eflab {

class ParseError : public FormulaError {
 public:
  ParseError(const std::string& msg, std::size_t pos)
      : FormulaError(msg + " at position " + std::to_string(pos)), position_(pos) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

namespace detail {

struct Token {
  enum class Kind { ident, number, punct, end };
  Kind kind;
  std::string text;
  double number = 0;
  std::size_t pos = 0;
};

inline std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Token::Kind::ident, std::string(s.substr(i, j - i)), 0, i});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      // digits, an optional fraction (a '.' counts only when a digit follows)
      // and an optional exponent
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j + 1 < s.size() && s[j] == '.' && std::isdigit(static_cast<unsigned char>(s[j + 1]))) {
        ++j;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
          j = k;
        }
      }
      Token t{Token::Kind::number, std::string(s.substr(i, j - i)), 0, i};
      auto [p, ec] = std::from_chars(s.data() + i, s.data() + j, t.number);
      if (ec != std::errc() || p != s.data() + j) throw ParseError("bad number '" + t.text + "'", i);
      out.push_back(std::move(t));
      i = j;
      continue;
    }
    if (s.substr(i, 2) == "-." || s.substr(i, 2) == "^*") {
      out.push_back({Token::Kind::punct, std::string(s.substr(i, 2)), 0, i});
      i += 2;
      continue;
    }
    if (std::string_view("()+-*.,:@").find(c) != std::string_view::npos) {
      out.push_back({Token::Kind::punct, std::string(1, c), 0, i});
      ++i;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", i);
  }
  out.push_back({Token::Kind::end, "", 0, s.size()});
  return out;
}

class TokenStream {
 public:
  explicit TokenStream(std::string_view text) : toks_(tokenize(text)) {}

  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::punct && peek(ahead).text == p;
  }
  bool at_ident(std::string_view w, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Kind::ident && peek(ahead).text == w;
  }
  bool accept(std::string_view p) {
    if (!at_punct(p)) return false;
    ++pos_;
    return true;
  }
  void expect(std::string_view p) {
    if (!accept(p)) fail("expected '" + std::string(p) + "'");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw ParseError(msg + (t.kind == Token::Kind::end ? " but input ended" : ", found '" + t.text + "'"), t.pos);
  }
  std::size_t mark() const { return pos_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline bool is_keyword(std::string_view w) {
  return w == "sup" || w == "inf" || w == "max" || w == "min" || w == "abs" || w == "n2" || w == "reip" ||
         w == "imip" || w == "one" || w == "cplx";
}

class FormulaParser {
 public:
  FormulaParser(std::string_view text, bool allow_free) : ts_(text), allow_free_(allow_free) {}

  FormulaPtr parse_all() {
    FormulaPtr f = formula();
    if (ts_.peek().kind != Token::Kind::end) ts_.fail("unexpected trailing input");
    return f;
  }

 private:
  // formula := quant formula | additive
  FormulaPtr formula() {
    if (ts_.at_ident("sup") || ts_.at_ident("inf")) {
      const bool is_sup = ts_.next().text == "sup";
      const Token& v = ts_.next();
      if (v.kind != Token::Kind::ident || is_keyword(v.text))
        throw ParseError("variable name expected after quantifier", v.pos);
      ts_.expect(":");
      const Sort s = sort();
      ts_.expect(".");
      scopes_.push_back({v.text, s});
      FormulaPtr body = formula();
      scopes_.pop_back();
      return fml::quant(is_sup ? Formula::Kind::sup : Formula::Kind::inf, v.text, s, body);
    }
    return additive();
  }

  Sort sort() {
    const Token& t = ts_.next();
    if (t.kind == Token::Kind::ident) {
      if (t.text == "U") return Sort::unitary();
      if (t.text.size() >= 2 && t.text[0] == 'C' &&
          std::all_of(t.text.begin() + 1, t.text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        const int n = std::stoi(t.text.substr(1));
        if (n >= 1) return Sort::ball(n);
      }
    }
    throw ParseError("unknown sort '" + t.text + "'", t.pos);
  }

  FormulaPtr additive() {
    FormulaPtr lhs = unary();
    while (true) {
      if (ts_.accept("+"))
        lhs = fml::plus(lhs, unary());
      else if (ts_.accept("-."))
        lhs = fml::dotminus(lhs, unary());
      else
        return lhs;
    }
  }

  std::optional<double> signed_number() {
    if (ts_.peek().kind == Token::Kind::number) return ts_.next().number;
    if (ts_.at_punct("-") && ts_.peek(1).kind == Token::Kind::number) {
      ts_.next();
      return -ts_.next().number;
    }
    return std::nullopt;
  }

  FormulaPtr unary() {
    if (auto num = signed_number()) {
      if (ts_.accept("*")) return fml::scale(*num, unary());
      return fml::constant(*num);
    }
    const Token& t = ts_.peek();
    if (t.kind == Token::Kind::ident) {
      if (t.text == "sup" || t.text == "inf") return formula();
      if (t.text == "max" || t.text == "min") {
        ts_.next();
        ts_.expect("(");
        FormulaPtr a = formula();
        ts_.expect(",");
        FormulaPtr b = formula();
        ts_.expect(")");
        return t.text == "max" ? fml::max(a, b) : fml::min(a, b);
      }
      if (t.text == "abs") {
        ts_.next();
        ts_.expect("(");
        FormulaPtr a = formula();
        ts_.expect(")");
        return fml::abs(a);
      }
      if (t.text == "n2") {
        ts_.next();
        ts_.expect("(");
        TermPtr a = term_sum();
        ts_.expect(")");
        return fml::norm2(a);
      }
      if (t.text == "reip" || t.text == "imip") {
        const bool re = ts_.next().text == "reip";
        ts_.expect("(");
        TermPtr a = term_sum();
        ts_.expect(",");
        TermPtr b = term_sum();
        ts_.expect(")");
        return re ? fml::re_inner(a, b) : fml::im_inner(a, b);
      }
      throw ParseError("formula expected, term found", t.pos);
    }
    if (ts_.at_punct("(")) {
      // Either a parenthesized formula or a parenthesized term in formula
      // position; try the formula reading and report the term case.
      const std::size_t pos = t.pos;
      ts_.next();
      FormulaPtr f;
      try {
        f = formula();
      } catch (const ParseError& e) {
        if (std::string(e.what()).rfind("formula expected, term found", 0) == 0)
          throw ParseError("formula expected, term found", pos);
        throw;
      }
      ts_.expect(")");
      return f;
    }
    ts_.fail("formula expected");
  }

  // term := product (("+" | "-") product)*
  TermPtr term_sum() {
    TermPtr lhs = term_product();
    while (true) {
      if (ts_.accept("+"))
        lhs = term::sum(lhs, term_product());
      else if (ts_.at_punct("-") && !ts_.at_punct("-.")) {
        ts_.next();
        lhs = term::diff(lhs, term_product());
      } else {
        return lhs;
      }
    }
  }

  // product := unary (("*" | ".") unary)*
  TermPtr term_product() {
    TermPtr lhs = term_unary();
    while (ts_.at_punct("*") || ts_.at_punct(".")) {
      ts_.next();
      lhs = term::product(lhs, term_unary());
    }
    return lhs;
  }

  // unary := scalar "*" unary | "-" unary | postfix
  TermPtr term_unary() {
    if (auto num = signed_number()) {
      ts_.expect("*");
      return term::scale(*num, term_unary());
    }
    if (ts_.at_ident("cplx")) {
      ts_.next();
      ts_.expect("(");
      auto re = signed_number();
      if (!re) ts_.fail("number expected");
      ts_.expect(",");
      auto im = signed_number();
      if (!im) ts_.fail("number expected");
      ts_.expect(")");
      ts_.expect("*");
      return term::scale({*re, *im}, term_unary());
    }
    if (ts_.accept("-")) return term::scale(-1.0, term_unary());
    TermPtr t = term_primary();
    while (ts_.accept("^*")) t = term::adjoint(t);
    return t;
  }

  TermPtr term_primary() {
    if (ts_.accept("(")) {
      TermPtr t = term_sum();
      ts_.expect(")");
      return t;
    }
    const Token& t = ts_.peek();
    if (t.kind != Token::Kind::ident || (is_keyword(t.text) && t.text != "one")) ts_.fail("term expected");
    ts_.next();
    if (t.text == "one") return term::one();
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
      if (it->first == t.text) return term::var(t.text, it->second);
    if (!allow_free_) throw ParseError("unbound variable '" + t.text + "'", t.pos);
    return term::var(t.text, Sort::ball(1));
  }

  TokenStream ts_;
  bool allow_free_;
  std::vector<std::pair<std::string, Sort>> scopes_;
};

}  // namespace detail

/// Parses a formula; unbound variables are admitted as free variables of
/// sort C1.
inline FormulaPtr parse(std::string_view text) { return detail::FormulaParser(text, true).parse_all(); }

/// Parses a closed sentence; unbound variables are errors.
inline FormulaPtr parse_sentence(std::string_view text) { return detail::FormulaParser(text, false).parse_all(); }

// --- element literals ----------------------------------------------------------------

namespace detail {

class ElementParser {
 public:
  ElementParser(std::string_view text, AlgebraRef alg) : ts_(text), alg_(std::move(alg)) {}

  Element parse_all() {
    Element e = sum();
    if (ts_.peek().kind != Token::Kind::end) ts_.fail("unexpected trailing input");
    return e;
  }

 private:
  Element sum() {
    Element lhs = product();
    while (true) {
      if (ts_.accept("+"))
        lhs = lhs + product();
      else if (ts_.accept("-"))
        lhs = lhs - product();
      else
        return lhs;
    }
  }
  Element product() {
    Element lhs = unary();
    while (ts_.accept("*")) lhs = mul(lhs, unary());
    return lhs;
  }
  Element unary() {
    if (ts_.accept("-")) return -unary();
    Element e = primary();
    while (ts_.accept("^*")) e = e.adjoint();
    return e;
  }
  Element primary() {
    if (ts_.accept("(")) {
      Element e = sum();
      ts_.expect(")");
      return e;
    }
    const Token t = ts_.next();
    if (t.kind == Token::Kind::number) return Element::scalar(alg_, t.number);
    if (t.kind != Token::Kind::ident) throw ParseError("element expected", t.pos);
    if (t.text == "one") return Element::identity(alg_);
    if (t.text == "i") return Element::scalar(alg_, cplx(0, 1));
    if (t.text == "zero") return Element::zero(alg_);
    if (t.text == "diag") {
      ts_.expect("(");
      std::vector<cplx> entries;
      do entries.push_back(scalar_value()); while (ts_.accept(","));
      ts_.expect(")");
      return Element::diagonal(alg_, entries);
    }
    if (t.text.size() == 3 && t.text[0] == 'E' && std::isdigit(static_cast<unsigned char>(t.text[1])) &&
        std::isdigit(static_cast<unsigned char>(t.text[2]))) {
      std::size_t block = 0;
      if (ts_.accept("@")) {
        const Token b = ts_.next();
        if (b.kind != Token::Kind::number || b.number < 1) throw ParseError("block index expected", b.pos);
        block = static_cast<std::size_t>(b.number) - 1;
      }
      return Element::matrix_unit(alg_, t.text[1] - '0', t.text[2] - '0', block);
    }
    throw ParseError("unknown element literal '" + t.text + "'", t.pos);
  }
  // A complex scalar expression, evaluated in the algebra and read off.
  cplx scalar_value() {
    const std::size_t pos = ts_.peek().pos;
    Element e = sum();
    const cplx c = e.block(0)(0, 0);
    if (distance(e, Element::scalar(alg_, c)) > 0) throw ParseError("scalar expected inside diag", pos);
    return c;
  }

  TokenStream ts_;
  AlgebraRef alg_;
};

}  // namespace detail

inline Element parse_element(std::string_view text, const AlgebraRef& alg) {
  return detail::ElementParser(text, alg).parse_all();
}

}  // namespace eflab
