#pragma once

// Continuous-logic terms and formulas over the tracial-algebra language,
// with printing and the source-to-source transforms (opposite, unitary
// rewriting, quantifier stripping).

#include <charconv>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace eflab {

class FormulaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quantifier domain: the ball n*(A)_1 ("C<n>") or the unitary group ("U").
struct Sort {
  enum class Kind { ball, unitary };
  Kind kind = Kind::ball;
  int n = 1;

  static Sort ball(int n) { return {Kind::ball, n}; }
  static Sort unitary() { return {Kind::unitary, 1}; }
  bool is_unitary() const { return kind == Kind::unitary; }
  /// Operator-norm radius of the domain.
  double radius() const { return is_unitary() ? 1.0 : static_cast<double>(n); }

  friend bool operator==(const Sort&, const Sort&) = default;
};

inline std::string to_string(const Sort& s) { return s.is_unitary() ? "U" : "C" + std::to_string(s.n); }

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw FormulaError("cannot format number");
  return std::string(buf, end);
}

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  enum class Kind { variable, scale, sum, product, adjoint, one };
  Kind kind;
  std::string name;                      // variable
  Sort sort{};                           // variable
  std::complex<double> scalar{1.0, 0.0};  // scale
  std::vector<TermPtr> subs;             // scale/adjoint: 1, sum/product: 2
};

namespace term {
inline TermPtr var(std::string name, Sort s = Sort::ball(1)) {
  return std::make_shared<const Term>(Term{Term::Kind::variable, std::move(name), s, {}, {}});
}
inline TermPtr one() { return std::make_shared<const Term>(Term{Term::Kind::one, {}, {}, {}, {}}); }
inline TermPtr scale(std::complex<double> c, TermPtr t) {
  return std::make_shared<const Term>(Term{Term::Kind::scale, {}, {}, c, {std::move(t)}});
}
inline TermPtr sum(TermPtr a, TermPtr b) {
  return std::make_shared<const Term>(Term{Term::Kind::sum, {}, {}, {}, {std::move(a), std::move(b)}});
}
inline TermPtr diff(TermPtr a, TermPtr b) { return sum(std::move(a), scale(-1.0, std::move(b))); }
inline TermPtr product(TermPtr a, TermPtr b) {
  return std::make_shared<const Term>(Term{Term::Kind::product, {}, {}, {}, {std::move(a), std::move(b)}});
}
inline TermPtr adjoint(TermPtr t) {
  return std::make_shared<const Term>(Term{Term::Kind::adjoint, {}, {}, {}, {std::move(t)}});
}
}  // namespace term

inline bool equal(const TermPtr& a, const TermPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind || a->subs.size() != b->subs.size()) return false;
  switch (a->kind) {
    case Term::Kind::variable:
      if (a->name != b->name || !(a->sort == b->sort)) return false;
      break;
    case Term::Kind::scale:
      if (a->scalar != b->scalar) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a->subs.size(); ++i)
    if (!equal(a->subs[i], b->subs[i])) return false;
  return true;
}

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind { norm2, re_inner, im_inner, max, min, dotminus, plus, abs, scale, constant, sup, inf };
  Kind kind;
  double value = 0;             // scale factor or constant
  std::vector<TermPtr> terms;   // atoms
  std::vector<FormulaPtr> subs; // connectives and quantifier body
  std::string var;              // quantifiers
  Sort sort{};                  // quantifiers

  bool is_atom() const { return kind == Kind::norm2 || kind == Kind::re_inner || kind == Kind::im_inner; }
  bool is_quantifier() const { return kind == Kind::sup || kind == Kind::inf; }
};

namespace fml {
inline FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }
inline FormulaPtr norm2(TermPtr t) { return make({Formula::Kind::norm2, 0, {std::move(t)}, {}, {}, {}}); }
inline FormulaPtr re_inner(TermPtr a, TermPtr b) {
  return make({Formula::Kind::re_inner, 0, {std::move(a), std::move(b)}, {}, {}, {}});
}
inline FormulaPtr im_inner(TermPtr a, TermPtr b) {
  return make({Formula::Kind::im_inner, 0, {std::move(a), std::move(b)}, {}, {}, {}});
}
inline FormulaPtr binary(Formula::Kind k, FormulaPtr a, FormulaPtr b) {
  return make({k, 0, {}, {std::move(a), std::move(b)}, {}, {}});
}
inline FormulaPtr max(FormulaPtr a, FormulaPtr b) { return binary(Formula::Kind::max, std::move(a), std::move(b)); }
inline FormulaPtr min(FormulaPtr a, FormulaPtr b) { return binary(Formula::Kind::min, std::move(a), std::move(b)); }
inline FormulaPtr dotminus(FormulaPtr a, FormulaPtr b) {
  return binary(Formula::Kind::dotminus, std::move(a), std::move(b));
}
inline FormulaPtr plus(FormulaPtr a, FormulaPtr b) { return binary(Formula::Kind::plus, std::move(a), std::move(b)); }
inline FormulaPtr abs(FormulaPtr a) { return make({Formula::Kind::abs, 0, {}, {std::move(a)}, {}, {}}); }
inline FormulaPtr scale(double c, FormulaPtr a) { return make({Formula::Kind::scale, c, {}, {std::move(a)}, {}, {}}); }
inline FormulaPtr constant(double c) { return make({Formula::Kind::constant, c, {}, {}, {}, {}}); }
inline FormulaPtr quant(Formula::Kind k, std::string var, Sort s, FormulaPtr body) {
  return make({k, 0, {}, {std::move(body)}, std::move(var), s});
}
inline FormulaPtr sup(std::string var, Sort s, FormulaPtr body) {
  return quant(Formula::Kind::sup, std::move(var), s, std::move(body));
}
inline FormulaPtr inf(std::string var, Sort s, FormulaPtr body) {
  return quant(Formula::Kind::inf, std::move(var), s, std::move(body));
}
}  // namespace fml

inline bool equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind || a->terms.size() != b->terms.size() || a->subs.size() != b->subs.size())
    return false;
  if ((a->kind == Formula::Kind::scale || a->kind == Formula::Kind::constant) && a->value != b->value) return false;
  if (a->is_quantifier() && (a->var != b->var || !(a->sort == b->sort))) return false;
  for (std::size_t i = 0; i < a->terms.size(); ++i)
    if (!equal(a->terms[i], b->terms[i])) return false;
  for (std::size_t i = 0; i < a->subs.size(); ++i)
    if (!equal(a->subs[i], b->subs[i])) return false;
  return true;
}

// --- printing --------------------------------------------------------------------

namespace detail {

// Term precedence: 1 sum, 2 product/scale, 3 postfix adjoint, 4 primary.
inline int term_prec(const Term& t) {
  switch (t.kind) {
    case Term::Kind::sum: return 1;
    case Term::Kind::product:
    case Term::Kind::scale: return 2;
    case Term::Kind::adjoint: return 3;
    default: return 4;
  }
}

inline std::string format_scalar(std::complex<double> c) {
  if (c.imag() == 0.0) return format_real(c.real());
  return "cplx(" + format_real(c.real()) + "," + format_real(c.imag()) + ")";
}

inline void print_term(const Term& t, std::string& out);

inline void print_term_at(const Term& t, int min_prec, std::string& out) {
  if (term_prec(t) < min_prec) {
    out += '(';
    print_term(t, out);
    out += ')';
  } else {
    print_term(t, out);
  }
}

inline bool is_negation(const Term& t) { return t.kind == Term::Kind::scale && t.scalar == std::complex<double>(-1.0); }

inline void print_term(const Term& t, std::string& out) {
  switch (t.kind) {
    case Term::Kind::variable: out += t.name; break;
    case Term::Kind::one: out += "one"; break;
    case Term::Kind::sum:
      print_term_at(*t.subs[0], 1, out);
      if (is_negation(*t.subs[1])) {
        out += " - ";
        print_term_at(*t.subs[1]->subs[0], 2, out);
      } else {
        out += " + ";
        print_term_at(*t.subs[1], 2, out);
      }
      break;
    case Term::Kind::product:
      print_term_at(*t.subs[0], 2, out);
      out += '*';
      // a leading scalar on the right operand parses back as part of it
      print_term_at(*t.subs[1], t.subs[1]->kind == Term::Kind::scale ? 2 : 3, out);
      break;
    case Term::Kind::scale:
      out += format_scalar(t.scalar);
      out += '*';
      print_term_at(*t.subs[0], t.subs[0]->kind == Term::Kind::scale ? 2 : 3, out);
      break;
    case Term::Kind::adjoint:
      print_term_at(*t.subs[0], 3, out);
      out += "^*";
      break;
  }
}

// Formula precedence: 0 quantifier, 1 plus/dotminus, 2 scale, 3 primary.
inline int formula_prec(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::sup:
    case Formula::Kind::inf: return 0;
    case Formula::Kind::plus:
    case Formula::Kind::dotminus: return 1;
    case Formula::Kind::scale: return 2;
    default: return 3;
  }
}

inline void print_formula(const Formula& f, std::string& out);

inline void print_formula_at(const Formula& f, int min_prec, std::string& out) {
  if (formula_prec(f) < min_prec) {
    out += '(';
    print_formula(f, out);
    out += ')';
  } else {
    print_formula(f, out);
  }
}

inline void print_formula(const Formula& f, std::string& out) {
  using K = Formula::Kind;
  auto call = [&](const char* name) {
    out += name;
    out += '(';
    for (std::size_t i = 0; i < f.subs.size(); ++i) {
      if (i) out += ", ";
      print_formula(*f.subs[i], out);
    }
    out += ')';
  };
  switch (f.kind) {
    case K::norm2:
      out += "n2(";
      print_term(*f.terms[0], out);
      out += ')';
      break;
    case K::re_inner:
    case K::im_inner:
      out += f.kind == K::re_inner ? "reip(" : "imip(";
      print_term(*f.terms[0], out);
      out += ", ";
      print_term(*f.terms[1], out);
      out += ')';
      break;
    case K::max: call("max"); break;
    case K::min: call("min"); break;
    case K::abs: call("abs"); break;
    case K::plus:
    case K::dotminus:
      print_formula_at(*f.subs[0], 1, out);
      out += f.kind == K::plus ? " + " : " -. ";
      print_formula_at(*f.subs[1], 2, out);
      break;
    case K::scale:
      out += format_real(f.value);
      out += '*';
      print_formula_at(*f.subs[0], 2, out);
      break;
    case K::constant: out += format_real(f.value); break;
    case K::sup:
    case K::inf:
      out += f.kind == K::sup ? "sup " : "inf ";
      out += f.var + ":" + to_string(f.sort) + ". ";
      print_formula(*f.subs[0], out);
      break;
  }
}

}  // namespace detail

inline std::string to_string(const TermPtr& t) {
  std::string s;
  detail::print_term(*t, s);
  return s;
}

inline std::string to_string(const FormulaPtr& f) {
  std::string s;
  detail::print_formula(*f, s);
  return s;
}

/// FNV-1a over the normalized text, as 16 hex digits.
inline std::string sentence_hash(const FormulaPtr& f) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_string(f)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- structure ----------------------------------------------------------------------

inline bool is_quantifier_free(const FormulaPtr& f) {
  if (f->is_quantifier()) return false;
  for (const auto& s : f->subs)
    if (!is_quantifier_free(s)) return false;
  return true;
}

inline bool is_prenex(const FormulaPtr& f) {
  const Formula* p = f.get();
  while (p->is_quantifier()) p = p->subs[0].get();
  return is_quantifier_free(std::make_shared<const Formula>(*p));
}

struct Quantifier {
  Formula::Kind kind;
  std::string var;
  Sort sort;
};

inline std::vector<Quantifier> quantifier_prefix(const FormulaPtr& f) {
  std::vector<Quantifier> q;
  for (const Formula* p = f.get(); p->is_quantifier(); p = p->subs[0].get()) q.push_back({p->kind, p->var, p->sort});
  return q;
}

/// The quantifier-free matrix below the prenex prefix.
inline FormulaPtr matrix_of(const FormulaPtr& f) {
  FormulaPtr p = f;
  while (p->is_quantifier()) p = p->subs[0];
  return p;
}

struct FreeVariable {
  std::string name;
  Sort sort;
};

namespace detail {

inline void term_variables(const TermPtr& t, std::vector<FreeVariable>& out, const std::vector<std::string>& bound) {
  if (t->kind == Term::Kind::variable) {
    for (const auto& b : bound)
      if (b == t->name) return;
    for (const auto& v : out)
      if (v.name == t->name) return;
    out.push_back({t->name, t->sort});
    return;
  }
  for (const auto& s : t->subs) term_variables(s, out, bound);
}

inline void formula_variables(const FormulaPtr& f, std::vector<FreeVariable>& out, std::vector<std::string>& bound) {
  for (const auto& t : f->terms) term_variables(t, out, bound);
  if (f->is_quantifier()) {
    bound.push_back(f->var);
    formula_variables(f->subs[0], out, bound);
    bound.pop_back();
    return;
  }
  for (const auto& s : f->subs) formula_variables(s, out, bound);
}

inline void all_names(const FormulaPtr& f, std::set<std::string>& names) {
  std::vector<FreeVariable> vars;
  std::vector<std::string> none;
  for (const auto& t : f->terms) term_variables(t, vars, none);
  for (const auto& v : vars) names.insert(v.name);
  if (f->is_quantifier()) names.insert(f->var);
  for (const auto& s : f->subs) all_names(s, names);
}

}  // namespace detail

/// Free variables in order of first occurrence.
inline std::vector<FreeVariable> free_variables(const FormulaPtr& f) {
  std::vector<FreeVariable> out;
  std::vector<std::string> bound;
  detail::formula_variables(f, out, bound);
  return out;
}

inline bool is_closed(const FormulaPtr& f) { return free_variables(f).empty(); }

inline std::size_t quantifier_count(const FormulaPtr& f) {
  std::size_t n = f->is_quantifier() ? 1 : 0;
  for (const auto& s : f->subs) n += quantifier_count(s);
  return n;
}

/// Lipschitz modulus of a connective in each argument.
inline double connective_modulus(const Formula& f) {
  return f.kind == Formula::Kind::scale ? std::abs(f.value) : 1.0;
}

// --- transforms ----------------------------------------------------------------------

inline TermPtr op_transform(const TermPtr& t) {
  switch (t->kind) {
    case Term::Kind::variable:
    case Term::Kind::one: return t;
    case Term::Kind::product: return term::product(op_transform(t->subs[1]), op_transform(t->subs[0]));
    default: {
      Term copy = *t;
      for (auto& s : copy.subs) s = op_transform(s);
      return std::make_shared<const Term>(std::move(copy));
    }
  }
}

/// Swaps every product, leaving everything else in place.
inline FormulaPtr op_transform(const FormulaPtr& f) {
  Formula copy = *f;
  for (auto& t : copy.terms) t = op_transform(t);
  for (auto& s : copy.subs) s = op_transform(s);
  return fml::make(std::move(copy));
}

/// Replaces free occurrences of `name` by `replacement`.
inline TermPtr substitute(const TermPtr& t, const std::string& name, const TermPtr& replacement) {
  if (t->kind == Term::Kind::variable) return t->name == name ? replacement : t;
  if (t->subs.empty()) return t;
  Term copy = *t;
  for (auto& s : copy.subs) s = substitute(s, name, replacement);
  return std::make_shared<const Term>(std::move(copy));
}

inline FormulaPtr substitute(const FormulaPtr& f, const std::string& name, const TermPtr& replacement) {
  if (f->is_quantifier() && f->var == name) return f;
  Formula copy = *f;
  for (auto& t : copy.terms) t = substitute(t, name, replacement);
  for (auto& s : copy.subs) s = substitute(s, name, replacement);
  return fml::make(std::move(copy));
}

enum class UnitaryMode { u, uu };

/// Rewrites every inf-quantified x_i : C<n_i> (unitary-sorted variables are
/// left alone) as n_i*(u_i + v_i)/2 over two
/// fresh inf-quantified variables and appends the penalty
/// max(1 -. n2(u_i), 1 -. n2(v_i)) to the matrix with max. In mode uu the
/// fresh variables range over the unitary group.
inline FormulaPtr unitary_transform(const FormulaPtr& sentence, UnitaryMode mode) {
  if (!is_prenex(sentence)) throw FormulaError("unitary_transform: sentence is not prenex");
  if (!is_closed(sentence)) throw FormulaError("unitary_transform: sentence has free variables");
  const auto prefix = quantifier_prefix(sentence);
  FormulaPtr body = matrix_of(sentence);
  std::set<std::string> taken;
  detail::all_names(sentence, taken);
  auto fresh = [&](std::string base) {
    while (taken.count(base)) base += '_';
    taken.insert(base);
    return base;
  };
  const Sort fresh_sort = mode == UnitaryMode::uu ? Sort::unitary() : Sort::ball(1);

  std::vector<Quantifier> out_prefix;
  FormulaPtr penalty;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const auto& q = prefix[i];
    if (q.kind == Formula::Kind::sup || q.sort.is_unitary()) {
      out_prefix.push_back(q);
      continue;
    }
    const std::string idx = std::to_string(i + 1);
    const std::string u = fresh("u" + idx);
    const std::string v = fresh("v" + idx);
    const TermPtr tu = term::var(u, fresh_sort);
    const TermPtr tv = term::var(v, fresh_sort);
    body = substitute(body, q.var, term::scale(q.sort.radius() / 2.0, term::sum(tu, tv)));
    out_prefix.push_back({Formula::Kind::inf, u, fresh_sort});
    out_prefix.push_back({Formula::Kind::inf, v, fresh_sort});
    const FormulaPtr clause = fml::max(fml::dotminus(fml::constant(1.0), fml::norm2(tu)),
                                       fml::dotminus(fml::constant(1.0), fml::norm2(tv)));
    penalty = penalty ? fml::max(penalty, clause) : clause;
  }
  if (penalty) body = fml::max(body, penalty);
  for (auto it = out_prefix.rbegin(); it != out_prefix.rend(); ++it) body = fml::quant(it->kind, it->var, it->sort, body);
  return body;
}

/// sigma_l: the prenex sentence with its first n - l quantifiers removed.
inline FormulaPtr strip_quantifiers(const FormulaPtr& sentence, std::size_t l) {
  if (!is_prenex(sentence)) throw FormulaError("strip_quantifiers: sentence is not prenex");
  const std::size_t n = quantifier_prefix(sentence).size();
  if (l > n) throw FormulaError("strip_quantifiers: level " + std::to_string(l) + " exceeds quantifier count " +
                                std::to_string(n));
  FormulaPtr p = sentence;
  for (std::size_t k = 0; k < n - l; ++k) p = p->subs[0];
  return p;
}

}  // namespace eflab
