#pragma once

#include <random>
#include <string>
#include <vector>

#include "eflab/formula.hpp"
#include "eflab/random.hpp"

namespace eflab {

/// Random formula generator for property tests; all draws come from `rng`.
class FormulaGenerator {
 public:
  struct Options {
    int term_depth = 3;
    int formula_depth = 3;
    bool products = true;
    bool adjoints = true;
    bool complex_scalars = true;
  };

  FormulaGenerator(Rng& rng, Options opt) : rng_(rng), opt_(opt) {}
  explicit FormulaGenerator(Rng& rng) : FormulaGenerator(rng, Options{}) {}

  TermPtr term(const std::vector<TermPtr>& vars, int depth) {
    if (depth <= 0 || coin(0.3)) {
      if (vars.empty() || coin(0.1)) return term::one();
      return vars[pick(vars.size())];
    }
    switch (pick(opt_.products ? 5 : 4)) {
      case 0: return term::sum(term(vars, depth - 1), term(vars, depth - 1));
      case 1: return term::scale(scalar(), term(vars, depth - 1));
      case 2: return opt_.adjoints ? term::adjoint(term(vars, depth - 1)) : term::diff(term(vars, depth - 1), term(vars, depth - 1));
      case 3: return term::diff(term(vars, depth - 1), term(vars, depth - 1));
      default: return term::product(term(vars, depth - 1), term(vars, depth - 1));
    }
  }

  FormulaPtr atom(const std::vector<TermPtr>& vars) {
    const int d = opt_.term_depth;
    switch (pick(3)) {
      case 0: return fml::norm2(term(vars, d));
      case 1: return fml::re_inner(term(vars, d - 1), term(vars, d - 1));
      default: return fml::im_inner(term(vars, d - 1), term(vars, d - 1));
    }
  }

  /// Quantifier-free formula over `vars`.
  FormulaPtr qf(const std::vector<TermPtr>& vars, int depth) {
    if (depth <= 0 || coin(0.25)) return coin(0.1) ? fml::constant(quarter(0, 4)) : atom(vars);
    switch (pick(6)) {
      case 0: return fml::max(qf(vars, depth - 1), qf(vars, depth - 1));
      case 1: return fml::min(qf(vars, depth - 1), qf(vars, depth - 1));
      case 2: return fml::dotminus(qf(vars, depth - 1), qf(vars, depth - 1));
      case 3: return fml::plus(qf(vars, depth - 1), qf(vars, depth - 1));
      case 4: return fml::abs(qf(vars, depth - 1));
      default: return fml::scale(quarter(1, 8), qf(vars, depth - 1));
    }
  }

  /// Prenex sentence with `quantifiers` quantifiers over x1, x2, ...
  FormulaPtr sentence(std::size_t quantifiers) {
    std::vector<TermPtr> vars;
    std::vector<Quantifier> prefix;
    for (std::size_t i = 0; i < quantifiers; ++i) {
      const Sort s = coin(0.2) ? Sort::unitary() : Sort::ball(coin(0.2) ? 2 : 1);
      const std::string name = "x" + std::to_string(i + 1);
      vars.push_back(term::var(name, s));
      prefix.push_back({coin(0.5) ? Formula::Kind::sup : Formula::Kind::inf, name, s});
    }
    FormulaPtr body = qf(vars, opt_.formula_depth);
    for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) body = fml::quant(it->kind, it->var, it->sort, body);
    return body;
  }

 private:
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  double quarter(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_) / 4.0; }

  cplx scalar() {
    if (opt_.complex_scalars && coin(0.3)) return {quarter(-4, 4), quarter(-4, 4)};
    double v = quarter(-8, 8);
    return v == 0.0 ? 0.5 : v;
  }

  Rng& rng_;
  Options opt_;
};

}  // namespace eflab
