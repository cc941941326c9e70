#pragma once

// Numerical semantics: exact evaluation of quantifier-free formulas and a
// seeded multi-start minimax search for sentences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eflab/algebra.hpp"
#include "eflab/banach_pair.hpp"
#include "eflab/formula.hpp"
#include "eflab/random.hpp"

namespace eflab {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Assignment = std::map<std::string, Element>;

struct SortTolerance {
  double ball_relative = 1e-9;  // ||x|| <= n(1 + ball_relative)
  double unitary_defect = 1e-8;
};

inline void check_sort(const std::string& name, const Element& x, const Sort& s, const SortTolerance& tol = {}) {
  if (s.is_unitary()) {
    const double d = unitary_defect(x);
    if (d > tol.unitary_defect)
      throw EvalError("sort violation: " + name + " is not unitary (defect " + std::to_string(d) + ")");
  } else {
    const double on = op_norm(x);
    if (on > s.radius() * (1.0 + tol.ball_relative))
      throw EvalError("sort violation: " + name + " has operator norm " + std::to_string(on) + " > " +
                      std::to_string(s.n));
  }
}

namespace detail {

// Formula tree with variables resolved to slots of an environment vector.
struct CTerm {
  Term::Kind kind;
  int slot = -1;
  cplx scalar{1.0};
  std::vector<CTerm> subs;
};

struct CFormula {
  Formula::Kind kind;
  double value = 0;
  std::vector<CTerm> terms;
  std::vector<CFormula> subs;
};

inline CTerm compile(const TermPtr& t, const std::map<std::string, int>& slots) {
  CTerm c{t->kind, -1, t->scalar, {}};
  if (t->kind == Term::Kind::variable) {
    auto it = slots.find(t->name);
    if (it == slots.end()) throw EvalError("incomplete assignment: no value for '" + t->name + "'");
    c.slot = it->second;
  }
  for (const auto& s : t->subs) c.subs.push_back(compile(s, slots));
  return c;
}

inline CFormula compile(const FormulaPtr& f, const std::map<std::string, int>& slots) {
  if (f->is_quantifier()) throw EvalError("quantifier inside a quantifier-free evaluation");
  CFormula c{f->kind, f->value, {}, {}};
  for (const auto& t : f->terms) c.terms.push_back(compile(t, slots));
  for (const auto& s : f->subs) c.subs.push_back(compile(s, slots));
  return c;
}

inline Element eval(const CTerm& t, std::span<const Element> env, const AlgebraRef& alg, bool opposite) {
  switch (t.kind) {
    case Term::Kind::variable: return env[static_cast<std::size_t>(t.slot)];
    case Term::Kind::one: return Element::identity(alg);
    case Term::Kind::scale: return eval(t.subs[0], env, alg, opposite) * t.scalar;
    case Term::Kind::sum: return eval(t.subs[0], env, alg, opposite) + eval(t.subs[1], env, alg, opposite);
    case Term::Kind::product:
      return mul(eval(t.subs[0], env, alg, opposite), eval(t.subs[1], env, alg, opposite), opposite);
    case Term::Kind::adjoint: return eval(t.subs[0], env, alg, opposite).adjoint();
  }
  throw EvalError("bad term");
}

inline double eval(const CFormula& f, std::span<const Element> env, const AlgebraRef& alg, bool opposite) {
  using K = Formula::Kind;
  auto sub = [&](std::size_t i) { return eval(f.subs[i], env, alg, opposite); };
  switch (f.kind) {
    case K::norm2: return two_norm(eval(f.terms[0], env, alg, opposite));
    case K::re_inner:
      return trace_inner(eval(f.terms[0], env, alg, opposite), eval(f.terms[1], env, alg, opposite)).real();
    case K::im_inner:
      return trace_inner(eval(f.terms[0], env, alg, opposite), eval(f.terms[1], env, alg, opposite)).imag();
    case K::max: return std::max(sub(0), sub(1));
    case K::min: return std::min(sub(0), sub(1));
    case K::dotminus: return std::max(sub(0) - sub(1), 0.0);
    case K::plus: return sub(0) + sub(1);
    case K::abs: return std::abs(sub(0));
    case K::scale: return f.value * sub(0);
    case K::constant: return f.value;
    default: break;
  }
  throw EvalError("bad formula");
}

// Smoothed value used by local refinement: max/min/dotminus become
// log-sum-exp with temperature tau, abs and n2 are rounded at zero.
inline double eval_smooth(const CFormula& f, std::span<const Element> env, const AlgebraRef& alg, bool opposite,
                          double tau) {
  using K = Formula::Kind;
  auto sub = [&](std::size_t i) { return eval_smooth(f.subs[i], env, alg, opposite, tau); };
  auto smax = [tau](double a, double b) {
    const double m = std::max(a, b);
    return m + tau * std::log(std::exp((a - m) / tau) + std::exp((b - m) / tau));
  };
  switch (f.kind) {
    case K::norm2: {
      const double n = two_norm(eval(f.terms[0], env, alg, opposite));
      return std::sqrt(n * n + tau * tau);
    }
    case K::max: return smax(sub(0), sub(1));
    case K::min: return -smax(-sub(0), -sub(1));
    case K::dotminus: return smax(sub(0) - sub(1), 0.0);
    case K::plus: return sub(0) + sub(1);
    case K::abs: {
      const double a = sub(0);
      return std::sqrt(a * a + tau * tau);
    }
    case K::scale: return f.value * sub(0);
    default: return eval(f, env, alg, opposite);
  }
}

}  // namespace detail

/// Value of a term under an assignment; products honour `opposite`.
inline Element eval_term(const TermPtr& t, const Assignment& a, const AlgebraRef& alg, bool opposite = false) {
  std::map<std::string, int> slots;
  std::vector<Element> env;
  for (const auto& [name, x] : a) {
    slots[name] = static_cast<int>(env.size());
    env.push_back(x);
  }
  return detail::eval(detail::compile(t, slots), env, alg, opposite);
}

/// Exact (to rounding) value of a quantifier-free formula.
inline double eval_qf(const FormulaPtr& f, const Assignment& a, const AlgebraRef& alg, bool opposite = false,
                      const SortTolerance& tol = {}) {
  if (!is_quantifier_free(f)) throw EvalError("eval_qf: formula has quantifiers");
  std::map<std::string, int> slots;
  std::vector<Element> env;
  for (const auto& v : free_variables(f)) {
    auto it = a.find(v.name);
    if (it == a.end()) throw EvalError("incomplete assignment: no value for '" + v.name + "'");
    if (!it->second.same_parent(Element::zero(alg)))
      throw EvalError("assignment for '" + v.name + "' lives in " + it->second.algebra().label);
    check_sort(v.name, it->second, v.sort, tol);
    slots[v.name] = static_cast<int>(env.size());
    env.push_back(it->second);
  }
  return detail::eval(detail::compile(f, slots), env, alg, opposite);
}

// --- sentences ---------------------------------------------------------------------------

struct EvalConfig {
  std::size_t restarts = 32;
  std::size_t iterations = 400;
  std::size_t inner_restarts = 2;
  std::size_t inner_iterations = 30;
  std::size_t polish_restarts = 16;
  std::size_t polish_iterations = 200;
  /// Iteration budget when the outermost layer is also the innermost.
  std::size_t leaf_iterations = 4000;
  /// Finite-difference ascent steps applied to innermost-layer optima found
  /// at the top level or while polishing.
  std::size_t refine_iterations = 200;
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-4;
  double initial_step = 0.5;
  double min_step = 1e-8;
  bool opposite = false;
};

struct EvalResult {
  double value = 0;
  double uncertainty = 0;
  bool budget_exhausted = false;
  /// Witness chain in quantifier order: inf-layer witnesses and best-found
  /// sup-layer adversary samples.
  std::vector<std::pair<std::string, Element>> witnesses;
  EvalConfig config;
  std::string sentence_hash;
  std::string algebra;
};

namespace detail {

struct Layer {
  Formula::Kind kind;
  std::vector<std::size_t> slots;
  std::vector<Sort> sorts;
};

class MinimaxSearch {
 public:
  MinimaxSearch(const CFormula& body, AlgebraRef alg, std::vector<Layer> layers, const EvalConfig& cfg,
                std::vector<Element> env)
      : body_(body), alg_(std::move(alg)), layers_(std::move(layers)), cfg_(cfg), env_(std::move(env)) {}

  struct Outcome {
    double value = 0;
    std::vector<Element> tail;  // values of every slot from the layer on
    double uncertainty = 0;
    bool exhausted = false;
  };

  Outcome solve_top() {
    const std::size_t iterations =
        layers_.size() == 1 ? std::max(cfg_.iterations, cfg_.leaf_iterations) : cfg_.iterations;
    return solve(0, nullptr, cfg_.restarts, iterations, nullptr, true);
  }

 private:
  static bool better(Formula::Kind k, double a, double b) { return k == Formula::Kind::inf ? a < b : a > b; }

  std::size_t first_slot(std::size_t k) const { return layers_[k].slots.front(); }

  Element random_point(const Sort& s, Rng& rng) const {
    if (s.is_unitary()) return haar_unitary(alg_, rng).element;
    return random_contraction(alg_, rng) * s.radius();
  }

  Element retract(const Element& x, const Sort& s) const {
    if (s.is_unitary()) return nearest_unitary(x).element;
    return clip_to_ball(x, s.radius());
  }

  void write_tail(std::size_t from_slot, const std::vector<Element>& tail) {
    for (std::size_t i = 0; i < tail.size(); ++i) env_[from_slot + i] = tail[i];
  }

  std::vector<Element> read_tail(std::size_t from_slot) const {
    return {env_.begin() + static_cast<std::ptrdiff_t>(from_slot), env_.end()};
  }

  /// Projected finite-difference ascent (descent for inf) on the innermost
  /// layer, starting from x with value fx. Runs on smoothed objectives of
  /// decreasing temperature and keeps the best exact value seen.
  void refine_leaf(std::size_t k, std::vector<Element>& x, double& fx) {
    const Layer& layer = layers_[k];
    const std::size_t slot0 = first_slot(k);
    const double sign = layer.kind == Formula::Kind::inf ? -1.0 : 1.0;
    auto place = [&](const std::vector<Element>& pt) {
      for (std::size_t i = 0; i < pt.size(); ++i) env_[slot0 + i] = pt[i];
    };
    auto exact = [&](const std::vector<Element>& pt) {
      place(pt);
      return eval(body_, env_, alg_, cfg_.opposite);
    };
    constexpr double h = 1e-7;
    std::vector<Element> best_x = x;
    double best_f = fx;
    std::vector<std::vector<Matrix>> grad(x.size());
    const std::size_t per_stage = std::max<std::size_t>(1, cfg_.refine_iterations / 4);
    for (double tau : {1e-2, 1e-3, 1e-4, 0.0}) {
      auto objective = [&]() {
        return tau > 0 ? eval_smooth(body_, env_, alg_, cfg_.opposite, tau) : eval(body_, env_, alg_, cfg_.opposite);
      };
      place(x);
      double fcur = objective();
      double alpha = 0.1;
      for (std::size_t it = 0; it < per_stage && alpha > 1e-12; ++it) {
        double gnorm2 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          std::vector<Matrix> blocks = x[i].blocks();
          grad[i] = blocks;
          for (std::size_t b = 0; b < blocks.size(); ++b) {
            for (Eigen::Index r = 0; r < blocks[b].rows(); ++r) {
              for (Eigen::Index c = 0; c < blocks[b].cols(); ++c) {
                const cplx saved = blocks[b](r, c);
                blocks[b](r, c) = saved + h;
                env_[slot0 + i] = Element(alg_, blocks);
                const double dre = (objective() - fcur) / h;
                blocks[b](r, c) = saved + cplx(0.0, h);
                env_[slot0 + i] = Element(alg_, blocks);
                const double dim = (objective() - fcur) / h;
                blocks[b](r, c) = saved;
                grad[i][b](r, c) = cplx(dre, dim) * sign;
                gnorm2 += dre * dre + dim * dim;
              }
            }
          }
          env_[slot0 + i] = x[i];
        }
        if (!(gnorm2 > 0) || !std::isfinite(gnorm2)) break;
        const double gnorm = std::sqrt(gnorm2);
        while (alpha > 1e-12) {
          std::vector<Element> y;
          for (std::size_t i = 0; i < x.size(); ++i) {
            std::vector<Matrix> blocks = x[i].blocks();
            const double scale = alpha * layer.sorts[i].radius() / gnorm;
            for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b] += grad[i][b] * scale;
            y.push_back(retract(Element(alg_, std::move(blocks)), layer.sorts[i]));
          }
          place(y);
          const double fy = objective();
          if (sign * (fy - fcur) > 0) {
            x = std::move(y);
            fcur = fy;
            alpha = std::min(2.0 * alpha, 1.0);
            break;
          }
          place(x);
          alpha *= 0.5;
        }
      }
      const double fe = exact(x);
      if (sign * (fe - best_f) > 0) {
        best_f = fe;
        best_x = x;
      }
    }
    x = std::move(best_x);
    fx = best_f;
    place(x);
  }

  /// Value of layers k.. at the current environment prefix.
  Outcome inner_value(std::size_t k, Rng& rng, std::size_t restarts, std::size_t iterations,
                      const std::vector<Element>* warm) {
    if (k == layers_.size()) return {eval(body_, env_, alg_, cfg_.opposite), {}, 0.0, false};
    return solve(k, &rng, restarts, iterations, warm, false);
  }

  Outcome solve(std::size_t k, Rng* parent_rng, std::size_t restarts, std::size_t iterations,
                const std::vector<Element>* warm, bool top) {
    const Layer& layer = layers_[k];
    const std::size_t slot0 = first_slot(k);
    const std::size_t width = layer.slots.size();
    const bool last = k + 1 == layers_.size();

    struct Candidate {
      double value;
      std::vector<Element> tail;
      double gap;
      bool exhausted;
    };
    std::optional<Candidate> best;
    std::optional<double> runner_up;

    for (std::size_t r = 0; r < restarts; ++r) {
      Rng local = top ? make_rng(*cfg_.seed, r) : Rng((*parent_rng)());
      Rng& rng = local;

      std::vector<Element> x;
      if (r == 0 && warm) {
        x.assign(warm->begin(), warm->begin() + static_cast<std::ptrdiff_t>(width));
      } else {
        for (std::size_t i = 0; i < width; ++i) x.push_back(random_point(layer.sorts[i], rng));
        // one top-level restart starts from the unit, scaled to each sort's radius
        if (top && r == 1)
          for (std::size_t i = 0; i < width; ++i) x[i] = Element::identity(alg_) * layer.sorts[i].radius();
      }
      auto evaluate = [&](const std::vector<Element>& pt, const std::vector<Element>* inner_warm) {
        for (std::size_t i = 0; i < width; ++i) env_[slot0 + i] = pt[i];
        Outcome o = inner_value(k + 1, rng, cfg_.inner_restarts, cfg_.inner_iterations, inner_warm);
        return o;
      };
      std::vector<Element> inner_warm_store;
      const std::vector<Element>* inner_warm = nullptr;
      if (r == 0 && warm && warm->size() > width) {
        inner_warm_store.assign(warm->begin() + static_cast<std::ptrdiff_t>(width), warm->end());
        inner_warm = &inner_warm_store;
      }
      Outcome fx = evaluate(x, inner_warm);
      double step = cfg_.initial_step;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_int_distribution<std::size_t> pick(0, width - 1);
      std::size_t it = 0;
      std::size_t resets = 0;
      for (; it < iterations; ++it) {
        if (step <= cfg_.min_step) {
          // collapsed early: restart the step size from the current point
          if (iterations - it < 100 || resets == 3) break;
          step = cfg_.initial_step * 0.1;
          ++resets;
        }
        std::vector<Element> y = x;
        const bool joint = width == 1 || unit(rng) < 0.5;
        const std::size_t only = pick(rng);
        for (std::size_t i = 0; i < width; ++i) {
          if (!joint && i != only) continue;
          const double scale = step * layer.sorts[i].radius();
          y[i] = retract(x[i] + ginibre_element(alg_, rng) * scale, layer.sorts[i]);
        }
        Outcome fy = evaluate(y, fx.tail.empty() ? nullptr : &fx.tail);
        if (!better(layer.kind, fx.value, fy.value)) {
          const bool improved = better(layer.kind, fy.value, fx.value);
          x = std::move(y);
          fx = std::move(fy);
          step *= improved ? 1.5 : 1.0;
        } else {
          step *= 0.85;
        }
        step = std::min(step, 2.0);
      }
      const bool exhausted = step > 1e-3;
      if (last && (top || refining_) && cfg_.refine_iterations > 0) refine_leaf(k, x, fx.value);

      // Re-solve the inner layers at the final point with the polish budget.
      double gap = 0;
      Outcome settled = fx;
      if (!last) {
        for (std::size_t i = 0; i < width; ++i) env_[slot0 + i] = x[i];
        const bool was_refining = refining_;
        refining_ = true;
        Outcome polished = inner_value(k + 1, rng, std::max(cfg_.polish_restarts, cfg_.inner_restarts),
                                       std::max(cfg_.polish_iterations, cfg_.inner_iterations),
                                       fx.tail.empty() ? nullptr : &fx.tail);
        refining_ = was_refining;
        // keep whichever inner witness is better for the inner layer
        const Formula::Kind inner_kind = layers_[k + 1].kind;
        if (better(inner_kind, fx.value, polished.value)) polished = fx;
        gap = std::abs(polished.value - fx.value) + polished.uncertainty;
        settled = std::move(polished);
      }
      std::vector<Element> tail = x;
      tail.insert(tail.end(), settled.tail.begin(), settled.tail.end());
      Candidate cand{settled.value, std::move(tail), gap, exhausted && top};
      if (!best || better(layer.kind, cand.value, best->value)) {
        if (best) runner_up = best->value;
        best = std::move(cand);
      } else if (!runner_up || better(layer.kind, cand.value, *runner_up)) {
        runner_up = cand.value;
      }
    }
    double repolish_gap = 0;
    if (top && !last) {
      // An independent re-solve of the inner layers at the chosen point
      // measures how reproducible the inner value is.
      Rng rng = make_rng(*cfg_.seed, restarts + 1);
      write_tail(slot0, best->tail);
      refining_ = true;
      Outcome again = inner_value(k + 1, rng, std::max(cfg_.polish_restarts, cfg_.inner_restarts),
                                  std::max(cfg_.polish_iterations, cfg_.inner_iterations), nullptr);
      refining_ = false;
      repolish_gap = std::abs(again.value - best->value);
      if (better(layers_[k + 1].kind, again.value, best->value)) {
        best->value = again.value;
        best->tail.erase(best->tail.begin() + static_cast<std::ptrdiff_t>(width), best->tail.end());
        best->tail.insert(best->tail.end(), again.tail.begin(), again.tail.end());
      }
    }
    Outcome out;
    out.value = best->value;
    out.tail = std::move(best->tail);
    out.exhausted = best->exhausted;
    double u = std::max(cfg_.tolerance, repolish_gap);
    if (top && runner_up) u = std::max(u, std::abs(best->value - *runner_up));
    if (out.exhausted) u *= 2.0;
    out.uncertainty = top ? u : best->gap;
    return out;
  }

  const CFormula& body_;
  AlgebraRef alg_;
  std::vector<Layer> layers_;
  const EvalConfig& cfg_;
  std::vector<Element> env_;
  bool refining_ = false;
};

}  // namespace detail

/// Approximate value of a sentence by nested multi-start (1+1) evolution
/// strategies: runs of like quantifiers form one joint layer; ball sorts are
/// kept feasible by singular-value clipping, the unitary sort by polar
/// retraction. Inf layers therefore report upper bounds on the true inf.
/// Free variables must be supplied through `fixed`.
inline EvalResult eval_sentence(const FormulaPtr& sentence, const AlgebraRef& alg, const EvalConfig& cfg,
                                const Assignment& fixed = {}) {
  if (!cfg.seed) throw EvalError("eval_sentence: a seed is required");
  if (cfg.restarts == 0 || cfg.inner_restarts == 0) throw EvalError("eval_sentence: restarts must be positive");
  if (!is_prenex(sentence)) throw EvalError("eval_sentence: sentence is not prenex");
  std::map<std::string, int> slots;
  std::vector<Element> env;
  for (const auto& v : free_variables(sentence)) {
    auto it = fixed.find(v.name);
    if (it == fixed.end()) throw EvalError("eval_sentence: sentence is not closed (free variable '" + v.name + "')");
    check_sort(v.name, it->second, v.sort);
    slots[v.name] = static_cast<int>(env.size());
    env.push_back(it->second);
  }
  std::vector<detail::Layer> layers;
  std::vector<std::string> names;
  for (const auto& q : quantifier_prefix(sentence)) {
    if (layers.empty() || layers.back().kind != q.kind) layers.push_back({q.kind, {}, {}});
    layers.back().slots.push_back(env.size());
    layers.back().sorts.push_back(q.sort);
    slots[q.var] = static_cast<int>(env.size());
    names.push_back(q.var);
    env.push_back(Element::zero(alg));
  }
  const auto body = detail::compile(matrix_of(sentence), slots);

  EvalResult res;
  res.config = cfg;
  res.sentence_hash = sentence_hash(sentence);
  res.algebra = alg->label;
  if (layers.empty()) {
    res.value = detail::eval(body, env, alg, cfg.opposite);
    res.uncertainty = 0;
    return res;
  }
  const std::size_t nfree = env.size() - names.size();
  detail::MinimaxSearch search(body, alg, layers, cfg, env);
  auto out = search.solve_top();
  for (std::size_t i = 0; i < names.size(); ++i) {
    res.witnesses.emplace_back(names[i], out.tail[i]);
    env[nfree + i] = out.tail[i];
  }
  res.value = detail::eval(body, env, alg, cfg.opposite);
  res.uncertainty = out.uncertainty;
  res.budget_exhausted = out.exhausted;
  return res;
}

}  // namespace eflab
