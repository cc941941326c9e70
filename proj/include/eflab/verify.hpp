#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "eflab/algebra.hpp"
#include "eflab/banach_pair.hpp"
#include "eflab/battery.hpp"
#include "eflab/evaluator.hpp"
#include "eflab/formula_gen.hpp"
#include "eflab/games.hpp"
#include "eflab/random.hpp"

namespace eflab {

class UnknownCheckError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Outcome of one named check. `worst_slack` is the largest amount by which
/// the checked inequality was exceeded (negative when every trial held with
/// room to spare); pass iff worst_slack <= tolerance.
struct CheckReport {
  std::string name;
  std::size_t trials = 0;
  double worst_slack = -std::numeric_limits<double>::infinity();
  double tolerance = 0;
  bool pass = false;
  std::uint64_t seed = 0;
  std::vector<std::string> algebras;
  std::map<std::string, double> details;  // diagnostics, not part of the verdict
  std::string note;
};

struct VerifyOptions {
  std::vector<std::string> battery = {"M2", "M3", "M4", "C+C:1/2,1/2", "C+C:1/3,2/3", "M2+M3:0.4,0.6"};
  std::size_t trials = 1000;  // per algebra (and per epsilon where a check sweeps epsilon)
  std::uint64_t seed = 0;
  std::size_t z4_trials = 10000;
  std::size_t sentence_restarts = 16;  // op-duality sentence level
  std::size_t net_spans = 3;
  std::size_t cover_samples = 100000;
};

namespace detail {

inline std::uint64_t name_stream(std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ull;
  return h;
}

inline const std::vector<double>& lemma_epsilons() {
  static const std::vector<double> eps = {0.3, 0.1, 0.03, 0.01};
  return eps;
}

inline void observe(CheckReport& r, double slack) { r.worst_slack = std::max(r.worst_slack, slack); }

inline void finish(CheckReport& r) { r.pass = r.worst_slack <= r.tolerance; }

inline double real_trace(const Element& x) { return trace(x).real(); }

}  // namespace detail

/// Nearest unitary of a contraction y with ||y||_2 >= 1 - 2 eps, and of a
/// point z within eps of y, stays within 4 sqrt(eps); plus the links of
/// ||1 - |y|||_2^2 = 1 + tr|y|^2 - 2 tr|y| <= 1 - tr|y| <= 1 - ||y||_2^2 <= 4 eps.
inline CheckReport check_unitary_lemma(const VerifyOptions& opt) {
  CheckReport r{.name = "unitary-lemma", .tolerance = 1e-12, .seed = opt.seed, .algebras = opt.battery};
  double constant = 0;
  std::size_t reversed_link = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    for (double eps : detail::lemma_epsilons()) {
      for (std::size_t t = 0; t < opt.trials; ++t) {
        const Element y = random_contraction_with_two_norm(alg, 1.0 - 2.0 * eps, rng);
        const Element g = ginibre_element(alg, rng);
        const Element z = y + g * (eps * std::uniform_real_distribution<double>(0.0, 1.0)(rng) / two_norm(g));
        const PolarDecomposition pd = polar(y);
        const Element& v = pd.unitary.element;
        const double ny = two_norm(y);
        const double tr_abs = detail::real_trace(pd.positive);
        const double tr_sq = detail::real_trace(mul(pd.positive, pd.positive));
        const double one_minus = two_norm(Element::identity(alg) - pd.positive);
        detail::observe(r, (1.0 - 2.0 * eps) - ny);
        detail::observe(r, std::abs(one_minus * one_minus - (1.0 + tr_sq - 2.0 * tr_abs)));
        detail::observe(r, (1.0 + tr_sq - 2.0 * tr_abs) - (1.0 - tr_abs));
        detail::observe(r, (1.0 - tr_abs) - (1.0 - ny * ny));
        detail::observe(r, (1.0 - ny * ny) - 4.0 * eps);
        const double dy = distance(y, v);
        const double dz = distance(z, v);
        detail::observe(r, dy - 4.0 * std::sqrt(eps));
        detail::observe(r, dz - 4.0 * std::sqrt(eps));
        detail::observe(r, unitary_defect(v) - 1e-10);
        constant = std::max(constant, dy / std::sqrt(eps));
        reversed_link += (1.0 - tr_abs) > (1.0 - ny) + 1e-12;
        ++r.trials;
      }
    }
  }
  r.details["empirical_constant"] = constant;
  r.details["reversed_link_violations"] = static_cast<double>(reversed_link);
  r.note = "asserts ||y - u||_2 <= 4 sqrt(eps) and ||z - u||_2 <= 4 sqrt(eps) for ||z - y||_2 <= eps; "
           "empirical_constant is max ||y - u||_2 / sqrt(eps)";
  detail::finish(r);
  return r;
}

/// Contractions with ||x||_2 >= 1 - eps are within 2 sqrt(eps) of their
/// nearest unitary.
inline CheckReport check_claim2_bound(const VerifyOptions& opt) {
  CheckReport r{.name = "claim2-bound", .tolerance = 0, .seed = opt.seed, .algebras = opt.battery};
  double constant = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    for (double eps : detail::lemma_epsilons()) {
      for (std::size_t t = 0; t < opt.trials; ++t) {
        const Element x = random_contraction_with_two_norm(alg, 1.0 - eps, rng);
        const UnitaryCertificate u = nearest_unitary(x);
        const double d = distance(u.element, x);
        detail::observe(r, (1.0 - eps) - two_norm(x));
        detail::observe(r, d - 2.0 * std::sqrt(eps));
        detail::observe(r, u.defect - 1e-10);
        constant = std::max(constant, d / std::sqrt(eps));
        ++r.trials;
      }
    }
  }
  r.details["empirical_constant"] = constant;
  detail::finish(r);
  return r;
}

/// x = (w1 + w2)/2 with w1, w2 unitary: reconstruction and unitary defects.
inline CheckReport check_avg2_exact(const VerifyOptions& opt) {
  CheckReport r{.name = "avg2-exact", .tolerance = 1e-10, .seed = opt.seed, .algebras = opt.battery};
  double worst_reconstruction = 0;
  double worst_defect = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const Element x = random_contraction(alg, rng);
      const UnitaryPair p = avg_two_unitaries(x);
      const double rec = distance((p.first.element + p.second.element) * 0.5, x);
      const double def = std::max(p.first.defect, p.second.defect);
      worst_reconstruction = std::max(worst_reconstruction, rec);
      worst_defect = std::max(worst_defect, def);
      detail::observe(r, std::max(rec, def));
      ++r.trials;
    }
  }
  r.details["worst_reconstruction"] = worst_reconstruction;
  r.details["worst_unitary_defect"] = worst_defect;
  detail::finish(r);
  return r;
}

/// Re<u, w> = 1 - d(u, w)^2 / 2 and Im<u, w> = 1 - d(u, i w)^2 / 2.
inline CheckReport check_z4_identity(const VerifyOptions& opt) {
  CheckReport r{.name = "z4-identity", .tolerance = 1e-12, .seed = opt.seed, .algebras = opt.battery};
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    for (std::size_t t = 0; t < opt.z4_trials; ++t) {
      const Element u = haar_unitary(alg, rng).element;
      const Element w = haar_unitary(alg, rng).element;
      const cplx ip = trace_inner(u, w);
      const double d = distance(u, w);
      const double di = distance(u, w * cplx(0, 1));
      detail::observe(r, std::abs(ip.real() - (1.0 - 0.5 * d * d)));
      detail::observe(r, std::abs(ip.imag() - (1.0 - 0.5 * di * di)));
      ++r.trials;
    }
  }
  detail::finish(r);
  return r;
}

/// Known 2-norm isometries onto the algebra (identity, transpose, inner
/// automorphisms) send unitaries to unitaries.
inline CheckReport check_kirchberg_step(const VerifyOptions& opt) {
  CheckReport r{.name = "kirchberg-step", .tolerance = 1e-10, .seed = opt.seed, .algebras = opt.battery};
  double isometry_defect = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    const Element one = Element::identity(alg);
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const Element w = haar_unitary(alg, rng).element;
      const Element u = haar_unitary(alg, rng).element;
      const Element x = ginibre_element(alg, rng);
      const std::vector<std::function<Element(const Element&)>> maps = {
          [](const Element& e) { return e; }, [](const Element& e) { return transpose(e); },
          [&](const Element& e) { return mul(mul(w.adjoint(), e), w); }};
      for (const auto& map : maps) {
        const Element tu = map(u);
        detail::observe(r, two_norm(mul(tu.adjoint(), tu) - one));
        isometry_defect = std::max(isometry_defect, std::abs(two_norm(map(x)) - two_norm(x)) / two_norm(x));
      }
      ++r.trials;
    }
  }
  r.details["relative_isometry_defect"] = isometry_defect;
  detail::finish(r);
  return r;
}

/// Transpose preserves the Jordan product and the adjoint.
inline CheckReport check_jordan_transpose(const VerifyOptions& opt) {
  CheckReport r{.name = "jordan-transpose", .tolerance = 1e-15, .seed = opt.seed, .algebras = opt.battery};
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const Element x = random_contraction(alg, rng);
      const Element y = random_contraction(alg, rng);
      detail::observe(r, op_norm(transpose(jordan_product(x, y)) - jordan_product(transpose(x), transpose(y))));
      detail::observe(r, op_norm(transpose(x.adjoint()) - transpose(x).adjoint()));
      ++r.trials;
    }
  }
  r.note = "slack is the operator-norm difference of the two sides";
  detail::finish(r);
  return r;
}

/// phi^op in A against phi in A^op on random quantifier-free instances
/// (bitwise), then sentence values in A and A^op on M2 within twice the
/// reported uncertainty.
inline CheckReport check_op_duality(const VerifyOptions& opt) {
  CheckReport r{.name = "op-duality", .tolerance = 0, .seed = opt.seed, .algebras = opt.battery};
  std::size_t mismatches = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    FormulaGenerator gen(rng);
    const std::vector<TermPtr> vars = {term::var("x1"), term::var("x2", Sort::ball(2)),
                                       term::var("x3", Sort::unitary())};
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const FormulaPtr f = gen.qf(vars, 3);
      const Assignment asg = {{"x1", random_contraction(alg, rng)},
                              {"x2", random_contraction(alg, rng) * 2.0},
                              {"x3", haar_unitary(alg, rng).element}};
      const double lhs = eval_qf(op_transform(f), asg, alg, false);
      const double rhs = eval_qf(f, asg, alg, true);
      mismatches += !(lhs == rhs);
      detail::observe(r, std::abs(lhs - rhs));
      ++r.trials;
    }
  }
  auto m2 = make_algebra("M2");
  double worst_ratio = 0;
  for (const auto& s : sentence_battery()) {
    EvalConfig cfg;
    cfg.restarts = opt.sentence_restarts;
    cfg.seed = opt.seed;
    const EvalResult plain = eval_sentence(s, m2, cfg);
    cfg.opposite = true;
    const EvalResult op = eval_sentence(s, m2, cfg);
    const double gap = std::abs(plain.value - op.value);
    const double allowed = 2.0 * std::max(plain.uncertainty, op.uncertainty);
    detail::observe(r, gap - allowed);
    worst_ratio = std::max(worst_ratio, gap / allowed);
    ++r.trials;
  }
  r.details["qf_mismatches"] = static_cast<double>(mismatches);
  r.details["worst_sentence_gap_over_allowance"] = worst_ratio;
  r.details["sentence_restarts"] = static_cast<double>(opt.sentence_restarts);
  detail::finish(r);
  return r;
}

/// Net of E cap (M2)_1 for E spanned by one or two Haar unitaries at
/// eps = 0.25: probabilistic cover check, exact two-unitary decomposition of
/// every net point, family size s <= n + 2 (net size), and the one-round
/// representability map of the spanning unitaries into M2.
inline CheckReport check_net_proposition(const VerifyOptions& opt) {
  CheckReport r{.name = "net-proposition", .tolerance = 0, .seed = opt.seed, .algebras = {"M2"}};
  const double eps = 0.25;
  auto m2 = make_algebra("M2");
  Rng rng = make_rng(opt.seed, detail::name_stream(r.name));
  double worst_cover = 0;
  double worst_decomposition = 0;
  double largest_net = 0;
  double worst_map = 0;
  for (std::size_t k = 0; k < opt.net_spans; ++k) {
    const std::size_t n = k == 0 ? 1 : 2;
    std::vector<Element> us;
    for (std::size_t i = 0; i < n; ++i) us.push_back(haar_unitary(m2, rng).element);
    const Subspace e = subspace_span(us);
    const Net net = build_net(e, eps);
    const CoverCheck cover = check_net_cover(e, net, opt.cover_samples, derive_seed(opt.seed, k));
    worst_cover = std::max(worst_cover, cover.worst_distance);
    detail::observe(r, cover.worst_distance - eps / 2.0);

    std::vector<Element> family = us;
    for (const auto& p : net.points) {
      const UnitaryPair pair = avg_two_unitaries(p);
      const double defect = std::max({distance((pair.first.element + pair.second.element) * 0.5, p),
                                      pair.first.defect, pair.second.defect});
      worst_decomposition = std::max(worst_decomposition, defect);
      detail::observe(r, defect - 1e-10);
      family.push_back(pair.first.element);
      family.push_back(pair.second.element);
    }
    detail::observe(r, static_cast<double>(family.size()) - static_cast<double>(n + 2 * net.points.size()));
    largest_net = std::max(largest_net, static_cast<double>(net.points.size()));

    GameConfig cfg;
    cfg.m_spec = cfg.n_spec = "M2";
    cfg.epsilon = eps;
    cfg.seed = derive_seed(opt.seed, k);
    const Transcript t = play_representability_game(cfg, us);
    for (double m : t.margins) {
      worst_map = std::max(worst_map, m);
      detail::observe(r, m - eps);
    }
    if (t.forfeit) detail::observe(r, 1.0);
    ++r.trials;
  }
  r.details["worst_cover_distance"] = worst_cover;
  r.details["worst_decomposition_defect"] = worst_decomposition;
  r.details["largest_net"] = largest_net;
  r.details["worst_map_margin"] = worst_map;
  r.note = "each net point is an exact average of two unitaries (polar decomposition) in place of a convex "
           "combination of boundedly many unitaries";
  detail::finish(r);
  return r;
}

/// Maps with ||T||, ||T^{-1}|| <= 1 + delta move inner products of 2-norm
/// contractions by at most 8 delta + 4 delta^2.
inline CheckReport check_polarization_transfer(const VerifyOptions& opt) {
  CheckReport r{.name = "polarization-transfer", .tolerance = 1e-12, .seed = opt.seed, .algebras = opt.battery};
  const std::vector<double> deltas = {0.1, 0.01, 0.001};
  double worst_ratio = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t cap = std::min<std::size_t>(3, alg->complex_dimension());
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const double delta = deltas[t % deltas.size()];
      const std::size_t d = 1 + t % cap;
      std::vector<Element> xs, ys;
      for (std::size_t i = 0; i < d; ++i) {
        xs.push_back(ginibre_element(alg, rng));
        ys.push_back(ginibre_element(alg, rng));
      }
      const Subspace e = subspace_span(xs);
      const Subspace f = subspace_span(ys);
      const auto dd = static_cast<Eigen::Index>(d);
      const Matrix u = haar_block(rng, static_cast<int>(d));
      const Matrix v = haar_block(rng, static_cast<int>(d));
      Eigen::VectorXcd s(dd);
      for (Eigen::Index i = 0; i < dd; ++i) {
        // singular values in [1/(1+delta), 1+delta], extremes included
        const double pick = unit(rng);
        const double lo = 1.0 / (1.0 + delta);
        s(i) = i == 0 ? 1.0 + delta : i == 1 ? lo : lo + (1.0 + delta - lo) * pick;
      }
      const SubspaceMap map{e, f, u * s.asDiagonal() * v.adjoint()};
      const double bound = 8.0 * delta + 4.0 * delta * delta;
      for (int pair = 0; pair < 8; ++pair) {
        Eigen::VectorXcd cx(dd), cy(dd);
        if (pair == 0) {
          // top right-singular vector against itself: |<Tx,Tx> - <x,x>| = (1+delta)^2 - 1
          cx = v.col(0);
          cy = v.col(0);
        } else {
          for (Eigen::Index i = 0; i < dd; ++i) {
            cx(i) = cplx(unit(rng) - 0.5, unit(rng) - 0.5);
            cy(i) = cplx(unit(rng) - 0.5, unit(rng) - 0.5);
          }
          cx /= std::max(1.0, cx.norm() / unit(rng));
          cy /= std::max(1.0, cy.norm() / unit(rng));
        }
        const Element x = e.element(cx);
        const Element y = e.element(cy);
        const double change = std::abs(trace_inner(map.apply(x), map.apply(y)) - trace_inner(x, y));
        detail::observe(r, change - bound);
        worst_ratio = std::max(worst_ratio, change / bound);
      }
      ++r.trials;
    }
  }
  r.details["worst_change_over_bound"] = worst_ratio;
  detail::finish(r);
  return r;
}

/// A unitary u in E and u' = nearest_unitary(u + (eps/4) h), h Haar: u' is
/// within eps of u and linearly independent from E.
inline CheckReport check_linear_independence_perturb(const VerifyOptions& opt) {
  CheckReport r{.name = "linear-independence-perturb", .tolerance = 0, .seed = opt.seed, .algebras = opt.battery};
  constexpr double kIndependence = 1e-8;
  double smallest_residual = std::numeric_limits<double>::infinity();
  std::size_t successes = 0;
  for (std::size_t a = 0; a < opt.battery.size(); ++a) {
    auto alg = make_algebra(opt.battery[a]);
    Rng rng = make_rng(opt.seed, detail::name_stream(r.name) + a);
    if (alg->complex_dimension() < 2) continue;
    const std::size_t cap = std::min<std::size_t>(3, alg->complex_dimension() - 1);
    for (std::size_t t = 0; t < opt.trials; ++t) {
      const double eps = detail::lemma_epsilons()[t % detail::lemma_epsilons().size()];
      const std::size_t d = 1 + t % cap;
      std::vector<Element> span;
      for (std::size_t i = 0; i < d; ++i) span.push_back(haar_unitary(alg, rng).element);
      const Element& u = span[t % d];
      const Element h = haar_unitary(alg, rng).element;
      const Element up = nearest_unitary(u + h * (eps / 4.0)).element;
      const double dist = distance(u, up);
      const double residual = detail::relative_residual(up, span);
      smallest_residual = std::min(smallest_residual, residual);
      const bool ok = dist < eps && residual > kIndependence && unitary_defect(up) <= 1e-10;
      successes += ok;
      detail::observe(r, std::max(dist - eps, kIndependence - residual));
      if (!ok) detail::observe(r, 1.0);
      ++r.trials;
    }
  }
  r.details["success_rate"] = r.trials ? static_cast<double>(successes) / static_cast<double>(r.trials) : 0.0;
  r.details["smallest_relative_residual"] = smallest_residual;
  detail::finish(r);
  return r;
}

inline const std::vector<std::pair<std::string, std::function<CheckReport(const VerifyOptions&)>>>& check_registry() {
  static const std::vector<std::pair<std::string, std::function<CheckReport(const VerifyOptions&)>>> reg = {
      {"unitary-lemma", check_unitary_lemma},
      {"claim2-bound", check_claim2_bound},
      {"avg2-exact", check_avg2_exact},
      {"z4-identity", check_z4_identity},
      {"kirchberg-step", check_kirchberg_step},
      {"jordan-transpose", check_jordan_transpose},
      {"op-duality", check_op_duality},
      {"net-proposition", check_net_proposition},
      {"polarization-transfer", check_polarization_transfer},
      {"linear-independence-perturb", check_linear_independence_perturb},
  };
  return reg;
}

inline std::vector<std::string> check_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : check_registry()) out.push_back(name);
  return out;
}

inline CheckReport run_check(const std::string& name, const VerifyOptions& opt) {
  for (const auto& [n, fn] : check_registry())
    if (n == name) return fn(opt);
  throw UnknownCheckError("unknown check '" + name + "'");
}

inline std::vector<CheckReport> run_all_checks(const VerifyOptions& opt) {
  std::vector<CheckReport> out;
  for (const auto& [name, fn] : check_registry()) out.push_back(fn(opt));
  return out;
}

}  // namespace eflab
