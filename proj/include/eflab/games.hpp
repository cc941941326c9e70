#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eflab/algebra.hpp"
#include "eflab/banach_pair.hpp"
#include "eflab/evaluator.hpp"
#include "eflab/parser.hpp"
#include "eflab/random.hpp"

namespace eflab {

inline constexpr const char* kRefereeVersion = "eflab-referee/1";

class GameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GameKind { atomic, banach, unitary_gram, representability };
enum class Side { M, N };
enum class Player { one, two };

inline Side other(Side s) { return s == Side::M ? Side::N : Side::M; }
inline const char* to_string(Side s) { return s == Side::M ? "M" : "N"; }
inline const char* to_string(Player p) { return p == Player::one ? "player1" : "player2"; }

inline const char* to_string(GameKind k) {
  switch (k) {
    case GameKind::atomic: return "atomic";
    case GameKind::banach: return "banach";
    case GameKind::unitary_gram: return "unitary";
    case GameKind::representability: return "representability";
  }
  return "?";
}

inline GameKind parse_game_kind(std::string_view s) {
  if (s == "atomic") return GameKind::atomic;
  if (s == "banach") return GameKind::banach;
  if (s == "unitary" || s == "unitary-gram") return GameKind::unitary_gram;
  if (s == "representability") return GameKind::representability;
  throw GameError("unknown game kind '" + std::string(s) + "'");
}

inline Side parse_side(std::string_view s) {
  if (s == "M") return Side::M;
  if (s == "N") return Side::N;
  throw GameError("unknown side '" + std::string(s) + "'");
}

inline Player parse_player(std::string_view s) {
  if (s == "player1") return Player::one;
  if (s == "player2") return Player::two;
  throw GameError("unknown player '" + std::string(s) + "'");
}

struct GameConfig {
  GameKind kind = GameKind::unitary_gram;
  int rounds = 1;
  double epsilon = 0.1;
  std::string m_spec = "M2";
  std::string n_spec = "M2";
  std::vector<std::string> formulas;  // atomic kind, free variables x1..xn
  std::uint64_t seed = 0;
  std::string player1 = "haar";
  std::string player2 = "copy";
  IsometryVariant variant = IsometryVariant::definition;  // banach kind
  double resolution = 0.05;                              // banach kind
};

struct Move {
  int round = 0;
  Player player = Player::one;
  Side side = Side::M;
  std::optional<Element> element;  // empty: a stalling banach move
  bool forced = false;             // engine-supplied reply to a stall
  std::optional<double> deviation; // best-found Gram deviation of a gram-match reply
};

struct Forfeit {
  Player player = Player::one;
  int round = 0;
  std::string reason;
};

struct Transcript {
  GameConfig config;
  std::vector<Move> moves;
  std::vector<double> margins;
  Player winner = Player::two;
  std::optional<Forfeit> forfeit;
  Eigen::MatrixXcd gram_m;  // unitary and representability kinds
  Eigen::MatrixXcd gram_n;
  std::optional<IsometryReport> isometry;  // banach kind
  std::string referee_version = kRefereeVersion;
};

inline constexpr double kUnitaryMoveTol = 1e-8;
inline constexpr double kBallMoveTol = 1e-9;
inline constexpr double kStallTol = 1e-10;

/// Gram matrix G(i, j) = <x_i, x_j>.
inline Eigen::MatrixXcd gram_of(std::span<const Element> xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXcd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      g(i, j) = trace_inner(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
  return g;
}

// --- game state ---------------------------------------------------------------------

struct GameState {
  const GameConfig* config = nullptr;
  AlgebraRef m;
  AlgebraRef n;
  std::vector<Move> moves;

  const AlgebraRef& algebra(Side s) const { return s == Side::M ? m : n; }

  /// Elements played on side s in completed rounds, in round order (stalls
  /// and their forced replies included).
  std::vector<Element> side_elements(Side s) const {
    std::vector<Element> out;
    for (const auto& mv : moves)
      if (mv.side == s && mv.element) out.push_back(*mv.element);
    return out;
  }
};

namespace detail {

/// Component of x orthogonal to span(basis) relative to ||x||_2, or 0 for x = 0.
inline double relative_residual(const Element& x, std::span<const Element> basis) {
  const double nx = two_norm(x);
  if (nx == 0.0) return 0.0;
  if (basis.empty()) return 1.0;
  Subspace s = subspace_span(basis, 1e-12);
  return two_norm(x - s.project(x)) / nx;
}

/// Independent subfamily (greedy, in order) of a list of elements.
inline std::vector<std::size_t> independent_indices(std::span<const Element> xs) {
  std::vector<std::size_t> idx;
  std::vector<Element> kept;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (relative_residual(xs[i], kept) > kStallTol) {
      idx.push_back(i);
      kept.push_back(xs[i]);
    }
  }
  return idx;
}

inline std::optional<std::string> sort_violation(GameKind kind, const Element& x) {
  if (kind == GameKind::atomic) {
    const double on = op_norm(x);
    if (on > 1.0 + kBallMoveTol) return "element outside the unit ball (operator norm " + format_real(on) + ")";
  } else if (kind == GameKind::unitary_gram || kind == GameKind::representability) {
    const double d = unitary_defect(x);
    if (d > kUnitaryMoveTol) return "element is not unitary (defect " + format_real(d) + ")";
  }
  return std::nullopt;
}

}  // namespace detail

/// True when a banach-game move by Player I adds no dimension on its side.
inline bool is_stall(const GameState& st, const Move& mv) {
  if (!mv.element) return true;
  std::vector<Element> prev;
  for (const auto& m : st.moves)
    if (&m != &mv && m.side == mv.side && m.element && m.round < mv.round) prev.push_back(*m.element);
  return detail::relative_residual(*mv.element, prev) <= kStallTol;
}

// --- strategies ---------------------------------------------------------------------

class PlayerOneStrategy {
 public:
  virtual ~PlayerOneStrategy() = default;
  virtual Move next(const GameState& st, int round, Rng& rng) = 0;
};

class PlayerTwoStrategy {
 public:
  virtual ~PlayerTwoStrategy() = default;
  /// Reply to `incoming` (already appended to st.moves) on the other side.
  virtual Move respond(const GameState& st, const Move& incoming, Rng& rng) = 0;
};

namespace detail {

inline Element random_move(GameKind kind, const AlgebraRef& alg, Rng& rng) {
  if (kind == GameKind::unitary_gram || kind == GameKind::representability) return haar_unitary(alg, rng).element;
  return random_contraction_with_two_norm(alg, 0.5, rng);
}

inline Element transplant(const Element& x, const AlgebraRef& target) {
  if (!x.algebra().same_structure(*target))
    throw GameError("copy needs equal algebras, got " + x.algebra().label + " and " + target->label);
  return Element(target, x.blocks());
}

/// Pairs (played on side s, answered on the other side) of the completed rounds.
inline void paired_history(const GameState& st, Side s, std::vector<Element>& mine, std::vector<Element>& theirs) {
  mine = st.side_elements(s);
  theirs = st.side_elements(other(s));
}

}  // namespace detail

/// Haar-random Player I (random contractions of 2-norm at least 1/2 outside the
/// unitary games);
/// the side is fixed or drawn per round.
class HaarPlayer : public PlayerOneStrategy {
 public:
  explicit HaarPlayer(std::optional<Side> side) : side_(side) {}
  Move next(const GameState& st, int round, Rng& rng) override {
    Side s = side_ ? *side_ : (std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? Side::M : Side::N);
    return {round, Player::one, s, detail::random_move(st.config->kind, st.algebra(s), rng), false, {}};
  }

 private:
  std::optional<Side> side_;
};

/// Fixed list of moves "side:element" separated by ';'; "side:stall" stalls.
class ScriptedPlayer : public PlayerOneStrategy {
 public:
  explicit ScriptedPlayer(std::string script) : script_(std::move(script)) {
    std::size_t start = 0;
    while (start <= script_.size()) {
      const std::size_t end = std::min(script_.find(';', start), script_.size());
      std::string item = script_.substr(start, end - start);
      if (!item.empty()) {
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos) throw GameError("scripted move '" + item + "' lacks a side");
        items_.push_back({parse_side(item.substr(0, colon)), item.substr(colon + 1)});
      }
      start = end + 1;
    }
  }

  Move next(const GameState& st, int round, Rng&) override {
    if (static_cast<std::size_t>(round) > items_.size())
      throw GameError("script has " + std::to_string(items_.size()) + " moves, round " + std::to_string(round) +
                      " requested");
    const auto& [side, text] = items_[static_cast<std::size_t>(round - 1)];
    Move mv{round, Player::one, side, std::nullopt, false, {}};
    if (text != "stall") mv.element = parse_element(text, st.algebra(side));
    return mv;
  }

 private:
  std::string script_;
  std::vector<std::pair<Side, std::string>> items_;
};

class CopyPlayer : public PlayerTwoStrategy {
 public:
  Move respond(const GameState& st, const Move& in, Rng&) override {
    const Side s = other(in.side);
    return {in.round, Player::two, s, detail::transplant(*in.element, st.algebra(s)), false, {}};
  }
};

/// Copy plus a perturbation of 2-norm delta, pulled back into the move's
/// sort (unit ball or unitary group) when the incoming move lies in it.
class PerturbedCopyPlayer : public PlayerTwoStrategy {
 public:
  explicit PerturbedCopyPlayer(double delta) : delta_(delta) {}
  Move respond(const GameState& st, const Move& in, Rng& rng) override {
    const Side s = other(in.side);
    const AlgebraRef& alg = st.algebra(s);
    const Element base = detail::transplant(*in.element, alg);
    const Element g = ginibre_element(alg, rng);
    Element y = base + g * (delta_ / two_norm(g));
    const GameKind kind = st.config->kind;
    if (kind == GameKind::unitary_gram || kind == GameKind::representability)
      y = nearest_unitary(y).element;
    else if (op_norm(base) <= 1.0 + kBallMoveTol)
      y = clip_to_ball(y, 1.0);
    return {in.round, Player::two, s, std::move(y), false, {}};
  }

 private:
  double delta_;
};

/// Random legal reply (contractions of 2-norm at least 1/2 outside the
/// unitary games); the baseline Player II for differing algebras.
class RandomResponder : public PlayerTwoStrategy {
 public:
  Move respond(const GameState& st, const Move& in, Rng& rng) override {
    const Side s = other(in.side);
    const GameKind kind = st.config->kind;
    Element y = kind == GameKind::unitary_gram ? haar_unitary(st.algebra(s), rng).element
                                               : random_contraction_with_two_norm(st.algebra(s), 0.5, rng);
    return {in.round, Player::two, s, std::move(y), false, {}};
  }
};

// --- gram matching ------------------------------------------------------------------

struct GramTarget {
  std::vector<Element> partners;  // earlier elements on the reply side
  std::vector<cplx> values;       // wanted <v, partners[j]>
};

inline double gram_deviation(const Element& v, const GramTarget& t) {
  double d = 0;
  for (std::size_t j = 0; j < t.partners.size(); ++j) d = std::max(d, std::abs(trace_inner(v, t.partners[j]) - t.values[j]));
  return d;
}

struct GramMatchResult {
  Element unitary;
  double deviation;
};

namespace detail {

/// Real basis of the self-adjoint part of the algebra.
inline std::vector<Element> hermitian_basis(const AlgebraRef& alg) {
  std::vector<Element> out;
  for (std::size_t b = 0; b < alg->blocks.size(); ++b) {
    const int n = alg->blocks[b];
    for (int i = 1; i <= n; ++i) {
      out.push_back(Element::matrix_unit(alg, i, i, b));
      for (int j = i + 1; j <= n; ++j) {
        const Element e = Element::matrix_unit(alg, i, j, b);
        out.push_back(e + e.adjoint());
        out.push_back((e - e.adjoint()) * cplx(0, 1));
      }
    }
  }
  return out;
}

}  // namespace detail

/// Levenberg-Marquardt on the residuals <v, q_j> - c_j over the unitary
/// group, with tangent directions v (iH) and the polar retraction,
/// multi-started from 1 and Haar points. Stops once the maximal deviation is
/// below `stop`.
inline GramMatchResult gram_match_solve(const AlgebraRef& alg, const GramTarget& t, std::size_t restarts,
                                        std::size_t iterations, Rng& rng, double stop = 1e-13) {
  const Element one = Element::identity(alg);
  if (t.partners.empty()) return {one, 0.0};
  const std::size_t m = t.partners.size();
  const std::vector<Element> basis = detail::hermitian_basis(alg);
  const auto d = static_cast<Eigen::Index>(basis.size());
  auto residual = [&](const Element& v) {
    Eigen::VectorXd r(2 * m);
    for (std::size_t j = 0; j < m; ++j) {
      const cplx e = trace_inner(v, t.partners[j]) - t.values[j];
      r(static_cast<Eigen::Index>(2 * j)) = e.real();
      r(static_cast<Eigen::Index>(2 * j + 1)) = e.imag();
    }
    return r;
  };
  std::optional<GramMatchResult> best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Element v = r == 0 ? one : haar_unitary(alg, rng).element;
    Eigen::VectorXd res = residual(v);
    double f = res.squaredNorm();
    double mu = 1e-3;
    for (std::size_t it = 0; it < iterations && gram_deviation(v, t) > stop; ++it) {
      Eigen::MatrixXd jac(static_cast<Eigen::Index>(2 * m), d);
      std::vector<Element> dirs;
      dirs.reserve(basis.size());
      for (Eigen::Index k = 0; k < d; ++k) {
        dirs.push_back(mul(v, basis[static_cast<std::size_t>(k)]) * cplx(0, 1));
        for (std::size_t j = 0; j < m; ++j) {
          const cplx g = trace_inner(dirs.back(), t.partners[j]);
          jac(static_cast<Eigen::Index>(2 * j), k) = g.real();
          jac(static_cast<Eigen::Index>(2 * j + 1), k) = g.imag();
        }
      }
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtr = jac.transpose() * res;
      bool moved = false;
      while (mu < 1e12) {
        Eigen::MatrixXd a = jtj;
        a.diagonal().array() += mu;
        const Eigen::VectorXd step = a.ldlt().solve(-jtr);
        Element w = v;
        for (Eigen::Index k = 0; k < d; ++k) w += dirs[static_cast<std::size_t>(k)] * step(k);
        w = nearest_unitary(w).element;
        const Eigen::VectorXd rw = residual(w);
        if (rw.squaredNorm() < f) {
          v = std::move(w);
          res = rw;
          f = rw.squaredNorm();
          mu = std::max(mu * 0.3, 1e-12);
          moved = true;
          break;
        }
        mu *= 4.0;
      }
      if (!moved) break;
    }
    const double dev = gram_deviation(v, t);
    if (!best || dev < best->deviation) best = GramMatchResult{v, dev};
    if (best->deviation <= stop) break;
  }
  return *best;
}

inline GramTarget gram_target_for(const GameState& st, const Move& in) {
  std::vector<Element> mine, theirs;
  detail::paired_history(st, in.side, mine, theirs);
  // the incoming element is the last entry on its side
  mine.pop_back();
  GramTarget t;
  for (std::size_t j = 0; j < mine.size(); ++j) {
    t.partners.push_back(theirs[j]);
    t.values.push_back(trace_inner(*in.element, mine[j]));
  }
  return t;
}

/// Unitary on the side opposite `in` whose inner products with the earlier
/// replies best match those of `in` with the earlier moves on its side.
inline GramMatchResult gram_match_respond(const GameState& st, const Move& in, std::size_t restarts,
                                          std::size_t iterations, Rng& rng) {
  return gram_match_solve(st.algebra(other(in.side)), gram_target_for(st, in), restarts, iterations, rng);
}

class GramMatchPlayer : public PlayerTwoStrategy {
 public:
  GramMatchPlayer(std::size_t restarts, std::size_t iterations) : restarts_(restarts), iterations_(iterations) {}
  Move respond(const GameState& st, const Move& in, Rng& rng) override {
    auto res = gram_match_respond(st, in, restarts_, iterations_, rng);
    return {in.round, Player::two, other(in.side), std::move(res.unitary), false, res.deviation};
  }

 private:
  std::size_t restarts_;
  std::size_t iterations_;
};

/// Picks, among `candidates` Haar unitaries per side, the move on which a
/// budgeted gram-match reply does worst.
class GreedyAdversary : public PlayerOneStrategy {
 public:
  GreedyAdversary(std::size_t candidates, std::size_t restarts, std::size_t iterations)
      : candidates_(candidates), restarts_(restarts), iterations_(iterations) {}
  Move next(const GameState& st, int round, Rng& rng) override {
    if (st.config->kind != GameKind::unitary_gram) throw GameError("greedy-adversarial plays the unitary game only");
    std::optional<Move> best;
    double worst = -1;
    for (Side s : {Side::M, Side::N}) {
      for (std::size_t c = 0; c < candidates_; ++c) {
        Move mv{round, Player::one, s, haar_unitary(st.algebra(s), rng).element, false, {}};
        GameState probe = st;
        probe.moves.push_back(mv);
        Rng inner(rng());
        const double dev =
            gram_match_solve(st.algebra(other(s)), gram_target_for(probe, probe.moves.back()), restarts_, iterations_,
                             inner)
                .deviation;
        if (dev > worst) {
          worst = dev;
          best = mv;
        }
      }
    }
    return *best;
  }

 private:
  std::size_t candidates_;
  std::size_t restarts_;
  std::size_t iterations_;
};

namespace detail {

inline std::pair<std::string, std::string> split_id(const std::string& id) {
  const std::size_t colon = id.find(':');
  if (colon == std::string::npos) return {id, ""};
  return {id.substr(0, colon), id.substr(colon + 1)};
}

inline std::pair<std::size_t, std::size_t> parse_budget(const std::string& arg, std::size_t r, std::size_t i) {
  if (arg.empty()) return {r, i};
  const std::size_t x = arg.find('x');
  if (x == std::string::npos) throw GameError("budget '" + arg + "' is not of the form RxI");
  try {
    return {std::stoul(arg.substr(0, x)), std::stoul(arg.substr(x + 1))};
  } catch (const std::exception&) {
    throw GameError("budget '" + arg + "' is not of the form RxI");
  }
}

}  // namespace detail

/// Player I ids: haar[:M|:N], scripted:<side>:<element>;..., greedy-adversarial[:K].
inline std::unique_ptr<PlayerOneStrategy> make_player_one(const std::string& id) {
  auto [name, arg] = detail::split_id(id);
  if (name == "haar") return std::make_unique<HaarPlayer>(arg.empty() ? std::nullopt : std::optional(parse_side(arg)));
  if (name == "scripted") return std::make_unique<ScriptedPlayer>(arg);
  if (name == "greedy-adversarial") {
    std::size_t k = 4;
    if (!arg.empty()) k = std::stoul(arg);
    return std::make_unique<GreedyAdversary>(k, 8, 100);
  }
  throw GameError("unknown Player I strategy '" + id + "'");
}

/// Player II ids: copy, perturbed-copy:<delta>, gram-match[:RxI], random.
inline std::unique_ptr<PlayerTwoStrategy> make_player_two(const std::string& id) {
  auto [name, arg] = detail::split_id(id);
  if (name == "copy") return std::make_unique<CopyPlayer>();
  if (name == "perturbed-copy") {
    if (arg.empty()) throw GameError("perturbed-copy needs a delta, e.g. perturbed-copy:1e-3");
    return std::make_unique<PerturbedCopyPlayer>(std::stod(arg));
  }
  if (name == "gram-match") {
    auto [r, i] = detail::parse_budget(arg, 64, 400);
    return std::make_unique<GramMatchPlayer>(r, i);
  }
  if (name == "random") return std::make_unique<RandomResponder>();
  throw GameError("unknown Player II strategy '" + id + "'");
}

// --- referee ------------------------------------------------------------------------

namespace detail {

inline std::optional<Forfeit> move_legality(const GameState& st, const Move& mv) {
  const GameKind kind = st.config->kind;
  if (!mv.element) {
    if (kind == GameKind::banach && mv.player == Player::one) return std::nullopt;
    return Forfeit{mv.player, mv.round, "missing element"};
  }
  if (!mv.element->algebra().same_structure(*st.algebra(mv.side)))
    return Forfeit{mv.player, mv.round, "element does not belong to side " + std::string(to_string(mv.side))};
  if (auto why = sort_violation(kind, *mv.element)) return Forfeit{mv.player, mv.round, *why};
  return std::nullopt;
}

/// Banach kind: a reply to a dimension-raising move must raise the dimension
/// on its side too, otherwise no extending bijection exists.
inline std::optional<Forfeit> banach_extension(const GameState& st, const Move& reply) {
  std::vector<Element> prev;
  for (const auto& m : st.moves)
    if (m.round < reply.round && m.side == reply.side && m.element) prev.push_back(*m.element);
  if (relative_residual(*reply.element, prev) <= kStallTol)
    return Forfeit{Player::two, reply.round, "reply lies in the span of earlier replies: no linear bijection extends the map"};
  return std::nullopt;
}

inline Eigen::MatrixXcd gram_for_side(const std::vector<Move>& moves, Side s) {
  std::vector<Element> xs;
  for (const auto& m : moves)
    if (m.side == s && m.element) xs.push_back(*m.element);
  return gram_of(xs);
}

}  // namespace detail

/// Norms of the map u_i -> v_i read off the two Gram matrices: square roots
/// of the extreme generalized eigenvalues of (G_v, G_u).
struct GramMapNorms {
  double norm_T = 0;
  double norm_Tinv = 0;
  bool defined = false;
};

inline GramMapNorms gram_map_norms(const Eigen::MatrixXcd& gu, const Eigen::MatrixXcd& gv) {
  GramMapNorms out;
  if (gu.rows() == 0) {
    out.norm_T = out.norm_Tinv = 1.0;
    out.defined = true;
    return out;
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(gu);
  if (llt.info() != Eigen::Success || smallest_eigenvalue(gu) <= 1e-12) return out;
  const Eigen::MatrixXcd l_inv = llt.matrixL().solve(Eigen::MatrixXcd::Identity(gu.rows(), gu.cols()));
  Eigen::MatrixXcd m = l_inv * gv * l_inv.adjoint();
  m = (m + m.adjoint()).eval() * 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0) return out;
  out.norm_T = std::sqrt(hi);
  out.norm_Tinv = 1.0 / std::sqrt(lo);
  out.defined = true;
  return out;
}

/// Recomputes margins, forfeits and the verdict from the configuration and
/// the moves alone.
inline void adjudicate(Transcript& t) {
  const GameConfig& cfg = t.config;
  GameState st{&cfg, make_algebra(cfg.m_spec), make_algebra(cfg.n_spec), {}};
  t.margins.clear();
  t.forfeit.reset();
  t.isometry.reset();
  t.gram_m.resize(0, 0);
  t.gram_n.resize(0, 0);
  t.referee_version = kRefereeVersion;

  if (cfg.kind == GameKind::representability) {
    const std::size_t cap = st.n->complex_dimension();
    if (static_cast<std::size_t>(cfg.rounds) > cap) {
      t.forfeit = Forfeit{Player::two, 1,
                          "dimension: " + std::to_string(cfg.rounds) + " independent unitaries cannot map injectively into " +
                              st.n->label + " of dimension " + std::to_string(cap)};
      t.winner = Player::one;
      return;
    }
  }

  // legality, move by move
  for (const auto& mv : t.moves) {
    if (auto f = detail::move_legality(st, mv)) {
      t.forfeit = f;
      break;
    }
    if (cfg.kind == GameKind::banach && mv.player == Player::two && !st.moves.empty()) {
      const Move& lead = st.moves.back();
      const bool stalled = lead.player == Player::one && lead.round == mv.round && is_stall(st, lead);
      if (stalled != mv.forced) {
        t.forfeit = Forfeit{Player::two, mv.round,
                            stalled ? "a stall must be answered by the forced reply" : "forced reply without a stall"};
        break;
      }
    }
    if (cfg.kind == GameKind::banach && mv.player == Player::two && !mv.forced) {
      st.moves.push_back(mv);
      if (auto f = detail::banach_extension(st, mv)) {
        t.forfeit = f;
        break;
      }
      continue;
    }
    st.moves.push_back(mv);
  }
  if (!t.forfeit) {
    int expected = 2 * cfg.rounds;
    if (static_cast<int>(t.moves.size()) < expected)
      t.forfeit = Forfeit{t.moves.size() % 2 == 0 ? Player::one : Player::two, static_cast<int>(t.moves.size() / 2 + 1),
                          "transcript ends early"};
  }
  if (t.forfeit) {
    t.winner = t.forfeit->player == Player::one ? Player::two : Player::one;
    return;
  }

  const double eps = cfg.epsilon;
  switch (cfg.kind) {
    case GameKind::atomic: {
      Assignment am, an;
      int k = 0;
      for (std::size_t i = 0; i + 1 < t.moves.size(); i += 2) {
        ++k;
        const Move& a = t.moves[i];
        const Move& b = t.moves[i + 1];
        const Element& xm = a.side == Side::M ? *a.element : *b.element;
        const Element& xn = a.side == Side::M ? *b.element : *a.element;
        am.emplace("x" + std::to_string(k), xm);
        an.emplace("x" + std::to_string(k), xn);
      }
      for (const auto& text : cfg.formulas) {
        auto f = parse(text);
        if (!is_quantifier_free(f)) throw GameError("atomic game formula has quantifiers: " + text);
        t.margins.push_back(std::abs(eval_qf(f, am, st.m) - eval_qf(f, an, st.n)));
      }
      break;
    }
    case GameKind::unitary_gram:
    case GameKind::representability: {
      t.gram_m = detail::gram_for_side(t.moves, Side::M);
      t.gram_n = detail::gram_for_side(t.moves, Side::N);
      if (cfg.kind == GameKind::unitary_gram) {
        t.margins.push_back(t.gram_m.size() ? (t.gram_m - t.gram_n).cwiseAbs().maxCoeff() : 0.0);
      } else {
        const auto norms = gram_map_norms(t.gram_m, t.gram_n);
        if (!norms.defined) {
          t.forfeit = Forfeit{Player::two, cfg.rounds, "images are linearly dependent: no injective map"};
          t.winner = Player::one;
          return;
        }
        t.margins = {norms.norm_T - 1.0, norms.norm_Tinv - 1.0};
      }
      break;
    }
    case GameKind::banach: {
      std::vector<Element> xs, ys;
      for (std::size_t i = 0; i + 1 < t.moves.size(); i += 2) {
        const Move& a = t.moves[i];
        const Move& b = t.moves[i + 1];
        if (b.forced) continue;
        xs.push_back(a.side == Side::M ? *a.element : *b.element);
        ys.push_back(a.side == Side::M ? *b.element : *a.element);
      }
      if (xs.empty()) {
        t.margins = {0.0, 0.0, 0.0, 0.0};
        break;
      }
      const SubspaceMap map = map_from_pairs(xs, ys);
      IsometryCheckOptions opt;
      opt.seed = cfg.seed;
      const IsometryReport rep = check_almost_isometry(map, eps, cfg.resolution, cfg.variant, opt);
      t.isometry = rep;
      t.margins = {rep.norm_T - 1.0, rep.norm_Tinv - 1.0, rep.fwd_defect, rep.bwd_defect};
      break;
    }
  }
  const bool ok = std::all_of(t.margins.begin(), t.margins.end(), [&](double m) { return m <= eps; });
  t.winner = ok ? Player::two : Player::one;
}

/// Re-runs the referee, optionally at a different epsilon.
inline Transcript readjudicate(const Transcript& t, std::optional<double> epsilon = std::nullopt) {
  Transcript out = t;
  if (epsilon) out.config.epsilon = *epsilon;
  adjudicate(out);
  return out;
}

// --- engine -------------------------------------------------------------------------

namespace detail {

inline void validate(const GameConfig& cfg) {
  if (cfg.rounds < 1) throw GameError("rounds must be at least 1");
  if (!(cfg.epsilon > 0)) throw GameError("epsilon must be positive");
  if (cfg.kind == GameKind::atomic && cfg.formulas.empty()) throw GameError("atomic game needs formulas");
  if (cfg.kind == GameKind::banach && !(cfg.resolution > 0)) throw GameError("resolution must be positive");
}

}  // namespace detail

/// Plays an atomic, banach or unitary-gram game between the configured
/// strategies and signs the transcript with the referee's verdict.
inline Transcript play_game(const GameConfig& cfg) {
  detail::validate(cfg);
  if (cfg.kind == GameKind::representability) throw GameError("use play_representability_game");
  GameState st{&cfg, make_algebra(cfg.m_spec), make_algebra(cfg.n_spec), {}};
  for (const auto& text : cfg.formulas) {
    auto f = parse(text);
    for (const auto& v : free_variables(f)) {
      const bool ok = v.name.size() > 1 && v.name[0] == 'x' &&
                      std::all_of(v.name.begin() + 1, v.name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
                      std::stoi(v.name.substr(1)) >= 1 && std::stoi(v.name.substr(1)) <= cfg.rounds;
      if (!ok) throw GameError("formula variable '" + v.name + "' is not one of x1..x" + std::to_string(cfg.rounds));
    }
  }
  auto p1 = make_player_one(cfg.player1);
  auto p2 = make_player_two(cfg.player2);
  Rng r1 = make_rng(cfg.seed, 1);
  Rng r2 = make_rng(cfg.seed, 2);

  for (int round = 1; round <= cfg.rounds; ++round) {
    Move a = p1->next(st, round, r1);
    a.round = round;
    a.player = Player::one;
    st.moves.push_back(a);
    if (detail::move_legality(st, st.moves.back())) break;
    if (cfg.kind == GameKind::banach && is_stall(st, st.moves.back())) {
      // T_i = T_{i-1}: the reply is the image of the stalled vector
      const Side s = other(a.side);
      std::vector<Element> xs = st.side_elements(a.side);
      std::vector<Element> ys = st.side_elements(s);
      if (a.element) xs.pop_back();
      Move forced{round, Player::two, s, Element::zero(st.algebra(s)), true, {}};
      if (a.element && !xs.empty()) {
        const auto idx = detail::independent_indices(xs);
        std::vector<Element> bx, by;
        for (auto i : idx) {
          bx.push_back(xs[i]);
          by.push_back(ys[i]);
        }
        forced.element = map_from_pairs(bx, by).apply(*a.element);
      }
      st.moves.push_back(forced);
      continue;
    }
    Move b = p2->respond(st, st.moves.back(), r2);
    b.round = round;
    b.player = Player::two;
    st.moves.push_back(b);
    if (detail::move_legality(st, st.moves.back())) break;
    if (cfg.kind == GameKind::banach && detail::banach_extension(st, st.moves.back())) break;
  }
  Transcript t;
  t.config = cfg;
  t.moves = std::move(st.moves);
  adjudicate(t);
  return t;
}

inline Transcript play_atomic_game(GameConfig cfg) {
  cfg.kind = GameKind::atomic;
  return play_game(cfg);
}

inline Transcript play_banach_game(GameConfig cfg) {
  cfg.kind = GameKind::banach;
  return play_game(cfg);
}

inline Transcript play_unitary_game(GameConfig cfg) {
  cfg.kind = GameKind::unitary_gram;
  return play_game(cfg);
}

// --- representability -----------------------------------------------------------------

namespace detail {

/// Multiplicities K (target block j holds K[j][i] copies of source block i)
/// of a unital trace-preserving embedding of `src` into `dst`, if any.
inline std::optional<std::vector<std::vector<int>>> trace_embedding(const TracialAlgebra& src, const TracialAlgebra& dst) {
  const std::size_t ns = src.blocks.size();
  const std::size_t nd = dst.blocks.size();
  std::vector<std::vector<int>> k(nd, std::vector<int>(ns, 0));
  std::optional<std::vector<std::vector<int>>> found;
  // fill block j with multiplicities summing to its size
  std::function<void(std::size_t, std::size_t, int)> fill = [&](std::size_t j, std::size_t i, int room) {
    if (found) return;
    if (j == nd) {
      for (std::size_t a = 0; a < ns; ++a) {
        double t = 0;
        for (std::size_t b = 0; b < nd; ++b) t += dst.weights[b] * k[b][a] / dst.blocks[b];
        if (std::abs(t - src.weights[a] / src.blocks[a]) > 1e-12) return;
      }
      found = k;
      return;
    }
    if (i == ns) {
      if (room == 0) fill(j + 1, 0, j + 1 < nd ? dst.blocks[j + 1] : 0);
      return;
    }
    for (int c = 0; c * src.blocks[i] <= room; ++c) {
      k[j][i] = c;
      fill(j, i + 1, room - c * src.blocks[i]);
    }
    k[j][i] = 0;
  };
  fill(0, 0, dst.blocks[0]);
  return found;
}

inline Element embed(const Element& x, const AlgebraRef& dst, const std::vector<std::vector<int>>& k) {
  std::vector<Matrix> out;
  for (std::size_t j = 0; j < k.size(); ++j) {
    Matrix b = Matrix::Zero(dst->blocks[j], dst->blocks[j]);
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < k[j].size(); ++i) {
      const auto n = static_cast<Eigen::Index>(x.block(i).rows());
      for (int c = 0; c < k[j][i]; ++c, at += n) b.block(at, at, n, n) = x.block(i);
    }
    out.push_back(std::move(b));
  }
  return Element(dst, std::move(out));
}

}  // namespace detail

struct RepresentabilityOptions {
  std::size_t restarts = 32;
  std::size_t iterations = 400;
  bool allow_embedding = true;
};

/// Searches unitaries v_1..v_n of the target algebra (config N side) whose
/// Gram matrix matches that of the given unitaries: first a trace-preserving
/// embedding, else sequential Gram matching with a joint descent polish.
inline std::vector<Element> representability_solve(const std::vector<Element>& us, const AlgebraRef& target, Rng& rng,
                                                   const RepresentabilityOptions& opt = {}) {
  if (us.empty()) return {};
  if (opt.allow_embedding) {
    if (auto k = detail::trace_embedding(us[0].algebra(), *target)) {
      std::vector<Element> vs;
      for (const auto& u : us) vs.push_back(detail::embed(u, target, *k));
      return vs;
    }
  }
  std::vector<Element> vs{Element::identity(target)};
  for (std::size_t i = 1; i < us.size(); ++i) {
    GramTarget t;
    for (std::size_t j = 0; j < i; ++j) {
      t.partners.push_back(vs[j]);
      t.values.push_back(trace_inner(us[i], us[j]));
    }
    vs.push_back(gram_match_solve(target, t, opt.restarts, opt.iterations, rng).unitary);
  }
  return vs;
}

/// One-round representability game: Player I's moves are the given
/// unitaries of M, Player II's the solver's unitaries of N.
inline Transcript play_representability_game(GameConfig cfg, const std::vector<Element>& us,
                                             const RepresentabilityOptions& opt = {}) {
  cfg.kind = GameKind::representability;
  cfg.rounds = static_cast<int>(us.size());
  detail::validate(cfg);
  auto m = make_algebra(cfg.m_spec);
  auto n = make_algebra(cfg.n_spec);
  for (const auto& u : us) {
    if (!u.algebra().same_structure(*m)) throw GameError("input unitary does not belong to " + m->label);
    if (unitary_defect(u) > kUnitaryMoveTol) throw GameError("input element is not unitary");
  }
  const Eigen::MatrixXcd g = gram_of(us);
  if (smallest_eigenvalue(g) <= 1e-10) throw DependenceError(detail::independent_indices(us).size(), smallest_eigenvalue(g));

  Transcript t;
  t.config = cfg;
  for (std::size_t i = 0; i < us.size(); ++i) t.moves.push_back({static_cast<int>(i + 1), Player::one, Side::M, us[i], false, {}});
  if (us.size() <= n->complex_dimension()) {
    Rng rng = make_rng(cfg.seed, 2);
    const auto vs = representability_solve(us, n, rng, opt);
    std::vector<Move> interleaved;
    for (std::size_t i = 0; i < us.size(); ++i) {
      interleaved.push_back(t.moves[i]);
      interleaved.push_back({static_cast<int>(i + 1), Player::two, Side::N, vs[i], false, {}});
    }
    t.moves = std::move(interleaved);
  }
  adjudicate(t);
  return t;
}

// --- gram-to-isometry bridge ------------------------------------------------------------

struct GramBridge {
  double delta = 0;         // max Gram entry deviation
  std::size_t n = 0;        // tuple length
  double lambda_min = 0;    // smallest eigenvalue of the M-side Gram matrix
  double bound = 0;         // h(delta, n, lambda_min); infinite when vacuous
  double observed = 0;      // max(||T||, ||T^{-1}||) - 1
  bool holds = true;
};

/// With D = G_N - G_M, ||D||_op <= n delta, so the generalized eigenvalues of
/// (G_N, G_M) lie in [1 - n delta / lambda_min, 1 + n delta / lambda_min] and
/// max(||T||, ||T^{-1}||) <= 1 + h with
/// h = max(sqrt(1 + n delta / lambda_min), 1 / sqrt(1 - n delta / lambda_min)) - 1.
inline GramBridge gram_bridge(const Transcript& t) {
  GramBridge b;
  b.n = static_cast<std::size_t>(t.gram_m.rows());
  if (b.n == 0 || t.gram_n.rows() != t.gram_m.rows()) return b;
  b.delta = (t.gram_m - t.gram_n).cwiseAbs().maxCoeff();
  b.lambda_min = smallest_eigenvalue(t.gram_m);
  const double r = static_cast<double>(b.n) * b.delta / b.lambda_min;
  if (!(b.lambda_min > 1e-12) || r >= 1.0) {
    b.bound = std::numeric_limits<double>::infinity();
    b.observed = std::numeric_limits<double>::quiet_NaN();
    return b;
  }
  b.bound = std::max(std::sqrt(1.0 + r), 1.0 / std::sqrt(1.0 - r)) - 1.0;
  const auto norms = gram_map_norms(t.gram_m, t.gram_n);
  if (!norms.defined) {
    b.holds = false;
    return b;
  }
  b.observed = std::max(norms.norm_T, norms.norm_Tinv) - 1.0;
  // rounding in the eigen-solve is far below 1e-12
  b.holds = b.observed <= b.bound + 1e-12;
  return b;
}

}  // namespace eflab
