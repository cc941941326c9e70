#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eflab/games.hpp"
#include "eflab/parser.hpp"

using namespace eflab;

namespace {

GameConfig unitary_config(std::string m, std::string n, int rounds, double eps, std::string p1, std::string p2,
                          std::uint64_t seed = 1) {
  GameConfig c;
  c.kind = GameKind::unitary_gram;
  c.m_spec = std::move(m);
  c.n_spec = std::move(n);
  c.rounds = rounds;
  c.epsilon = eps;
  c.player1 = std::move(p1);
  c.player2 = std::move(p2);
  c.seed = seed;
  return c;
}

// min over (a, b) in the torus of max(|e^{i(b-a)} - 0|, 0), i.e. the best
// Gram deviation any pair of unitaries of C achieves against 1, diag(1,-1)
double torus_min_deviation(double step) {
  double best = std::numeric_limits<double>::infinity();
  const double two_pi = 2.0 * std::numbers::pi;
  for (double a = 0; a < two_pi; a += step)
    for (double b = 0; b < two_pi; b += step) {
      const cplx u1 = std::polar(1.0, a);
      const cplx u2 = std::polar(1.0, b);
      // Gram of (u1, u2) in C against the 2x2 identity
      const double dev = std::max({std::abs(u1 * std::conj(u1) - 1.0), std::abs(u2 * std::conj(u1)),
                                   std::abs(u2 * std::conj(u2) - 1.0)});
      best = std::min(best, dev);
    }
  return best;
}

void expect_bridge(const Transcript& t) {
  const GramBridge b = gram_bridge(t);
  if (std::isfinite(b.bound)) EXPECT_TRUE(b.holds) << "observed " << b.observed << " bound " << b.bound;
}

}  // namespace

TEST(UnitaryGame, CopyOnM4HasZeroMargin) {
  auto t = play_unitary_game(unitary_config("M4", "M4", 6, 1e-9, "haar", "copy"));
  ASSERT_EQ(t.moves.size(), 12u);
  EXPECT_EQ(t.winner, Player::two);
  ASSERT_EQ(t.margins.size(), 1u);
  EXPECT_EQ(t.margins[0], 0.0);
  EXPECT_FALSE(t.forfeit);
  expect_bridge(t);
}

TEST(UnitaryGame, AbelianAgainstM2Adversary) {
  auto t = play_unitary_game(unitary_config("C", "M2", 2, 0.5, "scripted:N:1;N:diag(1,-1)", "gram-match"));
  EXPECT_EQ(t.winner, Player::one);
  ASSERT_EQ(t.margins.size(), 1u);
  EXPECT_NEAR(t.margins[0], 1.0, 1e-12);
  const double brute = torus_min_deviation(1e-3);
  EXPECT_NEAR(brute, 1.0, 1e-3);
  EXPECT_GE(t.margins[0], brute - 1e-12);
  // the second reply is some torus point; its recorded deviation is 1
  ASSERT_TRUE(t.moves[3].deviation.has_value());
  EXPECT_NEAR(*t.moves[3].deviation, 1.0, 1e-12);
}

TEST(UnitaryGame, GramMatchWinsSeededPlaysOnM2) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto t = play_unitary_game(unitary_config("M2", "M2", 4, 0.05, "haar", "gram-match", seed));
    wins += t.winner == Player::two;
    expect_bridge(t);
  }
  EXPECT_GE(wins, 95);
}

TEST(UnitaryGame, FirstReplyIsIdentity) {
  auto m2 = make_algebra("M2");
  GameConfig cfg = unitary_config("M2", "M2", 1, 0.1, "haar", "gram-match");
  GameState st{&cfg, m2, m2, {}};
  st.moves.push_back({1, Player::one, Side::M, Element::identity(m2), false, {}});
  Rng rng = make_rng(3);
  auto r = gram_match_respond(st, st.moves.back(), 64, 400, rng);
  EXPECT_EQ(r.deviation, 0.0);
  EXPECT_TRUE(r.unitary == Element::identity(m2));
}

TEST(UnitaryGame, GramMatchNearCopyOnEqualAlgebras) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto t = play_unitary_game(unitary_config("M2", "M2", 4, 1e-6, "haar:M", "gram-match", seed));
    for (const auto& mv : t.moves)
      if (mv.player == Player::two && mv.round <= 3) {
        ASSERT_TRUE(mv.deviation.has_value());
        EXPECT_LE(*mv.deviation, 1e-6) << "seed " << seed << " round " << mv.round;
      }
  }
}

TEST(UnitaryGame, NonUnitaryMoveForfeits) {
  auto t = play_unitary_game(unitary_config("M2", "M2", 2, 0.1, "scripted:M:diag(1,0.5);M:1", "copy"));
  ASSERT_TRUE(t.forfeit.has_value());
  EXPECT_EQ(t.forfeit->player, Player::one);
  EXPECT_EQ(t.forfeit->round, 1);
  EXPECT_EQ(t.winner, Player::two);
}

TEST(UnitaryGame, GreedyAdversaryBeatsAbelianSide) {
  auto t = play_unitary_game(unitary_config("C+C:1/2,1/2", "M2", 3, 0.05, "greedy-adversarial:4", "gram-match:8x100"));
  EXPECT_EQ(t.moves.size(), 6u);
  // three independent unitaries of M2 have a rank-3 Gram matrix, which no
  // triple in the 2-dimensional C+C can reproduce
  EXPECT_EQ(t.winner, Player::one);
  expect_bridge(t);
}

TEST(UnitaryGame, CopyNeedsEqualAlgebras) {
  EXPECT_THROW(play_unitary_game(unitary_config("M2", "M3", 1, 0.1, "haar", "copy")), GameError);
  EXPECT_THROW(play_unitary_game(unitary_config("M2", "M2", 0, 0.1, "haar", "copy")), GameError);
  EXPECT_THROW(play_unitary_game(unitary_config("M2", "M2", 1, 0.0, "haar", "copy")), GameError);
  EXPECT_THROW(play_unitary_game(unitary_config("M2", "M2", 1, 0.1, "nobody", "copy")), GameError);
  EXPECT_THROW(play_unitary_game(unitary_config("M2", "M2", 1, 0.1, "haar", "gram-match:8")), GameError);
}

TEST(Referee, ReadjudicationReproducesVerdict) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto t = play_unitary_game(unitary_config("M2", "M2", 3, 0.05, "haar", "gram-match:16x200", seed));
    auto again = readjudicate(t);
    EXPECT_EQ(again.winner, t.winner);
    ASSERT_EQ(again.margins.size(), t.margins.size());
    for (std::size_t i = 0; i < t.margins.size(); ++i) EXPECT_EQ(again.margins[i], t.margins[i]);
    // a tighter epsilon than the margin flips the verdict
    if (t.margins[0] > 0) EXPECT_EQ(readjudicate(t, t.margins[0] / 2).winner, Player::one);
    EXPECT_EQ(readjudicate(t, t.margins[0]).winner, Player::two);
  }
}

TEST(Referee, TamperedMoveIsCaught) {
  auto t = play_unitary_game(unitary_config("M2", "M2", 2, 0.05, "haar", "copy"));
  t.moves[1].element = *t.moves[1].element * 1.1;
  auto again = readjudicate(t);
  ASSERT_TRUE(again.forfeit.has_value());
  EXPECT_EQ(again.forfeit->player, Player::two);
  EXPECT_EQ(again.winner, Player::one);
  auto short_play = play_unitary_game(unitary_config("M2", "M2", 2, 0.05, "haar", "copy"));
  short_play.moves.pop_back();
  EXPECT_EQ(readjudicate(short_play).forfeit->reason, "transcript ends early");
  EXPECT_EQ(readjudicate(short_play).winner, Player::one);
}

TEST(AtomicGame, CopyHasZeroMargins) {
  GameConfig c;
  c.m_spec = c.n_spec = "M2";
  c.rounds = 2;
  c.epsilon = 1e-12;
  c.formulas = {"n2(x1*x2 - x2*x1)", "reip(x1, x2^*)", "imip(x1*x1, x2)"};
  c.player1 = "haar";
  c.player2 = "copy";
  auto t = play_atomic_game(c);
  EXPECT_EQ(t.winner, Player::two);
  for (double m : t.margins) EXPECT_EQ(m, 0.0);
}

TEST(AtomicGame, CommutatorSeparatesAbelianFromM2) {
  GameConfig c;
  c.m_spec = "C+C:1/2,1/2";
  c.n_spec = "M2";
  c.rounds = 2;
  c.epsilon = 0.3;
  c.formulas = {"n2(x1*x2 - x2*x1)"};
  c.player1 = "scripted:N:E12 + E21;N:diag(1,-1)";
  c.player2 = "random";
  auto t = play_atomic_game(c);
  EXPECT_EQ(t.winner, Player::one);
  // x1 x2 - x2 x1 = [[0,-2],[2,0]], whose normalized 2-norm is 2
  ASSERT_EQ(t.margins.size(), 1u);
  EXPECT_NEAR(t.margins[0], 2.0, 1e-12);
  c.epsilon = 10;
  EXPECT_EQ(play_atomic_game(c).winner, Player::two);
}

TEST(AtomicGame, FormulaVariablesMustBeMoves) {
  GameConfig c;
  c.rounds = 1;
  c.formulas = {"n2(x1 - x2)"};
  EXPECT_THROW(play_atomic_game(c), GameError);
  c.formulas = {};
  EXPECT_THROW(play_atomic_game(c), GameError);
}

TEST(AtomicGame, BallViolationForfeits) {
  GameConfig c;
  c.rounds = 1;
  c.formulas = {"n2(x1)"};
  c.player1 = "scripted:M:2";
  auto t = play_atomic_game(c);
  ASSERT_TRUE(t.forfeit);
  EXPECT_EQ(t.forfeit->player, Player::one);
}

TEST(BanachGame, CopyHasZeroDefect) {
  GameConfig c;
  c.m_spec = c.n_spec = "M2";
  c.rounds = 3;
  c.epsilon = 1e-9;
  c.player1 = "haar";
  c.player2 = "copy";
  auto t = play_banach_game(c);
  EXPECT_EQ(t.winner, Player::two);
  ASSERT_EQ(t.margins.size(), 4u);
  for (double m : t.margins) EXPECT_LE(m, 1e-9);
  ASSERT_TRUE(t.isometry.has_value());
}

TEST(BanachGame, DimensionForfeitIntoC) {
  GameConfig c;
  c.m_spec = "C";
  c.n_spec = "M2";
  c.rounds = 2;
  c.epsilon = 0.5;
  c.player1 = "scripted:N:E11;N:E12";
  c.player2 = "random";
  auto t = play_banach_game(c);
  ASSERT_TRUE(t.forfeit.has_value());
  EXPECT_EQ(t.forfeit->player, Player::two);
  EXPECT_EQ(t.forfeit->round, 2);
  EXPECT_EQ(t.winner, Player::one);
}

TEST(BanachGame, PerturbedCopyMarginsAtDeltaScale) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GameConfig c;
    c.m_spec = c.n_spec = "M2";
    c.rounds = 3;
    c.epsilon = 0.1;
    c.player1 = "haar";
    c.player2 = "perturbed-copy:1e-3";
    c.seed = seed;
    auto t = play_banach_game(c);
    EXPECT_EQ(t.winner, Player::two);
    for (double m : t.margins) EXPECT_LE(m, 0.05) << "seed " << seed;
    // norm defects are controlled by delta over the smallest singular
    // direction of the played tuple
    std::vector<Element> xs;
    for (const auto& mv : t.moves)
      if (mv.side == Side::M) xs.push_back(*mv.element);
    const double lam = smallest_eigenvalue(gram_matrix(xs));
    const double oracle = 1e-3 * std::sqrt(3.0 / lam);
    EXPECT_LE(t.margins[0], oracle / (1 - oracle) + 1e-12);
    EXPECT_LE(t.margins[1], oracle / (1 - oracle) + 1e-12);
  }
}

TEST(BanachGame, StallGetsForcedReply) {
  GameConfig c;
  c.m_spec = c.n_spec = "M2";
  c.rounds = 3;
  c.epsilon = 1e-9;
  c.player1 = "scripted:M:diag(1,0);M:stall;M:diag(0.5,0)";
  c.player2 = "copy";
  auto t = play_banach_game(c);
  ASSERT_EQ(t.moves.size(), 6u);
  EXPECT_TRUE(t.moves[3].forced);
  EXPECT_FALSE(t.moves[2].element.has_value());
  EXPECT_TRUE(t.moves[5].forced);
  EXPECT_LE(distance(*t.moves[5].element, Element::diagonal(make_algebra("M2"), {0.5, 0})), 1e-15);
  EXPECT_EQ(t.winner, Player::two);
  EXPECT_FALSE(t.forfeit);
  // a forced reply cannot be swapped for a free one
  auto bad = t;
  bad.moves[5].forced = false;
  EXPECT_EQ(readjudicate(bad).winner, Player::one);
}

TEST(Representability, IdenticalAlgebraWins) {
  auto m2 = make_algebra("M2");
  Rng rng = make_rng(31);
  std::vector<Element> us;
  for (int i = 0; i < 3; ++i) us.push_back(haar_unitary(m2, rng).element);
  GameConfig c;
  c.m_spec = c.n_spec = "M2";
  c.epsilon = 1e-9;
  auto t = play_representability_game(c, us);
  EXPECT_EQ(t.winner, Player::two);
  for (double m : t.margins) EXPECT_LE(std::abs(m), 1e-9);
}

TEST(Representability, DiagonalIntoM2MatchesExactly) {
  auto cc = make_algebra("C+C:1/2,1/2");
  std::vector<Element> us = {Element::diagonal(cc, {1, 1}), Element::diagonal(cc, {1, -1})};
  GameConfig c;
  c.m_spec = "C+C:1/2,1/2";
  c.n_spec = "M2";
  c.epsilon = 1e-12;
  auto t = play_representability_game(c, us);
  EXPECT_EQ(t.winner, Player::two);
  EXPECT_LE((t.gram_m - Eigen::MatrixXcd::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LE((t.gram_n - Eigen::MatrixXcd::Identity(2, 2)).norm(), 1e-15);
  const Element& v2 = *t.moves[3].element;
  EXPECT_LE(distance(v2, Element::diagonal(make_algebra("M2"), {1, -1})), 1e-15);
}

TEST(Representability, GramSolverWithoutEmbedding) {
  auto m2 = make_algebra("M2");
  Rng rng = make_rng(32);
  std::vector<Element> us;
  for (int i = 0; i < 3; ++i) us.push_back(haar_unitary(m2, rng).element);
  GameConfig c;
  c.m_spec = "M2";
  c.n_spec = "M3";
  c.epsilon = 0.05;
  RepresentabilityOptions opt;
  opt.allow_embedding = false;
  auto t = play_representability_game(c, us, opt);
  EXPECT_FALSE(t.forfeit);
  ASSERT_EQ(t.margins.size(), 2u);
  // norms are recomputed independently from the played elements
  std::vector<Element> vs;
  for (const auto& mv : t.moves)
    if (mv.side == Side::N) vs.push_back(*mv.element);
  const MapExtremes ext = map_extremes(map_from_pairs(us, vs));
  EXPECT_NEAR(t.margins[0], ext.norm_T - 1.0, 1e-9);
  EXPECT_NEAR(t.margins[1], ext.norm_Tinv - 1.0, 1e-9);
}

TEST(Representability, DimensionCountLoses) {
  auto m3 = make_algebra("M3");
  Rng rng = make_rng(33);
  std::vector<Element> us;
  for (int i = 0; i < 5; ++i) us.push_back(haar_unitary(m3, rng).element);
  GameConfig c;
  c.m_spec = "M3";
  c.n_spec = "M2";
  auto t = play_representability_game(c, us);
  EXPECT_EQ(t.winner, Player::one);
  ASSERT_TRUE(t.forfeit);
  EXPECT_NE(t.forfeit->reason.find("dimension"), std::string::npos);
}

TEST(Representability, DependentInputsThrow) {
  auto m2 = make_algebra("M2");
  std::vector<Element> us = {Element::identity(m2), Element::scalar(m2, cplx(0, 1))};
  GameConfig c;
  c.m_spec = c.n_spec = "M2";
  EXPECT_THROW(play_representability_game(c, us), DependenceError);
}

TEST(Bridge, HoldsOnRandomTranscripts) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::string p2 = seed % 2 ? "random" : "gram-match:8x100";
    auto t = play_unitary_game(unitary_config("M3", seed % 3 ? "M3" : "M2+M3:0.4,0.6", 3, 0.1, "haar", p2, seed));
    if (t.forfeit) continue;
    expect_bridge(t);
  }
}

TEST(Bridge, VacuousWhenPerturbationDominates) {
  Transcript t;
  t.gram_m = Eigen::MatrixXcd::Identity(2, 2);
  t.gram_n = Eigen::MatrixXcd::Identity(2, 2);
  t.gram_n(0, 1) = t.gram_n(1, 0) = 0.6;
  const GramBridge b = gram_bridge(t);
  EXPECT_TRUE(std::isinf(b.bound));
  t.gram_n(0, 1) = t.gram_n(1, 0) = 0.1;
  const GramBridge c = gram_bridge(t);
  // generalized eigenvalues 1 +- 0.1 against the bound with n delta = 0.2
  EXPECT_NEAR(c.observed, 1.0 / std::sqrt(0.9) - 1.0, 1e-12);
  EXPECT_NEAR(c.bound, 1.0 / std::sqrt(0.8) - 1.0, 1e-12);
  EXPECT_TRUE(c.holds);
}
