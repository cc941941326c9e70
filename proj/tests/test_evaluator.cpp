#include <gtest/gtest.h>

#include <cmath>

#include "eflab/evaluator.hpp"
#include "eflab/formula_gen.hpp"
#include "eflab/parser.hpp"
#include "support.hpp"

using namespace eflab;

namespace {

Assignment random_assignment(const FormulaPtr& f, const AlgebraRef& alg, Rng& rng) {
  Assignment a;
  for (const auto& v : free_variables(f)) {
    if (v.sort.is_unitary())
      a.emplace(v.name, haar_unitary(alg, rng).element);
    else
      a.emplace(v.name, random_contraction(alg, rng) * v.sort.radius());
  }
  return a;
}

const char* kProjection =
    "inf p:C1. max(max(n2(p*p - p), n2(p^* - p)), (reip(p, one) -. 0.3333333333333333) + "
    "(0.3333333333333333 -. reip(p, one)))";

// Lower bound for the projection sentence on M2. For a contraction p with
// eigenvalues x1 + i y1, x2 + i y2 (Schur form), the diagonal of p^2 - p
// gives ||p^2 - p||_2^2 >= sum_i |l_i|^2 |l_i - 1|^2 / 2 >= sum_i (x_i^2 - x_i)^2 / 2
// and re tr p = (x1 + x2) / 2, so the value is at least
// min over [-1,1]^2 of G(x1, x2) = max(sqrt(sum (x_i^2 - x_i)^2 / 2), |(x1 + x2)/2 - 1/3|).
// G is 3-Lipschitz, so a 1000 x 1000 grid minimum less 3 h / sqrt(2) bounds it.
double projection_lower_bound_m2() {
  const int k = 1000;
  const double h = 2.0 / (k - 1);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const double x1 = -1.0 + h * i;
    const double u1 = x1 * x1 - x1;
    for (int j = 0; j < k; ++j) {
      const double x2 = -1.0 + h * j;
      const double u2 = x2 * x2 - x2;
      const double g = std::max(std::sqrt((u1 * u1 + u2 * u2) / 2.0), std::abs((x1 + x2) / 2.0 - 1.0 / 3.0));
      best = std::min(best, g);
    }
  }
  return best - 3.0 * h / std::sqrt(2.0);
}

EvalConfig seeded(std::size_t restarts, std::uint64_t seed) {
  EvalConfig c;
  c.restarts = restarts;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(EvalQf, DistanceOfScalarUnitaries) {
  auto m2 = make_algebra("M2");
  auto f = parse("n2(u - v)");
  const double v = eval_qf(f, {{"u", Element::identity(m2)}, {"v", Element::scalar(m2, cplx(0, 1))}}, m2);
  EXPECT_NEAR(v, std::sqrt(2.0), 1e-15);
}

TEST(EvalQf, CommutatorVanishesOnAbelian) {
  auto a = make_algebra("C+C:1/3,2/3");
  auto f = parse("n2(x*y - y*x)");
  Rng rng = make_rng(21);
  for (int t = 0; t < 200; ++t) {
    auto asg = random_assignment(f, a, rng);
    EXPECT_EQ(eval_qf(f, asg, a), 0.0);
  }
}

TEST(EvalQf, OppositeFlagMatchesOpTransformExactly) {
  Rng rng = make_rng(22);
  FormulaGenerator gen(rng);
  std::vector<TermPtr> vars = {term::var("x1"), term::var("x2"), term::var("x3", Sort::unitary())};
  for (int t = 0; t < 1000; ++t) {
    auto alg = make_algebra(test_support::default_battery()[static_cast<std::size_t>(t) % 6]);
    auto f = gen.qf(vars, 3);
    Assignment asg;
    asg.emplace("x1", random_contraction(alg, rng));
    asg.emplace("x2", random_contraction(alg, rng) * 0.5);
    asg.emplace("x3", haar_unitary(alg, rng).element);
    const double in_op = eval_qf(f, asg, alg, true);
    EXPECT_EQ(eval_qf(op_transform(f), asg, alg, false), in_op) << to_string(f);
    // transpose is a trace-preserving *-isomorphism from A^op onto A
    Assignment transposed;
    for (const auto& [k, x] : asg) transposed.emplace(k, transpose(x));
    EXPECT_NEAR(eval_qf(f, transposed, alg, false), in_op, 1e-12 * (1.0 + std::abs(in_op))) << to_string(f);
  }
}

TEST(EvalQf, Errors) {
  auto m2 = make_algebra("M2");
  auto f = parse("n2(x - y)");
  EXPECT_THROW(eval_qf(f, {{"x", Element::identity(m2)}}, m2), EvalError);
  EXPECT_THROW(eval_qf(f, {{"x", Element::identity(m2)}, {"y", Element::identity(m2) * 1.5}}, m2), EvalError);
  auto g = parse_sentence("inf u:U. n2(u)");
  EXPECT_THROW(eval_qf(g, {}, m2), EvalError);
  auto h = parse("sup x:C1. inf u:U. n2(x - u + y)");
  Assignment bad_unitary{{"y", Element::diagonal(m2, {1.0, 0.5})}};
  EXPECT_NO_THROW(check_sort("y", bad_unitary.at("y"), Sort::ball(1)));
  EXPECT_THROW(check_sort("y", bad_unitary.at("y"), Sort::unitary()), EvalError);
  EXPECT_THROW(eval_sentence(h, m2, seeded(2, 1)), EvalError);
  EXPECT_THROW(eval_sentence(parse_sentence("sup x:C1. n2(x)"), m2, EvalConfig{}), EvalError);
}

TEST(EvalSentence, SupOfTwoNorm) {
  for (const auto& spec : test_support::default_battery()) {
    auto alg = make_algebra(spec);
    auto r = eval_sentence(parse_sentence("sup x:C1. n2(x)"), alg, seeded(8, 3));
    EXPECT_NEAR(r.value, 1.0, 1e-6) << spec;
    ASSERT_EQ(r.witnesses.size(), 1u);
    EXPECT_NEAR(two_norm(r.witnesses[0].second), 1.0, 1e-6);
    EXPECT_GE(r.uncertainty, 0.0);
  }
}

TEST(EvalSentence, ProjectionOfTraceOneThird) {
  auto s = parse_sentence(kProjection);
  auto cc = make_algebra("C+C:1/3,2/3");
  auto r = eval_sentence(s, cc, seeded(64, 4));
  EXPECT_LE(r.value, 2e-3);
  const Element p = Element::diagonal(cc, {1.0, 0.0});
  EXPECT_LE(eval_qf(matrix_of(s), {{"p", p}}, cc), 1e-15);

  const double lower = projection_lower_bound_m2();
  EXPECT_GE(lower, 0.05);
  auto m2 = make_algebra("M2");
  auto r2 = eval_sentence(s, m2, seeded(64, 4));
  EXPECT_GE(r2.value, 0.05);
  EXPECT_GE(r2.value, lower);
}

TEST(EvalSentence, OppositeAgreesThroughTranspose) {
  auto m2 = make_algebra("M2");
  for (const char* text : {"sup x:C1. sup y:C1. imip(x*y*y, y*x)", "inf u:U. inf v:U. n2(u*v + v*u)",
                           "sup x:C1. inf u:U. n2(x*u - u^*)"}) {
    auto s = parse_sentence(text);
    auto plain = eval_sentence(s, m2, seeded(32, 5));
    EvalConfig cfg = seeded(32, 5);
    cfg.opposite = true;
    auto op = eval_sentence(s, m2, cfg);
    EXPECT_LE(std::abs(plain.value - op.value), 2.0 * std::max(plain.uncertainty, op.uncertainty)) << text;
    // transposed witnesses realize the same matrix value in the opposite algebra
    Assignment w;
    Assignment wt;
    for (const auto& [k, x] : plain.witnesses) {
      w.emplace(k, x);
      wt.emplace(k, transpose(x));
    }
    EXPECT_NEAR(eval_qf(matrix_of(s), wt, m2, true), eval_qf(matrix_of(s), w, m2, false), 1e-12) << text;
  }
}

TEST(EvalSentence, WitnessesReproduceValue) {
  auto a = make_algebra("M2+M3:0.4,0.6");
  auto s = parse_sentence("sup x:C1. inf y:C1. n2(x*y - y*x) + n2(y - one)");
  auto r = eval_sentence(s, a, seeded(6, 6));
  Assignment w(r.witnesses.begin(), r.witnesses.end());
  EXPECT_LE(std::abs(eval_qf(matrix_of(s), w, a) - r.value), r.uncertainty);
  EXPECT_EQ(r.sentence_hash, sentence_hash(s));
  EXPECT_EQ(r.algebra, a->label);
}

TEST(EvalSentence, DoublingRestartsNeverRaisesInf) {
  auto a = make_algebra("M3");
  for (const char* text : {"inf x:C1. n2(x*x - one) + n2(x + x^*)", "inf u:U. inf v:U. n2(u*v - v*u - one)"}) {
    auto s = parse_sentence(text);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t r : {2, 4, 8, 16}) {
      const double v = eval_sentence(s, a, seeded(r, 7)).value;
      EXPECT_LE(v, prev) << text << " restarts " << r;
      prev = v;
    }
  }
}

TEST(EvalSentence, BitStableForFixedSeed) {
  auto a = make_algebra("M2");
  auto s = parse_sentence("sup x:C1. inf y:U. n2(x - y)");
  auto r1 = eval_sentence(s, a, seeded(4, 8));
  auto r2 = eval_sentence(s, a, seeded(4, 8));
  EXPECT_EQ(r1.value, r2.value);
  EXPECT_EQ(r1.uncertainty, r2.uncertainty);
  ASSERT_EQ(r1.witnesses.size(), r2.witnesses.size());
  for (std::size_t i = 0; i < r1.witnesses.size(); ++i) EXPECT_TRUE(r1.witnesses[i].second == r2.witnesses[i].second);
}

TEST(EvalSentence, FreeVariablesFromFixedAssignment) {
  auto a = make_algebra("M2");
  auto s = parse("inf y:C1. n2(x - y)");
  Rng rng = make_rng(9);
  const Element x = random_contraction(a, rng);
  auto r = eval_sentence(s, a, seeded(4, 9), {{"x", x}});
  EXPECT_LE(r.value, 1e-6);
}

TEST(Claim1, AverageOfTwoUnitariesSubstitution) {
  // phi(x) against phi with x replaced by the term (w1 + w2)/2
  Rng rng = make_rng(23);
  FormulaGenerator gen(rng);
  const auto x = term::var("x");
  const auto y = term::var("y");
  const auto w1 = term::var("w1", Sort::unitary());
  const auto w2 = term::var("w2", Sort::unitary());
  const auto avg = term::scale(0.5, term::sum(w1, w2));
  for (int t = 0; t < 1000; ++t) {
    auto alg = make_algebra(test_support::default_battery()[static_cast<std::size_t>(t) % 6]);
    auto f = gen.qf({x, y}, 3);
    const Element xv = random_contraction(alg, rng);
    const Element yv = random_contraction(alg, rng);
    const UnitaryPair pair = avg_two_unitaries(xv);
    const Element rebuilt = (pair.first.element + pair.second.element) * 0.5;
    const double via_term = eval_qf(substitute(f, "x", avg),
                                    {{"w1", pair.first.element}, {"w2", pair.second.element}, {"y", yv}}, alg);
    EXPECT_EQ(via_term, eval_qf(f, {{"x", rebuilt}, {"y", yv}}, alg));
    EXPECT_NEAR(via_term, eval_qf(f, {{"x", xv}, {"y", yv}}, alg), 1e-9);
  }
}

TEST(UnitaryForcing, UnitTwoNormContractionIsUnitary) {
  for (const auto& spec : test_support::default_battery()) {
    auto alg = make_algebra(spec);
    Rng rng = make_rng(24);
    for (int t = 0; t < 500; ++t) {
      // 0 <= 1 - x^*x <= 1 gives ||x^*x - 1||_2^2 <= 1 - ||x||_2^2
      const Element x = random_contraction(alg, rng);
      const double d = two_norm(mul(x.adjoint(), x) - Element::identity(alg));
      const double n = two_norm(x);
      EXPECT_LE(d * d, 1.0 - n * n + 1e-12);
      const Element u = haar_unitary(alg, rng).element;
      EXPECT_NEAR(two_norm(u), 1.0, 1e-14);
      EXPECT_LE(two_norm(mul(u.adjoint(), u) - Element::identity(alg)), 1e-8);
    }
  }
}
