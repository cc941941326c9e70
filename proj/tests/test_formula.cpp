#include <gtest/gtest.h>

#include <cmath>

#include "eflab/evaluator.hpp"
#include "eflab/formula_gen.hpp"
#include "eflab/parser.hpp"
#include "support.hpp"

using namespace eflab;

namespace {

std::string parse_error(std::string_view text) {
  try {
    parse_sentence(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Parse, CommutatorSentence) {
  auto f = parse_sentence("sup x1:C1. inf x2:C1. n2(x1*x2 - x2*x1)");
  EXPECT_TRUE(is_prenex(f));
  EXPECT_TRUE(is_closed(f));
  const auto q = quantifier_prefix(f);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].kind, Formula::Kind::sup);
  EXPECT_EQ(q[1].kind, Formula::Kind::inf);
  EXPECT_EQ(q[1].sort, Sort::ball(1));
  auto x1 = term::var("x1");
  auto x2 = term::var("x2");
  auto want = fml::sup("x1", Sort::ball(1),
                       fml::inf("x2", Sort::ball(1), fml::norm2(term::diff(term::product(x1, x2), term::product(x2, x1)))));
  EXPECT_TRUE(equal(f, want));
}

TEST(Parse, DotminusConnective) {
  auto f = parse("n2(u) -. 1");
  ASSERT_EQ(f->kind, Formula::Kind::dotminus);
  EXPECT_EQ(f->subs[0]->kind, Formula::Kind::norm2);
  EXPECT_EQ(f->subs[1]->kind, Formula::Kind::constant);
  EXPECT_EQ(f->subs[1]->value, 1.0);
  ASSERT_EQ(free_variables(f).size(), 1u);
  EXPECT_EQ(free_variables(f)[0].name, "u");
}

TEST(Parse, TermInFormulaPosition) {
  EXPECT_EQ(parse_error("sup x1:C1. x1"), "formula expected, term found at position 11");
  EXPECT_EQ(parse_error("sup x1:C1. (x1)"), "formula expected, term found at position 11");
}

TEST(Parse, Errors) {
  EXPECT_EQ(parse_error("sup x:D1. n2(x)"), "unknown sort 'D1' at position 6");
  EXPECT_EQ(parse_error("sup x:C0. n2(x)"), "unknown sort 'C0' at position 6");
  EXPECT_EQ(parse_error("sup x:C1. n2(y)"), "unbound variable 'y' at position 13");
  EXPECT_NE(parse_error("n2(x"), "");
  EXPECT_NE(parse_error("n2(x))"), "");
  EXPECT_NE(parse_error("max(n2(x))"), "");
  EXPECT_THROW(parse("n2(x) n2(y)"), ParseError);
}

TEST(Parse, SortsAndAlternateProductSyntax) {
  auto f = parse_sentence("inf u:U. sup y:C3. reip(u.y, y^*) + imip(one, 2*u)");
  const auto q = quantifier_prefix(f);
  EXPECT_EQ(q[0].sort, Sort::unitary());
  EXPECT_EQ(q[1].sort, Sort::ball(3));
  EXPECT_EQ(to_string(f), "inf u:U. sup y:C3. reip(u*y, y^*) + imip(one, 2*u)");
}

TEST(Print, RoundTripOnGeneratedCorpus) {
  Rng rng = make_rng(11);
  FormulaGenerator gen(rng);
  for (int i = 0; i < 200; ++i) {
    auto f = gen.sentence(static_cast<std::size_t>(i % 4));
    const std::string text = to_string(f);
    auto g = parse_sentence(text);
    ASSERT_TRUE(equal(f, g)) << text << "\n" << to_string(g);
    EXPECT_EQ(to_string(g), text);
  }
}

TEST(Print, NormalizedTextIsFixedPoint) {
  for (const char* text : {"sup x1:C1. inf x2:C1. n2(x1*x2 - x2*x1)", "max(n2(x) -. 0.5, 0.5*abs(reip(x, one)))",
                           "inf x:C2. n2(x^*^* - cplx(0,1)*x)", "n2(-1*x + (y - z))"}) {
    auto f = parse(text);
    EXPECT_EQ(to_string(f), text);
  }
}

TEST(SentenceHash, StableAndDiscriminating) {
  auto a = parse_sentence("sup x:C1. n2(x)");
  auto b = parse_sentence("sup x:C1.   n2( x )");
  auto c = parse_sentence("inf x:C1. n2(x)");
  EXPECT_EQ(sentence_hash(a), sentence_hash(b));
  EXPECT_NE(sentence_hash(a), sentence_hash(c));
  EXPECT_EQ(sentence_hash(a).size(), 16u);
}

TEST(OpTransform, SwapsProducts) {
  auto f = parse("n2(x*y - y*x)");
  EXPECT_EQ(to_string(op_transform(f)), "n2(y*x - x*y)");
  auto g = parse("reip((x*y)*z, x^*) + n2(x*(y*z)^*)");
  EXPECT_EQ(to_string(op_transform(g)), "reip(z*(y*x), x^*) + n2((z*y)^**x)");
}

TEST(OpTransform, ProductFreeUnchanged) {
  auto f = parse_sentence("sup x:C1. inf y:U. max(n2(x - 2*y^*), reip(x, y) -. 1)");
  EXPECT_TRUE(equal(op_transform(f), f));
}

TEST(OpTransform, Involution) {
  Rng rng = make_rng(12);
  FormulaGenerator gen(rng);
  for (int i = 0; i < 200; ++i) {
    auto f = gen.sentence(static_cast<std::size_t>(i % 3));
    EXPECT_TRUE(equal(op_transform(op_transform(f)), f));
  }
}

TEST(UnitaryTransform, RewritesInfOnly) {
  auto s = parse_sentence("sup x1:C1. inf x2:C1. n2(x1*x2 - x2*x1)");
  auto su = unitary_transform(s, UnitaryMode::u);
  EXPECT_EQ(to_string(su),
            "sup x1:C1. inf u2:C1. inf v2:C1. max(n2(x1*0.5*(u2 + v2) - 0.5*(u2 + v2)*x1), "
            "max(1 -. n2(u2), 1 -. n2(v2)))");
  EXPECT_TRUE(is_closed(su));
  EXPECT_TRUE(is_prenex(su));
}

TEST(UnitaryTransform, ScalesBySortRadius) {
  auto s = parse_sentence("inf x:C3. n2(x)");
  auto su = unitary_transform(s, UnitaryMode::u);
  EXPECT_EQ(to_string(su), "inf u1:C1. inf v1:C1. max(n2(1.5*(u1 + v1)), max(1 -. n2(u1), 1 -. n2(v1)))");
}

TEST(UnitaryTransform, NoInfIsUnchanged) {
  auto s = parse_sentence("sup x:C1. sup y:U. n2(x*y)");
  EXPECT_TRUE(equal(unitary_transform(s, UnitaryMode::u), s));
  EXPECT_TRUE(equal(unitary_transform(s, UnitaryMode::uu), s));
}

TEST(UnitaryTransform, ModeUuAnnotatesUnitaryDomain) {
  auto s = parse_sentence("sup x1:C1. inf x2:C1. n2(x1*x2 - x2*x1)");
  auto su = unitary_transform(s, UnitaryMode::u);
  auto suu = unitary_transform(s, UnitaryMode::uu);
  const auto qu = quantifier_prefix(su);
  const auto quu = quantifier_prefix(suu);
  ASSERT_EQ(qu.size(), quu.size());
  for (std::size_t i = 0; i < qu.size(); ++i) {
    EXPECT_EQ(qu[i].var, quu[i].var);
    EXPECT_EQ(qu[i].kind, quu[i].kind);
  }
  EXPECT_EQ(quu[1].sort, Sort::unitary());
  EXPECT_EQ(quu[2].sort, Sort::unitary());
  EXPECT_EQ(quu[0].sort, Sort::ball(1));
  // identical shape below the prefix, up to the sorts carried by variables
  EXPECT_EQ(to_string(matrix_of(su)), to_string(matrix_of(suu)));
}

TEST(UnitaryTransform, FreshCountAndNameClash) {
  Rng rng = make_rng(13);
  FormulaGenerator gen(rng);
  for (int i = 0; i < 100; ++i) {
    auto s = gen.sentence(1 + static_cast<std::size_t>(i % 4));
    std::size_t infs = 0;
    for (const auto& q : quantifier_prefix(s)) infs += q.kind == Formula::Kind::inf && !q.sort.is_unitary();
    auto su = unitary_transform(s, UnitaryMode::u);
    EXPECT_EQ(quantifier_count(su), quantifier_count(s) + infs);
    EXPECT_TRUE(is_closed(su));
  }
  auto clash = parse_sentence("sup u1:C1. inf x:C1. n2(u1 - x)");
  EXPECT_EQ(to_string(unitary_transform(clash, UnitaryMode::u)),
            "sup u1:C1. inf u2:C1. inf v2:C1. max(n2(u1 - 0.5*(u2 + v2)), max(1 -. n2(u2), 1 -. n2(v2)))");
  auto clash2 = parse_sentence("inf x:C1. sup u1:C1. n2(u1 - x)");
  EXPECT_EQ(quantifier_prefix(unitary_transform(clash2, UnitaryMode::u))[0].var, "u1_");
}

TEST(UnitaryTransform, RejectsNonPrenex) {
  auto f = parse_sentence("max(sup x:C1. n2(x), inf y:C1. n2(y))");
  EXPECT_FALSE(is_prenex(f));
  EXPECT_THROW(unitary_transform(f, UnitaryMode::u), FormulaError);
  EXPECT_THROW(unitary_transform(parse("inf x:C1. n2(x - y)"), UnitaryMode::u), FormulaError);
}

TEST(StripQuantifiers, Levels) {
  auto s = parse_sentence("sup x1:C1. inf x2:C1. n2(x1 - x2)");
  EXPECT_TRUE(equal(strip_quantifiers(s, 2), s));
  EXPECT_TRUE(equal(strip_quantifiers(s, 0), matrix_of(s)));
  auto s1 = strip_quantifiers(s, 1);
  EXPECT_EQ(to_string(s1), "inf x2:C1. n2(x1 - x2)");
  ASSERT_EQ(free_variables(s1).size(), 1u);
  EXPECT_EQ(free_variables(s1)[0].name, "x1");
  EXPECT_THROW(strip_quantifiers(s, 3), FormulaError);
}

TEST(Connectives, LipschitzModuli) {
  // Perturb each argument of each connective and compare the output change
  // against the recorded modulus.
  Rng rng = make_rng(14);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  const std::vector<FormulaPtr> shapes = {
      fml::max(fml::constant(0), fml::constant(0)), fml::min(fml::constant(0), fml::constant(0)),
      fml::dotminus(fml::constant(0), fml::constant(0)), fml::plus(fml::constant(0), fml::constant(0)),
      fml::abs(fml::constant(0)), fml::scale(-2.5, fml::constant(0)), fml::scale(0.25, fml::constant(0))};
  auto alg = make_algebra("C");
  for (const auto& shape : shapes) {
    const double modulus = connective_modulus(*shape);
    double worst = 0;
    for (int t = 0; t < 2000; ++t) {
      Formula f = *shape;
      Formula g = *shape;
      const std::size_t arg = static_cast<std::size_t>(t) % f.subs.size();
      for (std::size_t i = 0; i < f.subs.size(); ++i) {
        const double v = unit(rng);
        f.subs[i] = fml::constant(v);
        g.subs[i] = fml::constant(i == arg ? v + unit(rng) : v);
      }
      const double df = std::abs(eval_qf(fml::make(f), {}, alg) - eval_qf(fml::make(g), {}, alg));
      const double dx = std::abs(g.subs[arg]->value - f.subs[arg]->value);
      if (dx > 0) worst = std::max(worst, df / dx);
    }
    EXPECT_LE(worst, modulus + 1e-12) << static_cast<int>(shape->kind);
    EXPECT_GE(worst, modulus * 0.99) << static_cast<int>(shape->kind);
  }
}
