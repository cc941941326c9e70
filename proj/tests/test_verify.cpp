#include <gtest/gtest.h>

#include "eflab/verify.hpp"

using namespace eflab;

namespace {

VerifyOptions small(std::size_t trials, std::uint64_t seed = 5) {
  VerifyOptions o;
  o.trials = trials;
  o.seed = seed;
  o.z4_trials = 500;
  o.sentence_restarts = 4;
  o.net_spans = 1;
  o.cover_samples = 2000;
  return o;
}

}  // namespace

TEST(Verify, RegistryNamesAndUnknownCheck) {
  const std::vector<std::string> want = {"unitary-lemma",   "claim2-bound",          "avg2-exact",
                                         "z4-identity",     "kirchberg-step",        "jordan-transpose",
                                         "op-duality",      "net-proposition",       "polarization-transfer",
                                         "linear-independence-perturb"};
  EXPECT_EQ(check_names(), want);
  EXPECT_THROW(run_check("no-such-check", small(1)), UnknownCheckError);
}

TEST(Verify, CheapChecksPass) {
  for (const char* name : {"unitary-lemma", "claim2-bound", "avg2-exact", "z4-identity", "kirchberg-step",
                           "jordan-transpose", "polarization-transfer", "linear-independence-perturb"}) {
    const CheckReport r = run_check(name, small(200));
    EXPECT_TRUE(r.pass) << name << " worst slack " << r.worst_slack;
    EXPECT_EQ(r.pass, r.worst_slack <= r.tolerance);
    EXPECT_GT(r.trials, 0u);
    EXPECT_EQ(r.name, name);
  }
}

TEST(Verify, UnitaryLemmaRecordsDiagnostics) {
  const CheckReport r = run_check("unitary-lemma", small(200));
  // ||y - u||_2 = ||1 - |y|||_2 <= sqrt(1 - ||y||_2^2) <= sqrt(4 eps - 4 eps^2) < 2 sqrt(eps)
  EXPECT_LT(r.details.at("empirical_constant"), 2.0);
  EXPECT_GT(r.details.at("empirical_constant"), 0.0);
  EXPECT_GT(r.details.at("reversed_link_violations"), 0.0);
  EXPECT_EQ(r.trials, 6u * 4u * 200u);
}

TEST(Verify, PolarizationBoundIsQuarterTightOnSingularVectors) {
  // the top singular vector changes its squared norm by (1 + delta)^2 - 1,
  // a quarter of 8 delta + 4 delta^2
  const CheckReport r = run_check("polarization-transfer", small(60));
  EXPECT_NEAR(r.details.at("worst_change_over_bound"), 0.25, 1e-12);
}

TEST(Verify, OpDualityAndNet) {
  const CheckReport op = run_check("op-duality", small(100));
  EXPECT_TRUE(op.pass) << op.worst_slack;
  EXPECT_EQ(op.details.at("qf_mismatches"), 0.0);
  const CheckReport net = run_check("net-proposition", small(1));
  EXPECT_TRUE(net.pass) << net.worst_slack;
  EXPECT_LE(net.details.at("worst_cover_distance"), 0.125);
  EXPECT_LE(net.details.at("worst_map_margin"), 0.25);
}

TEST(Verify, ReproducibleForSeed) {
  const CheckReport a = run_check("avg2-exact", small(100, 9));
  const CheckReport b = run_check("avg2-exact", small(100, 9));
  EXPECT_EQ(a.worst_slack, b.worst_slack);
  EXPECT_EQ(a.details, b.details);
  const CheckReport c = run_check("claim2-bound", small(100, 9));
  const CheckReport d = run_check("claim2-bound", small(100, 10));
  EXPECT_NE(c.details.at("empirical_constant"), d.details.at("empirical_constant"));
}
