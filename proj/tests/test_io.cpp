#include <gtest/gtest.h>

#include "eflab/io.hpp"
#include "eflab/parser.hpp"

using namespace eflab;

TEST(Io, ElementRoundTripIsExact) {
  for (const char* spec : {"M2", "C+C:1/3,2/3", "M2+M3:0.4,0.6"}) {
    auto alg = make_algebra(spec);
    Rng rng = make_rng(41);
    const Element x = ginibre_element(alg, rng);
    const Json j = to_json(x);
    EXPECT_TRUE(element_from_json(Json::parse(j.dump())) == x);
    EXPECT_TRUE(element_from_json(j, alg) == x);
  }
  auto m2 = make_algebra("M2");
  EXPECT_THROW(element_from_json(to_json(Element::identity(m2)), make_algebra("M3")), IoError);
}

TEST(Io, TranscriptRoundTripReadjudicatesIdentically) {
  GameConfig c;
  c.kind = GameKind::unitary_gram;
  c.rounds = 3;
  c.epsilon = 0.05;
  c.player1 = "haar";
  c.player2 = "gram-match:8x100";
  c.seed = 3;
  const Transcript t = play_game(c);
  const std::string text = to_json(t).dump(2);
  const Transcript back = transcript_from_json(Json::parse(text));
  EXPECT_EQ(to_json(back).dump(2), text);
  const Transcript again = readjudicate(back);
  EXPECT_EQ(to_json(again).dump(2), text);
}

TEST(Io, BanachTranscriptWithStallAndForfeit) {
  GameConfig c;
  c.kind = GameKind::banach;
  c.rounds = 2;
  c.epsilon = 0.1;
  c.player1 = "scripted:M:diag(1,0);M:stall";
  c.player2 = "copy";
  const Transcript t = play_game(c);
  const Transcript back = transcript_from_json(Json::parse(to_json(t).dump()));
  EXPECT_FALSE(back.moves[2].element.has_value());
  EXPECT_TRUE(back.isometry.has_value());
  EXPECT_EQ(to_json(readjudicate(back)).dump(), to_json(t).dump());

  c.m_spec = "C";
  c.player1 = "scripted:N:E11;N:E12";
  c.player2 = "random";
  const Transcript lost = play_game(c);
  ASSERT_TRUE(lost.forfeit);
  const Transcript lost_back = transcript_from_json(Json::parse(to_json(lost).dump()));
  EXPECT_EQ(lost_back.forfeit->reason, lost.forfeit->reason);
}

TEST(Io, SchemaIsChecked) {
  Json j = {{"schema", "something-else/9"}};
  EXPECT_THROW(transcript_from_json(j), IoError);
  EXPECT_THROW(eval_result_from_json(Json::object()), IoError);
}

TEST(Io, EvalResultRoundTrip) {
  EvalConfig cfg;
  cfg.restarts = 2;
  cfg.seed = 4;
  const auto s = parse_sentence("sup x:C1. inf u:U. n2(x - u)");
  const EvalResult r = eval_sentence(s, make_algebra("M2"), cfg);
  const Json j = to_json(r, to_string(s));
  const EvalResult back = eval_result_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.value, r.value);
  EXPECT_EQ(back.uncertainty, r.uncertainty);
  EXPECT_EQ(back.sentence_hash, r.sentence_hash);
  ASSERT_EQ(back.witnesses.size(), r.witnesses.size());
  for (std::size_t i = 0; i < r.witnesses.size(); ++i) EXPECT_TRUE(back.witnesses[i].second == r.witnesses[i].second);
  EXPECT_EQ(to_json(back, to_string(s)).dump(), j.dump());
}

TEST(Io, CheckReportRoundTripAndSummary) {
  VerifyOptions o;
  o.trials = 20;
  const CheckReport r = run_check("z4-identity", o);
  const Json j = to_json(r);
  EXPECT_EQ(to_json(check_report_from_json(Json::parse(j.dump()))).dump(), j.dump());
  CheckReport failing = r;
  failing.pass = false;
  const Json s = summary_json({r, failing}, 0);
  EXPECT_EQ(s.at("passed"), 1);
  EXPECT_EQ(s.at("failed"), 1);
}
