#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eflab/algebra.hpp"
#include "eflab/banach_pair.hpp"
#include "eflab/evaluator.hpp"
#include "eflab/games.hpp"
#include "eflab/verify.hpp"

namespace eflab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kTranscriptSchema = "eflab-transcript/1";
inline constexpr const char* kEvalSchema = "eflab-eval/1";
inline constexpr const char* kCheckSchema = "eflab-check/1";
inline constexpr const char* kSummarySchema = "eflab-verify-summary/1";
inline constexpr const char* kNetSchema = "eflab-net/1";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrices as row-major lists of [re, im] pairs.
inline Json to_json(const Eigen::MatrixXcd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXcd matrix_from_json(const Json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  const auto m = n ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXcd out(n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != m) throw IoError("ragged matrix");
    for (Eigen::Index c = 0; c < m; ++c) {
      const Json& e = row.at(static_cast<std::size_t>(c));
      out(r, c) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
    }
  }
  return out;
}

inline Json to_json(const Element& x) {
  Json blocks = Json::array();
  for (const auto& b : x.blocks()) blocks.push_back(to_json(Eigen::MatrixXcd(b)));
  return {{"algebra", x.algebra().label}, {"blocks", std::move(blocks)}};
}

inline Element element_from_json(const Json& j, const AlgebraRef& alg) {
  const AlgebraRef own = make_algebra(j.at("algebra").get<std::string>());
  if (!own->same_structure(*alg)) throw IoError("element of " + own->label + " where " + alg->label + " was expected");
  const Json& blocks = j.at("blocks");
  if (blocks.size() != alg->blocks.size()) throw IoError("element has the wrong number of blocks");
  std::vector<Matrix> out;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Matrix m = matrix_from_json(blocks[b]);
    if (m.rows() != alg->blocks[b] || m.cols() != alg->blocks[b]) throw IoError("element block has the wrong size");
    out.push_back(std::move(m));
  }
  return Element(alg, std::move(out));
}

inline Element element_from_json(const Json& j) { return element_from_json(j, make_algebra(j.at("algebra").get<std::string>())); }

// --- games ----------------------------------------------------------------------------

inline Json to_json(const IsometryReport& r) {
  return {{"variant", to_string(r.variant)}, {"epsilon", r.epsilon},     {"net_resolution", r.net_resolution},
          {"norm_T", r.norm_T},              {"norm_Tinv", r.norm_Tinv}, {"fwd_defect", r.fwd_defect},
          {"bwd_defect", r.bwd_defect},      {"verdict", r.verdict},     {"net_points", r.net_points}};
}

inline IsometryVariant parse_variant(const std::string& s) {
  if (s == "definition") return IsometryVariant::definition;
  if (s == "alternate") return IsometryVariant::alternate;
  throw IoError("unknown isometry variant '" + s + "'");
}

inline IsometryReport isometry_from_json(const Json& j) {
  IsometryReport r;
  r.variant = parse_variant(j.at("variant").get<std::string>());
  r.epsilon = j.at("epsilon").get<double>();
  r.net_resolution = j.at("net_resolution").get<double>();
  r.norm_T = j.at("norm_T").get<double>();
  r.norm_Tinv = j.at("norm_Tinv").get<double>();
  r.fwd_defect = j.at("fwd_defect").get<double>();
  r.bwd_defect = j.at("bwd_defect").get<double>();
  r.verdict = j.at("verdict").get<bool>();
  r.net_points = j.at("net_points").get<std::size_t>();
  return r;
}

inline Json to_json(const GameConfig& c) {
  return {{"kind", to_string(c.kind)},   {"rounds", c.rounds},       {"epsilon", c.epsilon},
          {"M", c.m_spec},               {"N", c.n_spec},            {"formulas", c.formulas},
          {"seed", c.seed},              {"player1", c.player1},     {"player2", c.player2},
          {"variant", to_string(c.variant)}, {"resolution", c.resolution}};
}

inline GameConfig game_config_from_json(const Json& j) {
  GameConfig c;
  c.kind = parse_game_kind(j.at("kind").get<std::string>());
  c.rounds = j.at("rounds").get<int>();
  c.epsilon = j.at("epsilon").get<double>();
  c.m_spec = j.at("M").get<std::string>();
  c.n_spec = j.at("N").get<std::string>();
  c.formulas = j.at("formulas").get<std::vector<std::string>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.player1 = j.at("player1").get<std::string>();
  c.player2 = j.at("player2").get<std::string>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.resolution = j.at("resolution").get<double>();
  return c;
}

inline Json to_json(const Transcript& t) {
  Json moves = Json::array();
  for (const auto& m : t.moves) {
    Json mv = {{"round", m.round}, {"player", to_string(m.player)}, {"side", to_string(m.side)}};
    mv["element"] = m.element ? to_json(*m.element) : Json(nullptr);
    mv["forced"] = m.forced;
    mv["deviation"] = m.deviation ? Json(*m.deviation) : Json(nullptr);
    moves.push_back(std::move(mv));
  }
  Json verdict = {{"winner", to_string(t.winner)}};
  verdict["forfeit"] = t.forfeit ? Json{{"player", to_string(t.forfeit->player)},
                                        {"round", t.forfeit->round},
                                        {"reason", t.forfeit->reason}}
                                 : Json(nullptr);
  Json out = {{"schema", kTranscriptSchema}, {"config", to_json(t.config)}, {"moves", std::move(moves)},
              {"margins", t.margins},        {"verdict", std::move(verdict)}};
  out["gram_M"] = to_json(t.gram_m);
  out["gram_N"] = to_json(t.gram_n);
  out["isometry"] = t.isometry ? to_json(*t.isometry) : Json(nullptr);
  out["referee_version"] = t.referee_version;
  return out;
}

inline void require_schema(const Json& j, const char* schema) {
  if (!j.contains("schema") || j.at("schema") != schema)
    throw IoError(std::string("expected schema ") + schema + ", got " + (j.contains("schema") ? j.at("schema").dump() : "none"));
}

/// Reads a transcript as recorded; call adjudicate/readjudicate to re-derive
/// the verdict.
inline Transcript transcript_from_json(const Json& j) {
  require_schema(j, kTranscriptSchema);
  Transcript t;
  t.config = game_config_from_json(j.at("config"));
  const AlgebraRef m = make_algebra(t.config.m_spec);
  const AlgebraRef n = make_algebra(t.config.n_spec);
  for (const auto& mv : j.at("moves")) {
    Move move;
    move.round = mv.at("round").get<int>();
    move.player = parse_player(mv.at("player").get<std::string>());
    move.side = parse_side(mv.at("side").get<std::string>());
    if (!mv.at("element").is_null()) move.element = element_from_json(mv.at("element"), move.side == Side::M ? m : n);
    move.forced = mv.at("forced").get<bool>();
    if (!mv.at("deviation").is_null()) move.deviation = mv.at("deviation").get<double>();
    t.moves.push_back(std::move(move));
  }
  t.margins = j.at("margins").get<std::vector<double>>();
  const Json& v = j.at("verdict");
  t.winner = parse_player(v.at("winner").get<std::string>());
  if (!v.at("forfeit").is_null()) {
    const Json& f = v.at("forfeit");
    t.forfeit = Forfeit{parse_player(f.at("player").get<std::string>()), f.at("round").get<int>(),
                        f.at("reason").get<std::string>()};
  }
  t.gram_m = matrix_from_json(j.at("gram_M"));
  t.gram_n = matrix_from_json(j.at("gram_N"));
  if (!j.at("isometry").is_null()) t.isometry = isometry_from_json(j.at("isometry"));
  t.referee_version = j.at("referee_version").get<std::string>();
  return t;
}

// --- evaluator --------------------------------------------------------------------------

inline Json to_json(const EvalConfig& c) {
  Json j = {{"restarts", c.restarts},
            {"iterations", c.iterations},
            {"inner_restarts", c.inner_restarts},
            {"inner_iterations", c.inner_iterations},
            {"polish_restarts", c.polish_restarts},
            {"polish_iterations", c.polish_iterations},
            {"leaf_iterations", c.leaf_iterations},
            {"refine_iterations", c.refine_iterations}};
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  j["tolerance"] = c.tolerance;
  j["initial_step"] = c.initial_step;
  j["min_step"] = c.min_step;
  j["opposite"] = c.opposite;
  return j;
}

inline EvalConfig eval_config_from_json(const Json& j) {
  EvalConfig c;
  c.restarts = j.at("restarts").get<std::size_t>();
  c.iterations = j.at("iterations").get<std::size_t>();
  c.inner_restarts = j.at("inner_restarts").get<std::size_t>();
  c.inner_iterations = j.at("inner_iterations").get<std::size_t>();
  c.polish_restarts = j.at("polish_restarts").get<std::size_t>();
  c.polish_iterations = j.at("polish_iterations").get<std::size_t>();
  c.leaf_iterations = j.at("leaf_iterations").get<std::size_t>();
  c.refine_iterations = j.at("refine_iterations").get<std::size_t>();
  if (!j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  c.tolerance = j.at("tolerance").get<double>();
  c.initial_step = j.at("initial_step").get<double>();
  c.min_step = j.at("min_step").get<double>();
  c.opposite = j.at("opposite").get<bool>();
  return c;
}

inline Json to_json(const EvalResult& r, const std::string& sentence_text = "") {
  Json w = Json::array();
  for (const auto& [name, x] : r.witnesses) w.push_back({{"variable", name}, {"element", to_json(x)}});
  Json j = {{"schema", kEvalSchema}};
  if (!sentence_text.empty()) j["sentence"] = sentence_text;
  j["sentence_hash"] = r.sentence_hash;
  j["algebra"] = r.algebra;
  j["value"] = r.value;
  j["uncertainty"] = r.uncertainty;
  j["budget_exhausted"] = r.budget_exhausted;
  j["witnesses"] = std::move(w);
  j["config"] = to_json(r.config);
  return j;
}

inline EvalResult eval_result_from_json(const Json& j) {
  require_schema(j, kEvalSchema);
  EvalResult r;
  r.sentence_hash = j.at("sentence_hash").get<std::string>();
  r.algebra = j.at("algebra").get<std::string>();
  r.value = j.at("value").get<double>();
  r.uncertainty = j.at("uncertainty").get<double>();
  r.budget_exhausted = j.at("budget_exhausted").get<bool>();
  const AlgebraRef alg = make_algebra(r.algebra);
  for (const auto& w : j.at("witnesses"))
    r.witnesses.emplace_back(w.at("variable").get<std::string>(), element_from_json(w.at("element"), alg));
  r.config = eval_config_from_json(j.at("config"));
  return r;
}

// --- verification -----------------------------------------------------------------------

inline Json to_json(const CheckReport& r) {
  Json details = Json::object();
  for (const auto& [k, v] : r.details) details[k] = v;
  return {{"schema", kCheckSchema},       {"name", r.name},         {"trials", r.trials},
          {"worst_slack", r.worst_slack}, {"tolerance", r.tolerance}, {"pass", r.pass},
          {"seed", r.seed},               {"algebras", r.algebras}, {"details", std::move(details)},
          {"note", r.note}};
}

inline CheckReport check_report_from_json(const Json& j) {
  require_schema(j, kCheckSchema);
  CheckReport r;
  r.name = j.at("name").get<std::string>();
  r.trials = j.at("trials").get<std::size_t>();
  r.worst_slack = j.at("worst_slack").get<double>();
  r.tolerance = j.at("tolerance").get<double>();
  r.pass = j.at("pass").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.algebras = j.at("algebras").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("details").items()) r.details[k] = v.get<double>();
  r.note = j.at("note").get<std::string>();
  return r;
}

inline Json summary_json(const std::vector<CheckReport>& reports, std::uint64_t seed) {
  Json checks = Json::array();
  std::size_t passed = 0;
  for (const auto& r : reports) {
    checks.push_back({{"name", r.name}, {"pass", r.pass}, {"worst_slack", r.worst_slack}, {"tolerance", r.tolerance}});
    passed += r.pass;
  }
  return {{"schema", kSummarySchema}, {"seed", seed}, {"checks", std::move(checks)},
          {"passed", passed},         {"failed", reports.size() - passed}};
}

// --- nets --------------------------------------------------------------------------------

inline Json to_json(const Net& net, const CoverCheck& cover, bool with_points) {
  Json j = {{"schema", kNetSchema},
            {"epsilon", net.epsilon},
            {"size", net.points.size()},
            {"lattice_spacing", net.lattice_spacing},
            {"cloud_radius", net.cloud_radius},
            {"greedy_radius", net.greedy_radius},
            {"covering_bound", net.covering_bound},
            {"cover_check", {{"samples", cover.samples}, {"worst_distance", cover.worst_distance}, {"passed", cover.passed}}}};
  if (with_points) {
    Json pts = Json::array();
    for (const auto& p : net.points) pts.push_back(to_json(p));
    j["points"] = std::move(pts);
  }
  return j;
}

}  // namespace eflab
