// ef_lab: play games, evaluate and transform sentences, build nets, run the
// verification suite and re-adjudicate transcripts.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eflab/eflab.hpp"

namespace {

using namespace eflab;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitForfeit = 2;
constexpr int kExitCheckFailure = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("EF_LAB_SEED")) {
    try {
      std::size_t used = 0;
      const std::uint64_t s = std::stoull(env, &used);
      if (used == std::string(env).size()) return s;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("EF_LAB_SEED is not an unsigned integer: '") + env + "'");
  }
  throw UsageError("a seed is required: pass --seed or set EF_LAB_SEED");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Splits "a;b;c" into its non-empty items.
std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (item.find_first_not_of(' ') != std::string::npos) out.push_back(item);
  return out;
}

int play(const GameConfig& base, const std::optional<std::uint64_t>& seed, const std::string& unitaries,
         const std::string& out) {
  GameConfig cfg = base;
  cfg.seed = resolve_seed(seed);
  Transcript t;
  if (cfg.kind == GameKind::representability) {
    auto m = make_algebra(cfg.m_spec);
    std::vector<Element> us;
    for (const auto& text : split_list(unitaries)) us.push_back(parse_element(text, m));
    if (us.empty()) throw UsageError("representability needs --unitaries");
    t = play_representability_game(cfg, us);
  } else {
    t = play_game(cfg);
  }
  write_output(out, dump(to_json(t)));
  return t.forfeit ? kExitForfeit : kExitOk;
}

int eval(const std::string& algebra, std::size_t restarts, bool opposite, const std::optional<std::uint64_t>& seed,
         const std::string& path, const std::string& out) {
  EvalConfig cfg;
  cfg.restarts = restarts;
  cfg.opposite = opposite;
  cfg.seed = resolve_seed(seed);
  const FormulaPtr s = parse_sentence(read_file(path));
  const EvalResult r = eval_sentence(s, make_algebra(algebra), cfg);
  write_output(out, dump(to_json(r, to_string(s))));
  return kExitOk;
}

int transform(bool op, bool u, bool uu, const std::string& path, const std::string& out) {
  if (op + u + uu != 1) throw UsageError("transform needs exactly one of --op, --u, --uu");
  const FormulaPtr s = parse_sentence(read_file(path));
  const FormulaPtr t = op ? op_transform(s) : unitary_transform(s, u ? UnitaryMode::u : UnitaryMode::uu);
  write_output(out, to_string(t) + "\n");
  return kExitOk;
}

int net(const std::string& algebra, const std::string& span, double eps, std::size_t samples,
        const std::optional<std::uint64_t>& seed, bool with_points, const std::string& out) {
  const std::uint64_t s = resolve_seed(seed);
  auto alg = make_algebra(algebra);
  std::vector<Element> vs;
  for (const auto& text : split_list(span)) vs.push_back(parse_element(text, alg));
  if (vs.empty()) throw UsageError("net needs --span");
  const Subspace e = subspace_span(vs);
  const Net n = build_net(e, eps);
  const CoverCheck cover = check_net_cover(e, n, samples, s);
  Json j = to_json(n, cover, with_points);
  j["algebra"] = alg->label;
  j["span"] = split_list(span);
  j["seed"] = s;
  write_output(out, dump(j));
  return cover.passed ? kExitOk : kExitCheckFailure;
}

int verify(bool all, const std::vector<std::string>& checks, std::size_t trials,
           const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
  if (all == !checks.empty()) throw UsageError("verify needs either --all or one or more --check");
  VerifyOptions opt;
  opt.seed = resolve_seed(seed);
  if (trials) opt.trials = trials;
  const std::vector<std::string> names = all ? check_names() : checks;
  std::vector<CheckReport> reports;
  for (const auto& name : names) {
    reports.push_back(run_check(name, opt));
    const CheckReport& r = reports.back();
    std::cerr << (r.pass ? "PASS " : "FAIL ") << r.name << " worst_slack=" << r.worst_slack
              << " tolerance=" << r.tolerance << "\n";
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      write_output((std::filesystem::path(out_dir) / (r.name + ".json")).string(), dump(to_json(r)));
    }
  }
  const Json summary = summary_json(reports, opt.seed);
  if (!out_dir.empty()) write_output((std::filesystem::path(out_dir) / "summary.json").string(), dump(summary));
  std::cout << dump(summary);
  return summary.at("failed").get<std::size_t>() == 0 ? kExitOk : kExitCheckFailure;
}

int readjudicate_file(const std::string& path, const std::optional<double>& eps, const std::string& out) {
  const Transcript t = readjudicate(transcript_from_json(Json::parse(read_file(path))), eps);
  write_output(out, dump(to_json(t)));
  return t.forfeit ? kExitForfeit : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metric Ehrenfeucht-Fraisse games and continuous-logic tools over finite tracial algebras"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::string out;

  GameConfig game;
  std::string kind = "unitary";
  std::string variant = "definition";
  std::string unitaries;
  auto* play_cmd = app.add_subcommand("play", "play one game and write its transcript");
  play_cmd->add_option("--game", kind, "atomic | banach | unitary | representability")->capture_default_str();
  play_cmd->add_option("--M", game.m_spec, "algebra M")->capture_default_str();
  play_cmd->add_option("--N", game.n_spec, "algebra N (the target algebra for representability)")->capture_default_str();
  play_cmd->add_option("--rounds", game.rounds, "number of rounds")->capture_default_str();
  play_cmd->add_option("--eps", game.epsilon, "winning slack epsilon")->capture_default_str();
  play_cmd->add_option("--p1", game.player1, "Player I strategy")->capture_default_str();
  play_cmd->add_option("--p2", game.player2, "Player II strategy")->capture_default_str();
  play_cmd->add_option("--formula", game.formulas, "atomic formula over x1..xn (repeatable)");
  play_cmd->add_option("--variant", variant, "banach almost-isometry variant: definition | alternate")
      ->capture_default_str();
  play_cmd->add_option("--resolution", game.resolution, "banach referee net resolution")->capture_default_str();
  play_cmd->add_option("--unitaries", unitaries, "representability inputs in M, separated by ';'");
  play_cmd->add_option("--seed", seed, "seed (falls back to EF_LAB_SEED)");
  play_cmd->add_option("--out", out, "output file (default stdout)");

  std::string algebra = "M2";
  std::size_t restarts = 64;
  bool opposite = false;
  std::string formula_path;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a sentence in an algebra");
  eval_cmd->add_option("--algebra", algebra, "algebra spec")->capture_default_str();
  eval_cmd->add_option("--restarts", restarts, "top-level restarts")->capture_default_str();
  eval_cmd->add_flag("--opposite", opposite, "evaluate in the opposite algebra");
  eval_cmd->add_option("--seed", seed, "seed (falls back to EF_LAB_SEED)");
  eval_cmd->add_option("--out", out, "output file (default stdout)");
  eval_cmd->add_option("formula", formula_path, "file holding one sentence")->required();

  bool op = false, u = false, uu = false;
  auto* transform_cmd = app.add_subcommand("transform", "rewrite a sentence");
  transform_cmd->add_flag("--op", op, "swap the order of every product");
  transform_cmd->add_flag("--u", u, "replace inf quantifiers over balls by averages of two norm-one variables");
  transform_cmd->add_flag("--uu", uu, "as --u with the fresh variables ranging over unitaries");
  transform_cmd->add_option("--out", out, "output file (default stdout)");
  transform_cmd->add_option("formula", formula_path, "file holding one sentence")->required();

  std::string span;
  double net_eps = 0.25;
  std::size_t samples = 100000;
  bool with_points = false;
  auto* net_cmd = app.add_subcommand("net", "build an epsilon/2-net of a subspace slice and check its cover");
  net_cmd->add_option("--algebra", algebra, "algebra spec")->capture_default_str();
  net_cmd->add_option("--span", span, "spanning elements separated by ';'")->required();
  net_cmd->add_option("--eps", net_eps, "epsilon")->capture_default_str();
  net_cmd->add_option("--samples", samples, "cover-check samples")->capture_default_str();
  net_cmd->add_flag("--points", with_points, "include the net points");
  net_cmd->add_option("--seed", seed, "seed (falls back to EF_LAB_SEED)");
  net_cmd->add_option("--out", out, "output file (default stdout)");

  bool all = false;
  std::vector<std::string> checks;
  std::size_t trials = 0;
  std::string out_dir;
  auto* verify_cmd = app.add_subcommand("verify", "run verification checks");
  verify_cmd->add_flag("--all", all, "run every registered check");
  verify_cmd->add_option("--check", checks, "check name (repeatable)");
  verify_cmd->add_option("--trials", trials, "trials per algebra (default 1000)");
  verify_cmd->add_option("--seed", seed, "seed (falls back to EF_LAB_SEED)");
  verify_cmd->add_option("--out-dir", out_dir, "directory for one report per check plus summary.json");

  std::string transcript_path;
  std::optional<double> re_eps;
  auto* re_cmd = app.add_subcommand("readjudicate", "re-run the referee on a transcript");
  re_cmd->add_option("transcript", transcript_path, "transcript file")->required();
  re_cmd->add_option("--eps", re_eps, "epsilon to adjudicate at (default: the recorded one)");
  re_cmd->add_option("--out", out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*play_cmd) {
      game.kind = parse_game_kind(kind);
      game.variant = parse_variant(variant);
      return play(game, seed, unitaries, out);
    }
    if (*eval_cmd) return eval(algebra, restarts, opposite, seed, formula_path, out);
    if (*transform_cmd) return transform(op, u, uu, formula_path, out);
    if (*net_cmd) return net(algebra, span, net_eps, samples, seed, with_points, out);
    if (*verify_cmd) return verify(all, checks, trials, seed, out_dir);
    if (*re_cmd) return readjudicate_file(transcript_path, re_eps, out);
  } catch (const std::exception& e) {
    std::cerr << "ef_lab: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
