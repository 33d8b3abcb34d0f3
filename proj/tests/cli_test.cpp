#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "semex/annotate/annotate.hpp"
#include "semex/replay/store.hpp"
#include "semex/util/config.hpp"
#include "semex/util/csv.hpp"
#include "semex/util/svg.hpp"

using namespace semex;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs the pipeline binary through the shell and returns its exit code;
// stdout/stderr land in `log` for content checks.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(SEMEX_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

// Shrunk network sizes so subprocess runs stay in the seconds range.
const char* kSmallSets =
    " --set model.det_dim=16 --set model.stoch_dim=4 --set model.hidden=16"
    " --set ensemble.members=3 --set ensemble.hidden=8 --set policy.hidden=16"
    " --set policy.horizon=8 --set imagine_starts=4 --set batch_size=4"
    " --set seq_len=8 --set train_every=64";

// A small on-disk replay store for annotate-command tests.
std::string make_store_dir(const fs::path& dir) {
  replay::ReplayStore store;
  Rng rng(71);
  for (int e = 0; e < 3; ++e) {
    replay::Episode ep;
    ep.env = grid::EnvKind::key_chest_lite;
    ep.policy = "scripted";
    ep.phase = "collect";
    ep.seed = static_cast<std::uint64_t>(e);
    ep.init_obs = test::obs_at_level(0, rng);
    for (int t = 0; t < 8; ++t) {
      replay::Step st;
      st.action = grid::Action::up;
      st.next_obs = test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng);
      st.done = t == 7;
      ep.steps.push_back(st);
    }
    store.add(std::move(ep));
  }
  const std::string path = (dir / "store").string();
  store.save(path);
  return path;
}

}  // namespace

TEST_CASE("kv config parses files and applies the precedence chain") {
  const util::KvConfig kv = util::KvConfig::from_string(
      "# a comment\n"
      "steps = 120\n"
      "  env=key_room_lite   # trailing comment\n"
      "model.lr = 5e-4\n"
      "save_store = no\n"
      "seeds = 3,5,8\n"
      "note = a=b\n");
  CHECK(kv.get_int("steps", 0) == 120);
  CHECK(kv.get_string("env", "") == "key_room_lite");
  CHECK(kv.get_double("model.lr", 0.0) == 5e-4);
  CHECK_FALSE(kv.get_bool("save_store", true));
  CHECK(kv.get_u64_list("seeds", {}) == std::vector<std::uint64_t>{3, 5, 8});
  CHECK(kv.get_string("note", "") == "a=b");  // split on the first '='

  CHECK(kv.get_int("absent", 42) == 42);
  CHECK(kv.get_bool("absent", true));
  CHECK(kv.get_double("absent", 1.5) == 1.5);
  CHECK(kv.get_u64("absent", 9) == 9);

  util::KvConfig override_wins = util::KvConfig::from_string("steps = 1\n");
  override_wins.set("steps", "2");
  CHECK(override_wins.get_int("steps", 0) == 2);
}

TEST_CASE("kv config rejects malformed input") {
  CHECK_THROWS_AS(util::KvConfig::from_string("just words\n"), util::ConfigError);
  CHECK_THROWS_AS(util::KvConfig::from_string("= naked value\n"), util::ConfigError);
  CHECK_THROWS_AS(util::KvConfig::from_file("/nonexistent/config.cfg"), util::ConfigError);

  const util::KvConfig kv = util::KvConfig::from_string(
      "steps = soon\nratio = much\nflag = maybe\nseeds = 1,,2\n");
  CHECK_THROWS_AS(kv.get_int("steps", 0), util::ConfigError);
  CHECK_THROWS_AS(kv.get_double("ratio", 0.0), util::ConfigError);
  CHECK_THROWS_AS(kv.get_bool("flag", false), util::ConfigError);
  CHECK_THROWS_AS(kv.get_u64_list("seeds", {}), util::ConfigError);
}

TEST_CASE("kv config tracks which keys were never consumed") {
  const util::KvConfig kv =
      util::KvConfig::from_string("used = 1\nunused = 2\ntypo_key = 3\n");
  CHECK(kv.get_int("used", 0) == 1);
  const std::vector<std::string> left = kv.unconsumed();
  REQUIRE(left.size() == 2);
  CHECK(left[0] == "typo_key");
  CHECK(left[1] == "unused");
}

TEST_CASE("command line overrides split on the first equals sign") {
  CHECK(util::parse_override("a=b") == std::make_pair(std::string("a"), std::string("b")));
  CHECK(util::parse_override("a=b=c") ==
        std::make_pair(std::string("a"), std::string("b=c")));
  CHECK(util::parse_override("k=") == std::make_pair(std::string("k"), std::string("")));
  CHECK_THROWS_AS(util::parse_override("novalue"), util::ConfigError);
  CHECK_THROWS_AS(util::parse_override("=x"), util::ConfigError);
}

TEST_CASE("csv files round trip through writer and reader") {
  const auto dir = test::fresh_dir("csv");
  const std::string path = (dir / "t.csv").string();
  {
    util::CsvWriter w(path, {"name", "x", "n"});
    auto r1 = w.row();
    r1.add("alpha").add(0.5).add(std::int64_t{7});
    w.write(r1);
    auto r2 = w.row();
    r2.add("beta").add(1.0 / 3.0).add(std::int64_t{-2});
    w.write(r2);
    CHECK(w.rows_written() == 2);
  }
  const util::CsvTable t = util::read_csv(path);
  REQUIRE(t.columns == std::vector<std::string>{"name", "x", "n"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.cell(0, "name") == "alpha");
  CHECK(t.num(0, "x") == 0.5);
  CHECK(t.cell(1, "x") == "0.3333333333");  // ten significant digits
  CHECK(t.num(1, "n") == -2.0);
  CHECK(t.col("missing") == -1);
  CHECK_THROWS_AS(t.cell(0, "missing"), std::out_of_range);
  CHECK_THROWS_AS(t.num(0, "name"), std::invalid_argument);
}

TEST_CASE("csv cells and rows are validated at write time") {
  const auto dir = test::fresh_dir("csv_bad");
  util::CsvWriter w((dir / "t.csv").string(), {"a", "b"});
  auto row = w.row();
  CHECK_THROWS_AS(row.add("has,comma"), std::invalid_argument);
  auto short_row = w.row();
  short_row.add("only one");
  CHECK_THROWS_AS(w.write(short_row), std::logic_error);
  CHECK_THROWS_AS(util::CsvWriter((dir / "e.csv").string(), {}), std::invalid_argument);
}

TEST_CASE("the csv reader flags structural damage") {
  const auto dir = test::fresh_dir("csv_read");
  {
    std::ofstream out(dir / "ragged.csv");
    out << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS(util::read_csv((dir / "ragged.csv").string()), std::runtime_error);
  {
    std::ofstream out(dir / "empty.csv");
  }
  CHECK_THROWS_AS(util::read_csv((dir / "empty.csv").string()), std::runtime_error);
  CHECK_THROWS_AS(util::read_csv((dir / "nope.csv").string()), std::runtime_error);
  {
    std::ofstream out(dir / "trail.csv");
    out << "a,b,c\n1,2,\n";
  }
  const util::CsvTable t = util::read_csv((dir / "trail.csv").string());
  CHECK(t.rows.at(0).at(2).empty());
}

TEST_CASE("number formatting keeps ten significant digits") {
  CHECK(util::format_double(0.0) == "0");
  CHECK(util::format_double(0.5) == "0.5");
  CHECK(util::format_double(-1.25) == "-1.25");
  CHECK(util::format_double(1e300) == "1e+300");
  CHECK(util::format_double(1234567890.123) == "1234567890");
}

TEST_CASE("line plots render as standalone svg") {
  util::PlotSpec spec;
  spec.title = "keys & doors <test>";
  spec.xlabel = "steps";
  spec.ylabel = "count";
  util::Series s1{"run a", {0, 100, 200}, {0, 1, 3}, ""};
  util::Series s2{"run b", {0, 100, 200}, {0, 2, 2}, "#123456"};
  const std::vector<util::Marker> markers{{150.0, "pickup", "#d62728"}};
  const std::string svg = render_line_plot(spec, {s1, s2}, markers);

  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("keys &amp; doors &lt;test&gt;") != std::string::npos);
  CHECK(svg.find("run a") != std::string::npos);
  CHECK(svg.find("#123456") != std::string::npos);
  CHECK(svg.find("pickup") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);

  util::Series bad{"bad", {0, 1}, {0}, ""};
  CHECK_THROWS_AS(util::render_line_plot(spec, {bad}, {}), std::invalid_argument);

  const auto dir = test::fresh_dir("svg");
  util::write_line_plot((dir / "p.svg").string(), spec, {s1}, {});
  CHECK(slurp(dir / "p.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("the pipeline runs end to end through the command line") {
  const auto dir = test::fresh_dir("cli_pipeline");
  const fs::path log = dir / "log.txt";

  // bootstrap collection
  const std::string collect_args = std::string("--env key_room_lite --steps 1200 --seed 11") +
                                   kSmallSets + " --out " + (dir / "collect").string();
  REQUIRE(run_cli("collect " + collect_args, log) == 0);
  CHECK(fs::exists(dir / "collect" / "metrics.csv"));
  CHECK(fs::exists(dir / "collect" / "store" / "index.txt"));
  CHECK(fs::exists(dir / "collect" / "checkpoint.semex"));
  CHECK(slurp(dir / "collect" / "manifest.json").find("\"status\": \"completed\"") !=
        std::string::npos);

  // identical invocation, fresh directory: byte-identical metrics
  REQUIRE(run_cli("collect " + std::string("--env key_room_lite --steps 1200 --seed 11") +
                      kSmallSets + " --out " + (dir / "collect2").string(),
                  log) == 0);
  CHECK(slurp(dir / "collect" / "metrics.csv") == slurp(dir / "collect2" / "metrics.csv"));
  CHECK(slurp(dir / "collect" / "traces.csv") == slurp(dir / "collect2" / "traces.csv"));
  CHECK(slurp(dir / "collect" / "summary.json") == slurp(dir / "collect2" / "summary.json"));

  // annotation against the in-process mock endpoint
  REQUIRE(run_cli("annotate --store " + (dir / "collect" / "store").string() + " --out " +
                      (dir / "pairs.jsonl").string() + " --pairs 150 --seed 3 --annotator mock",
                  log) == 0);
  CHECK(annotate::read_dataset_file((dir / "pairs.jsonl").string()).size() == 150);
  CHECK(slurp(dir / "pairs.jsonl.manifest.json").find("\"annotator\": \"mock\"") !=
        std::string::npos);

  // preference distillation
  REQUIRE(run_cli("distill --dataset " + (dir / "pairs.jsonl").string() + " --out " +
                      (dir / "net.bin").string() +
                      " --seed 5 --set distill.epochs=6 --set distill.lr=0.002",
                  log) == 0);
  CHECK(fs::exists(dir / "net.bin"));
  CHECK(fs::exists(dir / "net.bin.meta.json"));
  CHECK(slurp(log).find("distilled reward net") != std::string::npos);

  // semantic exploration with the distilled net
  REQUIRE(run_cli("explore " + std::string("--env key_room_lite --steps 800 --seed 12") +
                      kSmallSets + " --reward-net " + (dir / "net.bin").string() + " --out " +
                      (dir / "explore").string(),
                  log) == 0);
  CHECK(slurp(dir / "explore" / "summary.json").find("\"phase\": \"explore\"") !=
        std::string::npos);

  // semantic-only ablation
  REQUIRE(run_cli("explore " + std::string("--env key_room_lite --steps 400 --seed 12") +
                      kSmallSets + " --pure-motif --reward-net " + (dir / "net.bin").string() +
                      " --out " + (dir / "pm").string(),
                  log) == 0);
  CHECK(slurp(dir / "pm" / "summary.json").find("\"phase\": \"pure_motif\"") !=
        std::string::npos);

  // task phase warm-started from the exploration checkpoint
  REQUIRE(run_cli("downstream " + std::string("--env key_room_lite --steps 500 --seed 13") +
                      kSmallSets + " --init-model " +
                      (dir / "explore" / "checkpoint.semex").string() + " --out " +
                      (dir / "down").string(),
                  log) == 0);
  CHECK(slurp(dir / "down" / "manifest.json").find("\"status\": \"completed\"") !=
        std::string::npos);

  // aggregate report over two runs
  REQUIRE(run_cli("report --run " + (dir / "collect").string() + " --run " +
                      (dir / "explore").string() +
                      " --label collect --label explore --out " + (dir / "report").string(),
                  log) == 0);
  for (const char* f : {"interactions.csv", "curve_keys.svg", "curve_keys.csv",
                        "curve_chests.svg", "curve_success.svg", "curve_success.csv",
                        "sem_trace.svg", "report_manifest.json"})
    CHECK(fs::exists(dir / "report" / f));

  const util::CsvTable table = util::read_csv((dir / "report" / "interactions.csv").string());
  CHECK(table.rows.size() == 12);  // two labels, six counters each
  bool saw_keys = false;
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    saw_keys = saw_keys || table.cell(r, "metric") == "key_pickups";
  CHECK(saw_keys);
}

TEST_CASE("config values yield to set overrides which yield to flags") {
  const auto dir = test::fresh_dir("cli_precedence");
  const fs::path log = dir / "log.txt";
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "steps = 60\n"
           "env = key_room_lite\n"
           "seed = 21\n"
           "model.det_dim = 16\n"
           "model.stoch_dim = 4\n"
           "model.hidden = 16\n"
           "ensemble.members = 3\n"
           "ensemble.hidden = 8\n"
           "policy.hidden = 16\n";
  }
  const std::string base = "collect --config " + (dir / "run.cfg").string();

  REQUIRE(run_cli(base + " --out " + (dir / "p1").string(), log) == 0);
  CHECK(slurp(dir / "p1" / "summary.json").find("\"env_steps\": 60") != std::string::npos);

  REQUIRE(run_cli(base + " --set steps=90 --out " + (dir / "p2").string(), log) == 0);
  CHECK(slurp(dir / "p2" / "summary.json").find("\"env_steps\": 90") != std::string::npos);

  REQUIRE(run_cli(base + " --set steps=90 --steps 120 --out " + (dir / "p3").string(), log) ==
          0);
  CHECK(slurp(dir / "p3" / "summary.json").find("\"env_steps\": 120") != std::string::npos);
  CHECK(slurp(dir / "p3" / "summary.json").find("\"env\": \"key_room_lite\"") !=
        std::string::npos);
}

TEST_CASE("usage errors exit with the configuration code") {
  const auto dir = test::fresh_dir("cli_usage");
  const fs::path log = dir / "log.txt";

  CHECK(run_cli("--help", log) == 0);
  CHECK(run_cli("collect --help", log) == 0);
  CHECK(run_cli("", log) == 2);                 // a subcommand is required
  CHECK(run_cli("frobnicate", log) == 2);       // unknown subcommand
  CHECK(run_cli("collect", log) == 2);          // --out is required
  CHECK(run_cli("collect --bogus-flag 1 --out " + (dir / "o").string(), log) == 2);
  CHECK(run_cli("collect --env not_an_env --out " + (dir / "o").string(), log) == 2);
  CHECK(run_cli("collect --set steps=abc --out " + (dir / "o").string(), log) == 2);
  CHECK(run_cli("collect --set malformed --out " + (dir / "o").string(), log) == 2);
  // downstream has no reward-net option at all: isolation enforced by the surface
  CHECK(run_cli("downstream --reward-net x --out " + (dir / "o").string(), log) == 2);
  CHECK(run_cli("report --run a --label one --label two --out " + (dir / "o").string(), log) ==
        2);
}

TEST_CASE("missing artifacts exit with the missing input code") {
  const auto dir = test::fresh_dir("cli_missing");
  const fs::path log = dir / "log.txt";

  CHECK(run_cli("annotate --store " + (dir / "nostore").string() + " --out " +
                    (dir / "d.jsonl").string(),
                log) == 3);
  CHECK(run_cli("distill --dataset " + (dir / "missing.jsonl").string() + " --out " +
                    (dir / "net.bin").string(),
                log) == 3);
  CHECK(run_cli("explore --reward-net " + (dir / "missing.bin").string() + " --steps 10 --out " +
                    (dir / "e").string(),
                log) == 3);
  CHECK(run_cli("report --run " + (dir / "norun").string() + " --out " +
                    (dir / "r").string(),
                log) == 3);
  CHECK(slurp(log).find("error:") != std::string::npos);
}

TEST_CASE("bad annotator names are configuration errors") {
  const auto dir = test::fresh_dir("cli_annotator");
  const fs::path log = dir / "log.txt";
  const std::string store = make_store_dir(dir);
  CHECK(run_cli("annotate --store " + store + " --out " + (dir / "d.jsonl").string() +
                    " --annotator psychic",
                log) == 2);
  CHECK(slurp(log).find("unknown annotator") != std::string::npos);
}

TEST_CASE("a corrupt reward net is a runtime failure") {
  const auto dir = test::fresh_dir("cli_corrupt");
  const fs::path log = dir / "log.txt";
  {
    std::ofstream out(dir / "net.bin");
    out << "garbage bytes, not a checkpoint";
  }
  CHECK(run_cli("explore --reward-net " + (dir / "net.bin").string() + " --steps 10" +
                    std::string(kSmallSets) + " --out " + (dir / "e").string(),
                log) == 4);
}
