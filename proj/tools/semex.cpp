// Pipeline entry point: collect -> annotate -> distill -> explore ->
// downstream -> report. Each command writes a manifest next to its outputs so
// a run directory is reproducible from its own files.
//
// Exit codes: 0 success, 2 configuration error, 3 missing input artifact,
// 4 runtime failure (including diverged training runs).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semex/annotate/annotate.hpp"
#include "semex/annotate/client.hpp"
#include "semex/annotate/mock_server.hpp"
#include "semex/explore/runner.hpp"
#include "semex/motif/motif.hpp"
#include "semex/replay/store.hpp"
#include "semex/util/config.hpp"
#include "semex/util/csv.hpp"
#include "semex/util/hash.hpp"
#include "semex/util/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitRuntime = 4;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write: " + path);
}

util::KvConfig load_kv(const std::string& config_path,
                       const std::vector<std::string>& overrides) {
  util::KvConfig kv =
      config_path.empty() ? util::KvConfig{} : util::KvConfig::from_file(config_path);
  for (const std::string& ov : overrides) {
    const auto [k, v] = util::parse_override(ov);
    kv.set(k, v);
  }
  return kv;
}

void warn_unconsumed(const util::KvConfig& kv) {
  for (const std::string& k : kv.unconsumed())
    std::cerr << "warning: unused config key: " << k << "\n";
}

// ---------------------------------------------------------------------------
// Run-phase commands (collect / explore / downstream)

struct RunCli {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string env = "key_chest_lite";
  std::int64_t steps = 10000;
  std::uint64_t seed = 1;
  std::string out;
  std::string reward_net;   // explore
  bool pure_motif = false;  // explore
  std::string init_model;   // downstream

  CLI::Option* o_env = nullptr;
  CLI::Option* o_steps = nullptr;
  CLI::Option* o_seed = nullptr;
};

void add_run_options(CLI::App* cmd, RunCli& rc) {
  cmd->add_option("--config", rc.config_path, "key = value config file");
  cmd->add_option("--set", rc.overrides, "config override key=value (repeatable)");
  rc.o_env = cmd->add_option("--env", rc.env, "key_room_lite | key_chest_lite");
  rc.o_steps = cmd->add_option("--steps", rc.steps, "environment step budget");
  rc.o_seed = cmd->add_option("--seed", rc.seed, "run seed");
  cmd->add_option("--out", rc.out, "output directory")->required();
}

explore::RunnerConfig resolve_run(const RunCli& rc, explore::Phase phase) {
  const util::KvConfig kv = load_kv(rc.config_path, rc.overrides);
  explore::RunnerConfig cfg;
  cfg.phase = phase;
  cfg.env = grid::env_kind_from_name(
      rc.o_env->count() ? rc.env : kv.get_string("env", "key_chest_lite"));
  cfg.seed = rc.o_seed->count() ? rc.seed : kv.get_u64("seed", cfg.seed);
  cfg.total_steps = rc.o_steps->count() ? rc.steps : kv.get_int("steps", cfg.total_steps);
  cfg.out_dir = rc.out;
  cfg.reward_net_path = rc.reward_net;
  cfg.init_model_path = rc.init_model;

  cfg.train_every = static_cast<int>(kv.get_int("train_every", cfg.train_every));
  cfg.batch_size = static_cast<int>(kv.get_int("batch_size", cfg.batch_size));
  cfg.seq_len = static_cast<int>(kv.get_int("seq_len", cfg.seq_len));
  cfg.imagine_starts = static_cast<int>(kv.get_int("imagine_starts", cfg.imagine_starts));
  cfg.trace_every = kv.get_int("trace_every", cfg.trace_every);
  cfg.success_window = static_cast<int>(kv.get_int("success_window", cfg.success_window));
  cfg.save_store = kv.get_bool("save_store", cfg.save_store);
  cfg.save_checkpoint = kv.get_bool("save_checkpoint", cfg.save_checkpoint);

  cfg.model.det_dim = static_cast<int>(kv.get_int("model.det_dim", cfg.model.det_dim));
  cfg.model.stoch_dim = static_cast<int>(kv.get_int("model.stoch_dim", cfg.model.stoch_dim));
  cfg.model.hidden = static_cast<int>(kv.get_int("model.hidden", cfg.model.hidden));
  cfg.model.free_bits = kv.get_double("model.free_bits", cfg.model.free_bits);
  cfg.model.kl_scale = kv.get_double("model.kl_scale", cfg.model.kl_scale);
  cfg.model.lr = kv.get_double("model.lr", cfg.model.lr);

  cfg.ensemble.members = static_cast<int>(kv.get_int("ensemble.members", cfg.ensemble.members));
  cfg.ensemble.hidden = static_cast<int>(kv.get_int("ensemble.hidden", cfg.ensemble.hidden));
  cfg.ensemble.lr = kv.get_double("ensemble.lr", cfg.ensemble.lr);

  cfg.policy.hidden = static_cast<int>(kv.get_int("policy.hidden", cfg.policy.hidden));
  cfg.policy.horizon = static_cast<int>(kv.get_int("policy.horizon", cfg.policy.horizon));
  cfg.policy.discount = kv.get_double("policy.discount", cfg.policy.discount);
  cfg.policy.lambda = kv.get_double("policy.lambda", cfg.policy.lambda);
  cfg.policy.entropy_coef = kv.get_double("policy.entropy_coef", cfg.policy.entropy_coef);
  cfg.policy.actor_lr = kv.get_double("policy.actor_lr", cfg.policy.actor_lr);
  cfg.policy.critic_lr = kv.get_double("policy.critic_lr", cfg.policy.critic_lr);

  const char* wkeys[] = {"weights.chi",      "weights.alpha_go", "weights.alpha_explore",
                         "weights.beta_go",  "weights.beta_explore", "weights.quantile_k"};
  bool any_weight = false;
  for (const char* k : wkeys) any_weight = any_weight || kv.has(k);
  if (any_weight) {
    explore::RewardWeights w = explore::default_weights(phase, cfg.env);
    w.chi = kv.get_double("weights.chi", w.chi);
    w.alpha_go = kv.get_double("weights.alpha_go", w.alpha_go);
    w.alpha_explore = kv.get_double("weights.alpha_explore", w.alpha_explore);
    w.beta_go = kv.get_double("weights.beta_go", w.beta_go);
    w.beta_explore = kv.get_double("weights.beta_explore", w.beta_explore);
    w.quantile_k = kv.get_double("weights.quantile_k", w.quantile_k);
    cfg.weights = w;
  }

  warn_unconsumed(kv);
  return cfg;
}

int finish_run(const explore::RunSummary& s) {
  const grid::EventCounters& c = s.counters;
  std::printf("%s %s seed=%llu: %lld steps, %lld episodes, %lld train cycles\n",
              explore::phase_name(s.phase).c_str(), grid::env_kind_name(s.env).c_str(),
              static_cast<unsigned long long>(s.seed),
              static_cast<long long>(s.env_steps), static_cast<long long>(s.episodes),
              static_cast<long long>(s.train_steps));
  std::printf(
      "  keys=%lld doors=%lld chests=%lld exits=%lld task_rewards=%lld\n",
      static_cast<long long>(c.key_pickups), static_cast<long long>(c.door_opens),
      static_cast<long long>(c.chest_opens), static_cast<long long>(c.exits_reached),
      static_cast<long long>(c.task_rewards));
  if (s.half_success_step >= 0)
    std::printf("  half-success at env step %lld\n",
                static_cast<long long>(s.half_success_step));
  std::printf("  artifacts: %s\n", s.out_dir.c_str());
  if (s.diverged) {
    std::fprintf(stderr, "error: training diverged; checkpoint saved\n");
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// annotate

struct AnnotateCli {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string store_dir;
  std::string out;
  std::string annotator = "oracle";  // oracle | remote | mock
  std::string endpoint_url;
  std::size_t pairs = 512;
  std::uint64_t seed = 1;
};

int cmd_annotate(const AnnotateCli& ac) {
  const util::KvConfig kv = load_kv(ac.config_path, ac.overrides);
  if (!fs::exists(ac.store_dir))
    throw explore::MissingArtifactError("replay store not found: " + ac.store_dir);

  const replay::ReplayStore store = replay::ReplayStore::load(ac.store_dir);
  if (store.size() == 0)
    throw explore::MissingArtifactError("replay store is empty: " + ac.store_dir);

  annotate::RemoteAnnotateConfig rcfg;
  rcfg.endpoint.model = kv.get_string("annotate.model", rcfg.endpoint.model);
  rcfg.endpoint.temperature = kv.get_double("annotate.temperature", rcfg.endpoint.temperature);
  rcfg.endpoint.timeout_ms =
      static_cast<int>(kv.get_int("annotate.timeout_ms", rcfg.endpoint.timeout_ms));
  rcfg.endpoint.max_attempts =
      static_cast<int>(kv.get_int("annotate.max_attempts", rcfg.endpoint.max_attempts));
  rcfg.endpoint.backoff_ms =
      static_cast<int>(kv.get_int("annotate.backoff_ms", rcfg.endpoint.backoff_ms));
  rcfg.endpoint.workers = static_cast<int>(kv.get_int("annotate.workers", rcfg.endpoint.workers));
  rcfg.prompt.multi_turn = kv.get_bool("annotate.multi_turn", rcfg.prompt.multi_turn);
  rcfg.prompt.randomize_order =
      kv.get_bool("annotate.randomize_order", rcfg.prompt.randomize_order);
  warn_unconsumed(kv);

  std::vector<annotate::AnnotatedPair> dataset;
  annotate::AnnotationStats stats;
  if (ac.annotator == "oracle") {
    std::tie(dataset, stats) = annotate::oracle_annotate_dataset(store, ac.pairs, ac.seed);
  } else if (ac.annotator == "remote") {
    if (!ac.endpoint_url.empty()) rcfg.endpoint.url = ac.endpoint_url;
    std::tie(dataset, stats) = annotate::remote_annotate_dataset(store, ac.pairs, ac.seed, rcfg);
  } else if (ac.annotator == "mock") {
    annotate::MockVlmServer server;
    annotate::MockBehavior behavior;  // oracle replies, no auth
    server.start(behavior);
    rcfg.endpoint.url = server.url();
    std::tie(dataset, stats) = annotate::remote_annotate_dataset(store, ac.pairs, ac.seed, rcfg);
  } else {
    throw util::ConfigError("unknown annotator: " + ac.annotator +
                            " (expected oracle, remote or mock)");
  }

  if (const fs::path parent = fs::path(ac.out).parent_path(); !parent.empty())
    fs::create_directories(parent);
  annotate::write_dataset_file(ac.out, dataset);

  const json mj{{"format", "annotate-manifest v1"},
                {"status", "completed"},
                {"store", ac.store_dir},
                {"store_hash", hex64(store.content_hash())},
                {"annotator", ac.annotator},
                {"pairs", ac.pairs},
                {"seed", ac.seed},
                {"dataset", ac.out},
                {"dataset_hash", hex64(hash_file(ac.out))},
                {"stats",
                 {{"requested", stats.requested},
                  {"annotated", stats.annotated},
                  {"parse_failures", stats.parse_failures},
                  {"transport_retries", stats.transport_retries},
                  {"http_errors", stats.http_errors},
                  {"first", stats.count_first},
                  {"second", stats.count_second},
                  {"both", stats.count_both},
                  {"none", stats.count_none}}}};
  write_text_file(ac.out + ".manifest.json", mj.dump(2) + "\n");

  std::printf("annotated %zu pairs (%s): first=%zu second=%zu both=%zu none=%zu",
              stats.annotated, ac.annotator.c_str(), stats.count_first,
              stats.count_second, stats.count_both, stats.count_none);
  if (stats.parse_failures) std::printf(" parse_failures=%zu", stats.parse_failures);
  std::printf("\n  dataset: %s\n", ac.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// distill

struct DistillCli {
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> datasets;
  std::string out;
  int generation = 1;
  std::uint64_t seed = 1;
};

int cmd_distill(const DistillCli& dc) {
  const util::KvConfig kv = load_kv(dc.config_path, dc.overrides);
  motif::RewardNetConfig cfg;
  cfg.lr = kv.get_double("distill.lr", cfg.lr);
  cfg.weight_decay = kv.get_double("distill.weight_decay", cfg.weight_decay);
  cfg.batch_size = static_cast<int>(kv.get_int("distill.batch_size", cfg.batch_size));
  cfg.epochs = static_cast<int>(kv.get_int("distill.epochs", cfg.epochs));
  cfg.val_fraction = kv.get_double("distill.val_fraction", cfg.val_fraction);
  warn_unconsumed(kv);

  std::vector<annotate::AnnotatedPair> data;
  std::uint64_t dataset_hash = 0;
  json sources = json::array();
  for (const std::string& path : dc.datasets) {
    if (!fs::exists(path))
      throw explore::MissingArtifactError("annotation dataset not found: " + path);
    const std::vector<annotate::AnnotatedPair> part = annotate::read_dataset_file(path);
    const std::uint64_t h = hash_file(path);
    dataset_hash = dataset_hash == 0 ? h : mix64(dataset_hash, h);
    sources.push_back(json{{"path", path}, {"hash", hex64(h)}, {"pairs", part.size()}});
    data.insert(data.end(), part.begin(), part.end());
  }
  if (data.empty())
    throw explore::MissingArtifactError("no annotated pairs in the given datasets");

  auto [net, report] = motif::train_reward_net(data, cfg, dc.seed);
  if (const fs::path parent = fs::path(dc.out).parent_path(); !parent.empty())
    fs::create_directories(parent);
  net.save(dc.out, report, dc.generation, dataset_hash);

  const json mj{{"format", "distill-manifest v1"},
                {"status", "completed"},
                {"sources", sources},
                {"dataset_hash", hex64(dataset_hash)},
                {"generation", dc.generation},
                {"seed", dc.seed},
                {"pairs", data.size()},
                {"epochs", cfg.epochs},
                {"selected_epoch", report.selected_epoch},
                {"holdout_ranking_accuracy", report.holdout_ranking_accuracy},
                {"net", dc.out},
                {"net_hash", hex64(hash_file(dc.out))}};
  write_text_file(dc.out + ".manifest.json", mj.dump(2) + "\n");

  std::printf(
      "distilled reward net (generation %d) from %zu pairs: "
      "best epoch %d, val loss %.6f, holdout ranking accuracy %.4f\n",
      dc.generation, data.size(), report.selected_epoch,
      report.selected_epoch >= 0
          ? report.val_loss[static_cast<std::size_t>(report.selected_epoch)]
          : 0.0,
      report.holdout_ranking_accuracy);
  std::printf("  net: %s\n", dc.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportCli {
  std::vector<std::string> runs;
  std::vector<std::string> labels;
  std::string out;
};

struct RunInfo {
  std::string dir;
  std::string label;
  std::uint64_t seed = 0;
  json summary;
  util::CsvTable metrics;
  std::optional<util::CsvTable> traces;
};

// SVG + backing CSV pair; the figure carries the hash of its data file.
void write_linked_plot(const std::string& base, const util::PlotSpec& spec,
                       const std::vector<util::Series>& series,
                       const std::vector<util::Marker>& markers = {}) {
  const std::string csv_name = fs::path(base + ".csv").filename().string();
  const std::uint64_t h = hash_file(base + ".csv");
  std::string svg = util::render_line_plot(spec, series, markers);
  svg += "<!-- data: " + csv_name + " fnv64=" + hex64(h) + " -->\n";
  write_text_file(base + ".svg", svg);
}

int cmd_report(const ReportCli& rc) {
  if (!rc.labels.empty() && rc.labels.size() != rc.runs.size())
    throw util::ConfigError("--label count must match --run count");

  std::vector<RunInfo> runs;
  for (std::size_t i = 0; i < rc.runs.size(); ++i) {
    const std::string& dir = rc.runs[i];
    try {
      std::ifstream sj(dir + "/summary.json");
      if (!sj) throw std::runtime_error("no summary.json");
      RunInfo info;
      info.dir = dir;
      info.summary = json::parse(sj);
      info.metrics = util::read_csv(dir + "/metrics.csv");
      if (fs::exists(dir + "/traces.csv")) info.traces = util::read_csv(dir + "/traces.csv");
      info.seed = info.summary.value("seed", 0ull);
      info.label = i < rc.labels.size()
                       ? rc.labels[i]
                       : info.summary.value("phase", std::string("run"));
      runs.push_back(std::move(info));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << dir << ": " << e.what() << "\n";
    }
  }
  if (runs.empty()) throw explore::MissingArtifactError("no usable run directories");

  fs::create_directories(rc.out);

  // Per-label counter table: mean, stderr (absent for n = 1) and median.
  {
    util::CsvWriter table(rc.out + "/interactions.csv",
                          {"label", "runs", "metric", "mean", "stderr", "median"});
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunInfo*>> by_label;
    for (const RunInfo& r : runs) {
      if (!by_label.count(r.label)) order.push_back(r.label);
      by_label[r.label].push_back(&r);
    }
    const char* metrics[] = {"key_pickups", "door_opens",   "chest_opens",
                             "exits_reached", "task_rewards", "episodes"};
    for (const std::string& label : order) {
      const auto& group = by_label[label];
      for (const char* metric : metrics) {
        std::vector<double> vals;
        for (const RunInfo* r : group)
          vals.push_back(r->summary.at("counters").value(metric, 0.0));
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        std::string se;
        if (vals.size() > 1) {
          double ss = 0.0;
          for (double v : vals) ss += (v - mean) * (v - mean);
          const double sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
          se = util::format_double(sd / std::sqrt(static_cast<double>(vals.size())));
        }
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const double median =
            n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        auto row = table.row();
        row.add(label)
            .add(static_cast<std::int64_t>(vals.size()))
            .add(metric)
            .add(mean)
            .add(se)
            .add(median);
        table.write(row);
      }
    }
  }

  // Cumulative-counter learning curves, one series per run.
  const auto curve = [&](const std::string& name, const std::string& column,
                         const std::string& ylabel) {
    util::CsvWriter cw(rc.out + "/" + name + ".csv",
                       {"label", "seed", "end_step", column});
    std::vector<util::Series> series;
    for (const RunInfo& r : runs) {
      util::Series s;
      s.label = r.label + " s" + std::to_string(r.seed);
      for (std::size_t i = 0; i < r.metrics.rows.size(); ++i) {
        const double x = r.metrics.num(i, "end_step");
        const double y = r.metrics.num(i, column);
        s.x.push_back(x);
        s.y.push_back(y);
        auto row = cw.row();
        row.add(s.label).add(static_cast<std::int64_t>(r.seed)).add(x).add(y);
        cw.write(row);
      }
      series.push_back(std::move(s));
    }
    util::PlotSpec spec;
    spec.title = ylabel + " over environment steps";
    spec.xlabel = "environment steps";
    spec.ylabel = ylabel;
    write_linked_plot(rc.out + "/" + name, spec, series);
  };
  curve("curve_keys", "cum_key_pickups", "cumulative key pickups");
  curve("curve_chests", "cum_chest_opens", "cumulative chest opens");

  // Rolling task-success rate (window 10 episodes).
  {
    util::CsvWriter cw(rc.out + "/curve_success.csv",
                       {"label", "seed", "end_step", "success_rate"});
    std::vector<util::Series> series;
    for (const RunInfo& r : runs) {
      util::Series s;
      s.label = r.label + " s" + std::to_string(r.seed);
      std::deque<double> window;
      double hits = 0.0;
      for (std::size_t i = 0; i < r.metrics.rows.size(); ++i) {
        const double success = r.metrics.num(i, "success");
        window.push_back(success);
        hits += success;
        if (window.size() > 10) {
          hits -= window.front();
          window.pop_front();
        }
        const double rate = hits / static_cast<double>(window.size());
        const double x = r.metrics.num(i, "end_step");
        s.x.push_back(x);
        s.y.push_back(rate);
        auto row = cw.row();
        row.add(s.label).add(static_cast<std::int64_t>(r.seed)).add(x).add(rate);
        cw.write(row);
      }
      series.push_back(std::move(s));
    }
    util::PlotSpec spec;
    spec.title = "task success rate (rolling 10 episodes)";
    spec.xlabel = "environment steps";
    spec.ylabel = "success rate";
    write_linked_plot(rc.out + "/curve_success", spec, series);
  }

  // Semantic-reward trajectory of the most eventful traced episode.
  for (const RunInfo& r : runs) {
    if (!r.traces || r.traces->rows.empty()) continue;
    const util::CsvTable& t = *r.traces;
    std::map<long long, int> events_per_episode;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const long long ep = static_cast<long long>(t.num(i, "episode"));
      events_per_episode[ep] += static_cast<int>(t.num(i, "key_pickup")) +
                                static_cast<int>(t.num(i, "door_open")) +
                                static_cast<int>(t.num(i, "chest_open"));
    }
    long long best_ep = events_per_episode.begin()->first;
    int best_events = -1;
    for (const auto& [ep, n] : events_per_episode) {
      if (n >= best_events) {  // ties -> latest (most trained) episode
        best_events = n;
        best_ep = ep;
      }
    }
    util::Series sem, dis;
    sem.label = "semantic";
    dis.label = "disagreement";
    std::vector<util::Marker> markers;
    util::CsvWriter cw(rc.out + "/sem_trace.csv",
                       {"episode", "step", "sem", "dis", "event"});
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (static_cast<long long>(t.num(i, "episode")) != best_ep) continue;
      const double step = t.num(i, "step");
      sem.x.push_back(step);
      sem.y.push_back(t.num(i, "sem"));
      dis.x.push_back(step);
      dis.y.push_back(t.num(i, "dis"));
      std::string event;
      if (t.num(i, "key_pickup") > 0) event = "key";
      if (t.num(i, "door_open") > 0) event = "door";
      if (t.num(i, "chest_open") > 0) event = "chest";
      if (!event.empty())
        markers.push_back(util::Marker{step, event, "#d62728"});
      auto row = cw.row();
      row.add(static_cast<std::int64_t>(best_ep))
          .add(step)
          .add(sem.y.back())
          .add(dis.y.back())
          .add(event);
      cw.write(row);
    }
    util::PlotSpec spec;
    spec.title = r.label + " episode " + std::to_string(best_ep) +
                 ": semantic reward along the trajectory";
    spec.xlabel = "episode step";
    spec.ylabel = "reward";
    write_linked_plot(rc.out + "/sem_trace", spec, {sem, dis}, markers);
    break;  // one representative trajectory plot
  }

  json inputs = json::array();
  for (const RunInfo& r : runs)
    inputs.push_back(json{{"dir", r.dir}, {"label", r.label}, {"seed", r.seed}});
  const json mj{{"format", "report-manifest v1"},
                {"status", "completed"},
                {"runs", inputs},
                {"tables", json::array({"interactions.csv"})},
                {"figures", json::array({"curve_keys.svg", "curve_chests.svg",
                                         "curve_success.svg"})}};
  write_text_file(rc.out + "/report_manifest.json", mj.dump(2) + "\n");

  std::printf("report over %zu runs written to %s\n", runs.size(), rc.out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic exploration pipeline"};
  app.require_subcommand(1);

  RunCli collect_cli, explore_cli, downstream_cli;
  AnnotateCli annotate_cli;
  DistillCli distill_cli;
  ReportCli report_cli;

  CLI::App* c_collect =
      app.add_subcommand("collect", "disagreement-driven bootstrap collection");
  add_run_options(c_collect, collect_cli);

  CLI::App* c_annotate =
      app.add_subcommand("annotate", "label observation pairs from a replay store");
  c_annotate->add_option("--config", annotate_cli.config_path, "key = value config file");
  c_annotate->add_option("--set", annotate_cli.overrides, "config override key=value");
  c_annotate->add_option("--store", annotate_cli.store_dir, "replay store directory")
      ->required();
  c_annotate->add_option("--out", annotate_cli.out, "output dataset (.jsonl)")->required();
  c_annotate->add_option("--pairs", annotate_cli.pairs, "number of pairs to sample");
  c_annotate->add_option("--seed", annotate_cli.seed, "sampling seed");
  c_annotate->add_option("--annotator", annotate_cli.annotator, "oracle | remote | mock");
  c_annotate->add_option("--endpoint-url", annotate_cli.endpoint_url,
                         "chat endpoint for --annotator remote");

  CLI::App* c_distill =
      app.add_subcommand("distill", "train the preference reward net from datasets");
  c_distill->add_option("--config", distill_cli.config_path, "key = value config file");
  c_distill->add_option("--set", distill_cli.overrides, "config override key=value");
  c_distill->add_option("--dataset", distill_cli.datasets, "annotation dataset (repeatable)")
      ->required();
  c_distill->add_option("--out", distill_cli.out, "output net path")->required();
  c_distill->add_option("--generation", distill_cli.generation, "generation tag");
  c_distill->add_option("--seed", distill_cli.seed, "training seed");

  CLI::App* c_explore = app.add_subcommand("explore", "semantic exploration run");
  add_run_options(c_explore, explore_cli);
  c_explore->add_option("--reward-net", explore_cli.reward_net, "distilled reward net")
      ->required();
  c_explore->add_flag("--pure-motif", explore_cli.pure_motif,
                      "semantic reward only (both disagreement weights 0)");

  CLI::App* c_downstream =
      app.add_subcommand("downstream", "task policy training on the task reward");
  add_run_options(c_downstream, downstream_cli);
  c_downstream->add_option("--init-model", downstream_cli.init_model,
                           "pretrained world-model checkpoint");

  CLI::App* c_report = app.add_subcommand("report", "aggregate run directories");
  c_report->add_option("--run", report_cli.runs, "run directory (repeatable)")->required();
  c_report->add_option("--label", report_cli.labels,
                       "label per --run (repeatable, same count)");
  c_report->add_option("--out", report_cli.out, "report output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (app.got_subcommand(c_collect))
      return finish_run(explore::run_phase(resolve_run(collect_cli, explore::Phase::collect)));
    if (app.got_subcommand(c_annotate)) return cmd_annotate(annotate_cli);
    if (app.got_subcommand(c_distill)) return cmd_distill(distill_cli);
    if (app.got_subcommand(c_explore)) {
      const explore::Phase phase =
          explore_cli.pure_motif ? explore::Phase::pure_motif : explore::Phase::explore;
      return finish_run(explore::run_phase(resolve_run(explore_cli, phase)));
    }
    if (app.got_subcommand(c_downstream))
      return finish_run(
          explore::run_phase(resolve_run(downstream_cli, explore::Phase::downstream)));
    if (app.got_subcommand(c_report)) return cmd_report(report_cli);
  } catch (const explore::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const util::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
