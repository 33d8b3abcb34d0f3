#include "semex/explore/runner.hpp"

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "semex/util/csv.hpp"
#include "semex/util/hash.hpp"

namespace semex::explore {

namespace fs = std::filesystem;
using nlohmann::json;

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::collect: return "collect";
    case Phase::explore: return "explore";
    case Phase::pure_motif: return "pure_motif";
    case Phase::downstream: return "downstream";
  }
  throw std::logic_error("bad phase");
}

Phase phase_from_name(const std::string& s) {
  if (s == "collect") return Phase::collect;
  if (s == "explore") return Phase::explore;
  if (s == "pure_motif") return Phase::pure_motif;
  if (s == "downstream") return Phase::downstream;
  throw std::invalid_argument("unknown phase: " + s);
}

RewardWeights default_weights(Phase p, grid::EnvKind env) {
  switch (p) {
    case Phase::collect:
      return RewardWeights::disagreement_only();
    case Phase::explore:
      return env == grid::EnvKind::key_room_lite ? RewardWeights::semantic_key_room()
                                                 : RewardWeights::semantic_key_chest();
    case Phase::pure_motif:
      return RewardWeights::without_disagreement(default_weights(Phase::explore, env));
    case Phase::downstream:
      return RewardWeights::task_only();
  }
  throw std::logic_error("bad phase");
}

namespace {

json weights_to_json(const RewardWeights& w) {
  return json{{"chi", w.chi},
              {"alpha_go", w.alpha_go},
              {"alpha_explore", w.alpha_explore},
              {"beta_go", w.beta_go},
              {"beta_explore", w.beta_explore},
              {"quantile_k", w.quantile_k}};
}

json counters_to_json(const grid::EventCounters& c) {
  return json{{"key_pickups", c.key_pickups},
              {"door_opens", c.door_opens},
              {"chest_opens", c.chest_opens},
              {"exits_reached", c.exits_reached},
              {"task_rewards", c.task_rewards},
              {"at_door_with_key", c.at_door_with_key},
              {"at_chest_with_key", c.at_chest_with_key},
              {"env_steps", c.env_steps},
              {"episodes", c.episodes}};
}

std::string file_hash_hex(const std::string& path) {
  if (path.empty() || !fs::exists(path)) return "";
  return hex64(hash_file(path));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write: " + path);
}

// Running sums for one episode's metrics row.
struct EpisodeAccum {
  int length = 0;
  double task_return = 0.0;
  int task_events = 0;
  int key_pickups = 0, door_opens = 0, chest_opens = 0, exits = 0;
  double sem_sum = 0.0, dis_sum = 0.0, beta_sum = 0.0;
  int explore_steps = 0;
  int train_cycles = 0;
  double wm_loss = 0.0, wm_recon = 0.0, wm_kl = 0.0;
  double actor_loss = 0.0, critic_loss = 0.0, entropy = 0.0;
  double imag_explore = 0.0, imag_beta = 0.0;
};

double mean0(double sum, int n) { return n > 0 ? sum / n : 0.0; }

const std::vector<std::string> kMetricColumns = {
    "episode",          "end_step",       "length",          "task_return",
    "success",          "key_pickups",    "door_opens",      "chest_opens",
    "exits",            "cum_key_pickups", "cum_door_opens", "cum_chest_opens",
    "cum_exits",        "mean_sem",       "mean_dis",        "explore_frac",
    "mean_beta",        "quantile",       "imag_explore_frac", "imag_mean_beta",
    "wm_loss",          "wm_recon",       "wm_kl",           "actor_loss",
    "critic_loss",      "entropy",        "train_cycles"};

const std::vector<std::string> kTraceColumns = {
    "episode", "step",       "action",    "reward",     "done", "sem",
    "dis",     "explore",    "key_pickup", "door_open", "chest_open", "exit_reached"};

}  // namespace

std::string manifest_json(const RunnerConfig& cfg, const std::string& status,
                          const std::string& error) {
  const RewardWeights w = cfg.weights ? *cfg.weights : default_weights(cfg.phase, cfg.env);
  json j{
      {"format", "run-manifest v1"},
      {"status", status},
      {"run",
       {{"phase", phase_name(cfg.phase)},
        {"env", grid::env_kind_name(cfg.env)},
        {"seed", cfg.seed},
        {"total_steps", cfg.total_steps},
        {"train_every", cfg.train_every},
        {"batch_size", cfg.batch_size},
        {"seq_len", cfg.seq_len},
        {"imagine_starts", cfg.imagine_starts},
        {"trace_every", cfg.trace_every},
        {"success_window", cfg.success_window},
        {"save_store", cfg.save_store},
        {"save_checkpoint", cfg.save_checkpoint}}},
      {"model",
       {{"cells", cfg.model.obs.cells},
        {"types", cfg.model.obs.types},
        {"num_actions", cfg.model.num_actions},
        {"det_dim", cfg.model.det_dim},
        {"stoch_dim", cfg.model.stoch_dim},
        {"hidden", cfg.model.hidden},
        {"free_bits", cfg.model.free_bits},
        {"kl_scale", cfg.model.kl_scale},
        {"recon_scale", cfg.model.recon_scale},
        {"reward_scale", cfg.model.reward_scale},
        {"cont_scale", cfg.model.cont_scale},
        {"sem_scale", cfg.model.sem_scale},
        {"lr", cfg.model.lr}}},
      {"ensemble",
       {{"members", cfg.ensemble.members},
        {"hidden", cfg.ensemble.hidden},
        {"lr", cfg.ensemble.lr}}},
      {"policy",
       {{"hidden", cfg.policy.hidden},
        {"horizon", cfg.policy.horizon},
        {"discount", cfg.policy.discount},
        {"lambda", cfg.policy.lambda},
        {"entropy_coef", cfg.policy.entropy_coef},
        {"actor_lr", cfg.policy.actor_lr},
        {"critic_lr", cfg.policy.critic_lr}}},
      {"weights", weights_to_json(w)},
      {"inputs",
       {{"reward_net", cfg.reward_net_path},
        {"reward_net_hash", file_hash_hex(cfg.reward_net_path)},
        {"init_model", cfg.init_model_path},
        {"init_model_hash", file_hash_hex(cfg.init_model_path)}}},
      {"artifacts",
       {{"metrics", "metrics.csv"},
        {"traces", "traces.csv"},
        {"store", "store"},
        {"checkpoint", "checkpoint.semex"},
        {"summary", "summary.json"}}},
  };
  if (!error.empty()) j["error"] = error;
  return j.dump(2) + "\n";
}

RunSummary run_phase(const RunnerConfig& cfg_in) {
  RunnerConfig cfg = cfg_in;
  if (cfg.out_dir.empty()) throw std::invalid_argument("out_dir is required");
  if (cfg.total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
  if (cfg.train_every <= 0 || cfg.batch_size <= 0 || cfg.seq_len <= 0 ||
      cfg.imagine_starts <= 0 || cfg.success_window <= 0)
    throw std::invalid_argument("training cadence values must be positive");

  const bool use_net = cfg.phase == Phase::explore || cfg.phase == Phase::pure_motif;
  const bool use_ensemble = cfg.phase != Phase::downstream;

  if (use_net) {
    if (cfg.reward_net_path.empty())
      throw MissingArtifactError(phase_name(cfg.phase) +
                                 " needs a distilled reward net (reward_net_path)");
    if (!fs::exists(cfg.reward_net_path))
      throw MissingArtifactError("reward net not found: " + cfg.reward_net_path);
  }
  // Task-phase isolation: the downstream phase must not even see the net.
  if (cfg.phase == Phase::downstream && !cfg.reward_net_path.empty())
    throw std::invalid_argument("the downstream phase never reads the semantic reward net");
  if (cfg.phase != Phase::downstream && !cfg.init_model_path.empty())
    throw std::invalid_argument("init_model_path only applies to the downstream phase");
  if (!cfg.init_model_path.empty() && !fs::exists(cfg.init_model_path))
    throw MissingArtifactError("pretrained checkpoint not found: " + cfg.init_model_path);

  grid::EnvConfig env_cfg;
  env_cfg.kind = cfg.env;
  cfg.model.obs = wm::ObsSpec{};
  if (cfg.model.obs.encoded_dim() != grid::kObsDim)
    throw std::logic_error("observation spec does not match the grid encoding");
  cfg.model.num_actions = env_cfg.num_actions();

  RewardWeights weights = cfg.weights ? *cfg.weights : default_weights(cfg.phase, cfg.env);
  weights.validate();
  if (cfg.phase == Phase::pure_motif &&
      (weights.beta_go != 0.0 || weights.beta_explore != 0.0))
    throw std::invalid_argument("pure_motif forces both disagreement weights to 0");
  if (cfg.phase == Phase::downstream &&
      (weights.chi != 1.0 || weights.alpha_go != 0.0 || weights.alpha_explore != 0.0 ||
       weights.beta_go != 0.0 || weights.beta_explore != 0.0))
    throw std::invalid_argument("downstream uses the task reward alone");
  cfg.weights = weights;

  Rng rng_root(cfg.seed);
  Rng rng_model_init = rng_root.split(1);
  Rng rng_ens_init = rng_root.split(2);
  Rng rng_policy_init = rng_root.split(3);
  Rng rng_act = rng_root.split(4);
  Rng rng_train = rng_root.split(5);

  wm::WorldModel model(cfg.model, rng_model_init);
  if (!cfg.init_model_path.empty()) {
    nn::CheckpointReader reader(cfg.init_model_path);
    model = wm::WorldModel::from_checkpoint(reader, "model/");
    if (model.config().obs.encoded_dim() != grid::kObsDim ||
        model.config().num_actions != cfg.model.num_actions)
      throw MissingArtifactError("pretrained model shape does not match the environment");
    cfg.model = model.config();
  }
  if (!use_net) {
    model.set_sem_scale(0.0);
    cfg.model.sem_scale = 0.0;
  }

  fs::create_directories(cfg.out_dir);
  const std::string manifest_path = cfg.out_dir + "/manifest.json";
  write_text_file(manifest_path, manifest_json(cfg, "running", ""));

  RunSummary summary;
  summary.phase = cfg.phase;
  summary.env = cfg.env;
  summary.seed = cfg.seed;
  summary.out_dir = cfg.out_dir;

  try {
    std::optional<motif::RewardNet> net;
    if (use_net) net = motif::RewardNet::load(cfg.reward_net_path);

    std::optional<wm::Ensemble> ens;
    if (use_ensemble) ens.emplace(cfg.model, cfg.ensemble, rng_ens_init);
    ActorCritic ac(cfg.model, cfg.policy, rng_policy_init);

    QuantileEma quant(weights.quantile_k, 0.99);
    RangeNormalizer norm_task, norm_sem, norm_dis;

    grid::GridEnv env(env_cfg, cfg.seed);
    replay::ReplayStore store;
    bool have_sequences = false;  // any stored episode long enough to sample

    util::CsvWriter metrics(cfg.out_dir + "/metrics.csv", kMetricColumns);
    std::optional<util::CsvWriter> traces;
    if (cfg.trace_every > 0) traces.emplace(cfg.out_dir + "/traces.csv", kTraceColumns);

    const int obs_dim = cfg.model.obs.encoded_dim();
    std::vector<double> enc(static_cast<std::size_t>(obs_dim));

    replay::Episode ep;
    wm::State state;
    bool ep_open = false;
    std::int64_t episode_index = 0;  // finished-episode counter

    const auto begin_episode = [&]() {
      ep = replay::Episode{};
      ep.env = cfg.env;
      ep.policy = "actor";
      ep.phase = phase_name(cfg.phase);
      ep.init_obs = env.reset();
      ep.seed = env.last_layout_seed();
      ep.init_obs.encode_into(enc.data());
      state = model.observe(model.initial_state(), -1, enc, rng_act);
      ep_open = true;
    };

    EpisodeAccum acc;
    std::deque<int> window;
    int window_hits = 0;

    const auto finalize_episode = [&](std::int64_t end_step) {
      const int success = acc.task_events > 0 ? 1 : 0;
      window.push_back(success);
      window_hits += success;
      if (static_cast<int>(window.size()) > cfg.success_window) {
        window_hits -= window.front();
        window.pop_front();
      }
      if (static_cast<int>(window.size()) == cfg.success_window &&
          summary.half_success_step < 0 &&
          2 * window_hits >= cfg.success_window)
        summary.half_success_step = end_step;

      const grid::EventCounters& c = env.counters();
      auto row = metrics.row();
      row.add(episode_index)
          .add(end_step)
          .add(acc.length)
          .add(acc.task_return)
          .add(success)
          .add(acc.key_pickups)
          .add(acc.door_opens)
          .add(acc.chest_opens)
          .add(acc.exits)
          .add(c.key_pickups)
          .add(c.door_opens)
          .add(c.chest_opens)
          .add(c.exits_reached)
          .add(mean0(acc.sem_sum, acc.length))
          .add(mean0(acc.dis_sum, acc.length))
          .add(mean0(acc.explore_steps, acc.length))
          .add(mean0(acc.beta_sum, acc.length))
          .add(quant.initialized() ? quant.value() : 0.0)
          .add(mean0(acc.imag_explore, acc.train_cycles))
          .add(mean0(acc.imag_beta, acc.train_cycles))
          .add(mean0(acc.wm_loss, acc.train_cycles))
          .add(mean0(acc.wm_recon, acc.train_cycles))
          .add(mean0(acc.wm_kl, acc.train_cycles))
          .add(mean0(acc.actor_loss, acc.train_cycles))
          .add(mean0(acc.critic_loss, acc.train_cycles))
          .add(mean0(acc.entropy, acc.train_cycles))
          .add(acc.train_cycles);
      metrics.write(row);
      acc = EpisodeAccum{};
      ++episode_index;
      ep_open = false;
    };

    // One optimization cycle: world model, ensemble, then policy-in-imagination.
    const auto train_cycle = [&]() {
      if (!have_sequences) return;
      const auto refs = store.sample_sequences(static_cast<std::size_t>(cfg.batch_size),
                                               cfg.seq_len, rng_train);
      wm::SequenceBatch sb;
      sb.batch = cfg.batch_size;
      sb.len = cfg.seq_len;
      sb.obs_dim = obs_dim;
      const std::size_t n = sb.steps();
      sb.actions.reserve(n);
      sb.obs.resize(n * static_cast<std::size_t>(obs_dim));
      sb.reward.reserve(n);
      sb.cont.reserve(n);
      sb.sem.reserve(n);
      std::size_t k = 0;
      for (const replay::SequenceRef& ref : refs) {
        const replay::Episode& e = store.episode(ref.episode);
        for (int t = 0; t < ref.length; ++t, ++k) {
          const replay::Step& st = e.steps[static_cast<std::size_t>(ref.start + t)];
          sb.actions.push_back(static_cast<int>(st.action));
          st.next_obs.encode_into(sb.obs.data() + k * static_cast<std::size_t>(obs_dim));
          sb.reward.push_back(st.reward);
          sb.cont.push_back(st.done ? 0.0 : 1.0);
          sb.sem.push_back(net ? net->score(st.next_obs) : 0.0);
        }
      }

      const wm::TrainOutput out = model.train_step(sb, rng_train);
      ++summary.train_steps;
      if (!out.losses.applied || !std::isfinite(out.losses.total)) {
        summary.diverged = true;
        return;
      }
      if (net) quant.update(out.sem_pred);

      if (ens) {
        std::vector<wm::EnsembleSample> samples;
        samples.reserve(static_cast<std::size_t>(cfg.batch_size) *
                        static_cast<std::size_t>(cfg.seq_len - 1));
        const int stoch = cfg.model.stoch_dim;
        for (int b = 0; b < cfg.batch_size; ++b) {
          for (int t = 0; t + 1 < cfg.seq_len; ++t) {
            const std::size_t i = static_cast<std::size_t>(b) * cfg.seq_len + t;
            samples.push_back(wm::EnsembleSample{
                &out.states[i], sb.actions[i + 1],
                out.post_mean.data() + (i + 1) * static_cast<std::size_t>(stoch)});
          }
        }
        if (!samples.empty()) ens->train_step(samples);
      }

      std::vector<const wm::State*> starts;
      starts.reserve(static_cast<std::size_t>(cfg.imagine_starts));
      for (int i = 0; i < cfg.imagine_starts; ++i)
        starts.push_back(&out.states[rng_train.uniform_index(out.states.size())]);
      const double gate = quant.initialized()
                              ? quant.value()
                              : std::numeric_limits<double>::infinity();
      const ImaginationStats st = ac.update(model, ens ? &*ens : nullptr, starts, weights,
                                            gate, norm_task, norm_sem, norm_dis, rng_train);
      if (!st.applied || !std::isfinite(st.actor_loss) || !std::isfinite(st.critic_loss)) {
        summary.diverged = true;
        return;
      }
      ++acc.train_cycles;
      acc.wm_loss += out.losses.total;
      acc.wm_recon += out.losses.recon;
      acc.wm_kl += out.losses.kl;
      acc.actor_loss += st.actor_loss;
      acc.critic_loss += st.critic_loss;
      acc.entropy += st.entropy;
      acc.imag_explore += st.explore_frac;
      acc.imag_beta += st.mean_beta;
    };

    if (cfg.total_steps > 0) begin_episode();
    for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
      const bool tracing =
          traces && cfg.trace_every > 0 && episode_index % cfg.trace_every == 0;

      const double sem_s = model.predict_sem(state);
      const int a = ac.sample_action(state, rng_act);
      const double dis_s = ens ? ens->disagreement(state, a) : 0.0;
      const bool explore_branch = quant.initialized() && sem_s >= quant.value();
      const double beta_used = explore_branch ? weights.beta_explore : weights.beta_go;

      const grid::StepResult res = env.step(static_cast<grid::Action>(a));
      replay::Step st;
      st.action = static_cast<grid::Action>(a);
      st.reward = res.reward;
      st.done = res.done;
      st.deltas = res.deltas;
      st.next_obs = res.obs;
      ep.steps.push_back(st);

      res.obs.encode_into(enc.data());
      state = model.observe(state, a, enc, rng_act);

      ++acc.length;
      acc.task_return += res.reward;
      acc.task_events += res.deltas.task_reward;
      acc.key_pickups += res.deltas.key_pickup;
      acc.door_opens += res.deltas.door_open;
      acc.chest_opens += res.deltas.chest_open;
      acc.exits += res.deltas.exit_reached;
      acc.sem_sum += sem_s;
      acc.dis_sum += dis_s;
      acc.explore_steps += explore_branch ? 1 : 0;
      acc.beta_sum += beta_used;
      if (res.deltas.task_reward > 0 && summary.first_task_reward_step < 0)
        summary.first_task_reward_step = step + 1;

      if (tracing) {
        auto row = traces->row();
        row.add(episode_index)
            .add(acc.length - 1)
            .add(grid::action_name(static_cast<grid::Action>(a)))
            .add(res.reward)
            .add(res.done ? 1 : 0)
            .add(sem_s)
            .add(dis_s)
            .add(explore_branch ? 1 : 0)
            .add(res.deltas.key_pickup)
            .add(res.deltas.door_open)
            .add(res.deltas.chest_open)
            .add(res.deltas.exit_reached);
        traces->write(row);
      }

      if (res.done) {
        if (ep.length() >= cfg.seq_len) have_sequences = true;
        store.add(std::move(ep));
        finalize_episode(step + 1);
        if (step + 1 < cfg.total_steps) begin_episode();
      }

      if ((step + 1) % cfg.train_every == 0) train_cycle();
      if (summary.diverged) break;
    }

    if (ep_open && !ep.steps.empty()) {
      if (ep.length() >= cfg.seq_len) have_sequences = true;
      store.add(std::move(ep));
      finalize_episode(env.counters().env_steps);
    }

    summary.env_steps = env.counters().env_steps;
    summary.episodes = episode_index;
    summary.counters = env.counters();
    summary.final_quantile = quant.initialized() ? quant.value() : 0.0;
    summary.quantile_initialized = quant.initialized();
    summary.success_rate_window =
        window.empty() ? 0.0
                       : static_cast<double>(window_hits) / static_cast<double>(window.size());

    if (cfg.save_store) store.save(cfg.out_dir + "/store");
    if (cfg.save_checkpoint) {
      nn::CheckpointWriter w;
      model.add_to_checkpoint(w, "model/");
      if (ens) ens->add_to_checkpoint(w, "ens/");
      ac.add_to_checkpoint(w, "policy/");
      const json run_meta{{"phase", phase_name(cfg.phase)},
                          {"env", grid::env_kind_name(cfg.env)},
                          {"seed", cfg.seed},
                          {"env_steps", summary.env_steps},
                          {"episodes", summary.episodes},
                          {"train_steps", summary.train_steps},
                          {"quantile", quant.serialize()},
                          {"diverged", summary.diverged}};
      w.add_text("run/meta", run_meta.dump());
      w.write(cfg.out_dir + "/checkpoint.semex");
    }

    const json sj{{"phase", phase_name(cfg.phase)},
                  {"env", grid::env_kind_name(cfg.env)},
                  {"seed", cfg.seed},
                  {"env_steps", summary.env_steps},
                  {"episodes", summary.episodes},
                  {"train_steps", summary.train_steps},
                  {"counters", counters_to_json(summary.counters)},
                  {"final_quantile", summary.final_quantile},
                  {"quantile_initialized", summary.quantile_initialized},
                  {"success_rate_window", summary.success_rate_window},
                  {"first_task_reward_step", summary.first_task_reward_step},
                  {"half_success_step", summary.half_success_step},
                  {"diverged", summary.diverged}};
    write_text_file(cfg.out_dir + "/summary.json", sj.dump(2) + "\n");
    write_text_file(manifest_path,
                    manifest_json(cfg, summary.diverged ? "diverged" : "completed", ""));
  } catch (const std::exception& e) {
    write_text_file(manifest_path, manifest_json(cfg, "failed", e.what()));
    throw;
  }
  return summary;
}

}  // namespace semex::explore
