#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "semex/explore/actor_critic.hpp"
#include "semex/explore/reward.hpp"
#include "semex/grid/grid.hpp"
#include "semex/motif/motif.hpp"
#include "semex/replay/store.hpp"
#include "semex/wm/ensemble.hpp"
#include "semex/wm/rssm.hpp"

namespace semex::explore {

// The pipeline's run modes:
//   collect      - disagreement-driven bootstrap collection (no reward net)
//   explore      - full semantic exploration with go/explore weight switching
//   pure_motif   - semantic reward only, both disagreement weights forced to 0
//   downstream   - task-reward policy, optionally from a pretrained model;
//                  structurally isolated from the semantic reward net
enum class Phase { collect, explore, pure_motif, downstream };

std::string phase_name(Phase p);
Phase phase_from_name(const std::string& s);

// Default weight preset for a phase; explore/pure_motif depend on the
// environment's tuning.
RewardWeights default_weights(Phase p, grid::EnvKind env);

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunnerConfig {
  Phase phase = Phase::collect;
  grid::EnvKind env = grid::EnvKind::key_chest_lite;
  std::uint64_t seed = 1;
  std::int64_t total_steps = 10000;

  int train_every = 32;     // environment steps between optimization cycles
  int batch_size = 8;       // sequences per world-model batch
  int seq_len = 8;
  int imagine_starts = 12;  // imagination rollouts per policy update
  std::int64_t trace_every = 25;  // per-step trace for every n-th episode; 0 disables
  int success_window = 10;  // episodes in the rolling task-success rate

  wm::RssmConfig model;       // obs/num_actions are overwritten from env
  wm::EnsembleConfig ensemble;
  ActorCriticConfig policy;
  std::optional<RewardWeights> weights;  // defaults to default_weights(phase, env)

  std::string out_dir;             // required
  std::string reward_net_path;     // required for explore/pure_motif
  std::string init_model_path;     // optional pretrained checkpoint (downstream)
  bool save_store = true;
  bool save_checkpoint = true;
};

struct RunSummary {
  Phase phase = Phase::collect;
  grid::EnvKind env = grid::EnvKind::key_chest_lite;
  std::uint64_t seed = 0;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  std::int64_t train_steps = 0;
  grid::EventCounters counters;
  double final_quantile = 0.0;
  bool quantile_initialized = false;
  double success_rate_window = 0.0;         // over the last success_window episodes
  std::int64_t first_task_reward_step = -1;  // env step of the first task reward
  std::int64_t half_success_step = -1;       // env step where the window first hit 0.5
  bool diverged = false;
  std::string out_dir;
};

// Runs one phase to completion: alternates environment stepping with world
// model / ensemble / policy updates, writes metrics.csv + traces.csv +
// summary.json + manifest.json (the manifest also on failure), and saves the
// replay store and a checkpoint. Single-threaded and deterministic in cfg.
RunSummary run_phase(const RunnerConfig& cfg);

// manifest.json helper shared by the command-line layer: resolved config as
// JSON, plus input artifact hashes.
std::string manifest_json(const RunnerConfig& cfg, const std::string& status,
                          const std::string& error);

}  // namespace semex::explore
