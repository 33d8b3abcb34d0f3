#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semex/rng.hpp"

namespace semex::grid {

// Tile ids are stable across versions: they appear in serialized layouts,
// replay stores and the one-hot observation encoding.
enum class Tile : std::uint8_t {
  wall = 0,
  floor = 1,
  key = 2,
  locked_door = 3,
  open_door = 4,
  chest_closed = 5,
  chest_open = 6,
  exit = 7,
};
constexpr int kNumTileTypes = 8;

enum class Action : std::uint8_t { up = 0, right = 1, down = 2, left = 3, open = 4 };

char tile_char(Tile t);
Tile tile_from_char(char c);
std::string action_name(Action a);
Action action_from_name(const std::string& s);

enum class EnvKind { key_room_lite, key_chest_lite };

std::string env_kind_name(EnvKind k);
EnvKind env_kind_from_name(const std::string& s);

struct EnvConfig {
  EnvKind kind = EnvKind::key_room_lite;
  int episode_limit = 0;  // 0 picks the per-kind default
  int max_layout_retries = 100;

  int resolved_episode_limit() const;
  int num_actions() const { return kind == EnvKind::key_chest_lite ? 5 : 4; }
};

// Full simulator state. Everything needed to continue an episode.
struct GridState {
  EnvKind kind = EnvKind::key_room_lite;
  int width = 0, height = 0;
  std::vector<Tile> tiles;  // row-major
  int agent_x = 0, agent_y = 0;
  bool has_key = false;
  int step_count = 0;
  bool done = false;

  Tile at(int x, int y) const;          // out-of-bounds reads as wall
  void set(int x, int y, Tile t);
  bool same_world(const GridState& o) const;  // tiles + agent + key flag
};

// Egocentric 5x5 window (row-major, top-left first, center = tile under the
// agent) plus the key possession flag.
constexpr int kWindow = 5;
constexpr int kWindowCells = kWindow * kWindow;
constexpr int kObsDim = kWindowCells * kNumTileTypes + 1;

struct Observation {
  std::array<Tile, kWindowCells> window{};
  bool has_key = false;

  bool operator==(const Observation&) const = default;

  // One-hot cells then key flag; size kObsDim.
  std::vector<double> encode() const;
  void encode_into(double* out) const;
};

Observation observe(const GridState& s);

struct EventDeltas {
  int key_pickup = 0;
  int door_open = 0;
  int chest_open = 0;
  int exit_reached = 0;
  int task_reward = 0;
  int at_door_with_key = 0;
  int at_chest_with_key = 0;
  int no_change = 0;
};

struct EventCounters {
  std::int64_t key_pickups = 0;
  std::int64_t door_opens = 0;
  std::int64_t chest_opens = 0;
  std::int64_t exits_reached = 0;
  std::int64_t task_rewards = 0;
  std::int64_t at_door_with_key = 0;
  std::int64_t at_chest_with_key = 0;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;

  void add(const EventDeltas& d);
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  EventDeltas deltas;
};

// Builds a solvable random layout. Throws std::runtime_error if
// max_layout_retries layouts in a row fail the reachability check.
GridState make_layout(const EnvConfig& cfg, std::uint64_t seed);

// Advances the state in place. Precondition: !state.done (throws
// std::logic_error otherwise). Reward is +1 on task completion, -0.01 if the
// action left the world bit-identical, 0 otherwise.
StepResult apply_step(GridState& state, Action a, const EnvConfig& cfg);

// Reachability check used by make_layout; exposed for tests.
bool layout_solvable(const GridState& s);

// Convenience wrapper owning config, state, cumulative counters and the
// per-episode seed schedule.
class GridEnv {
 public:
  GridEnv(const EnvConfig& cfg, std::uint64_t run_seed);

  Observation reset();                     // next episode in the seed schedule
  Observation reset(std::uint64_t seed);   // explicit layout seed
  StepResult step(Action a);

  const EnvConfig& config() const { return cfg_; }
  const GridState& state() const { return state_; }
  const EventCounters& counters() const { return counters_; }
  int num_actions() const { return cfg_.num_actions(); }
  bool episode_done() const { return state_.done; }

  // Position in the derived per-episode seed schedule; lets a resumed run
  // continue the exact layout sequence of the original.
  std::int64_t next_episode_index() const { return episode_index_; }
  void set_next_episode_index(std::int64_t i) { episode_index_ = i; }
  std::uint64_t last_layout_seed() const { return last_seed_; }

 private:
  EnvConfig cfg_;
  std::uint64_t run_seed_;
  std::uint64_t last_seed_ = 0;
  std::int64_t episode_index_ = 0;
  GridState state_;
  EventCounters counters_;
};

}  // namespace semex::grid
