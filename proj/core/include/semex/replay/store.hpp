#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semex/grid/grid.hpp"
#include "semex/rng.hpp"

namespace semex::replay {

struct Step {
  grid::Action action = grid::Action::up;
  double reward = 0.0;
  bool done = false;
  grid::EventDeltas deltas;
  grid::Observation next_obs;
};

struct Episode {
  std::int64_t id = -1;  // assigned by the store
  grid::EnvKind env = grid::EnvKind::key_room_lite;
  std::uint64_t seed = 0;  // layout seed
  std::string policy;      // producing policy tag, no whitespace
  std::string phase;       // producing phase tag, no whitespace
  grid::Observation init_obs;
  std::vector<Step> steps;

  int length() const { return static_cast<int>(steps.size()); }
};

// Reference to one observation inside the store: index 0 is the episode's
// initial observation, index i > 0 is steps[i-1].next_obs.
struct ObsRef {
  std::int64_t episode = 0;
  int index = 0;
  bool operator==(const ObsRef&) const = default;
};

// Contiguous step window [start, start+length) of one episode.
struct SequenceRef {
  std::int64_t episode = 0;
  int start = 0;
  int length = 0;
};

// In-memory episode buffer with deterministic sampling and a line-based
// on-disk format (episodes.txt + index.txt); see docs/formats.md.
class ReplayStore {
 public:
  std::int64_t add(Episode e);  // returns the assigned id

  const std::vector<Episode>& episodes() const { return episodes_; }
  const Episode& episode(std::int64_t id) const;
  std::size_t size() const { return episodes_.size(); }
  std::size_t num_steps() const;
  std::size_t num_observations() const;  // num_steps + episode count

  const grid::Observation& obs(const ObsRef& r) const;

  ObsRef sample_obs(Rng& rng) const;
  // Pairs of distinct observation references, uniform over all ordered pairs
  // with replacement across pairs.
  std::vector<std::pair<ObsRef, ObsRef>> sample_pairs(std::size_t n, Rng& rng) const;
  // Uniform over all (episode, start) with at least `length` steps remaining.
  std::vector<SequenceRef> sample_sequences(std::size_t batch, int length, Rng& rng) const;

  void save(const std::string& dir) const;
  static ReplayStore load(const std::string& dir);

  // Hash over the serialized episode bytes; stable across save/load.
  std::uint64_t content_hash() const;

 private:
  std::vector<Episode> episodes_;
};

std::string serialize_episode(const Episode& e);
Episode parse_episode(const std::string& block);

}  // namespace semex::replay
