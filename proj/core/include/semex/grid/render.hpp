#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "semex/grid/grid.hpp"

namespace semex::grid {

// Full map as ascii art, '@' over the agent's cell. One line per row,
// trailing newline.
std::string render_ascii(const GridState& s);

// The 5x5 egocentric window as 5 lines, '@' at the center.
std::string render_window(const Observation& o);

// Single-line lossless state serialization / its inverse. Format:
//   grid v1 kind=<name> w=<w> h=<h> ax=<x> ay=<y> key=<0|1> steps=<n>
//   done=<0|1> tiles=<one char per cell, row-major>
std::string serialize_state(const GridState& s);
GridState parse_state(const std::string& line);

// Stable fingerprint of the world (tiles + agent + key flag).
std::uint64_t state_hash(const GridState& s);

struct EpisodeLogRecord {
  std::uint64_t state_hash = 0;  // world hash after the step
  Action action = Action::up;
  double reward = 0.0;
  EventDeltas deltas;
};

// Line-delimited episode log: a header line with the serialized initial
// layout, then one record per step.
void write_episode_log(std::ostream& out, const GridState& initial,
                       const std::vector<EpisodeLogRecord>& records);

struct EpisodeLog {
  GridState initial;
  std::vector<EpisodeLogRecord> records;
};

EpisodeLog read_episode_log(std::istream& in);

}  // namespace semex::grid
