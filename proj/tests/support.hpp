#pragma once

// Shared test helpers: the finite-difference gradient checker every gradient
// test is built on, synthetic observations with known interest levels, and
// scratch-directory plumbing.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semex/grid/grid.hpp"
#include "semex/rng.hpp"

namespace semex::test {

struct FdResult {
  double max_rel_err = 0.0;
  std::size_t worst = 0;    // parameter index of the worst entry
  std::size_t checked = 0;
};

// Central finite differences against an analytic gradient. f() must
// re-evaluate the scalar objective from the current contents of `params`;
// every parameter is perturbed in place and restored. Differences below the
// truncation-noise floor are ignored rather than divided into a meaningless
// ratio.
inline FdResult fd_check(std::span<double> params, std::span<const double> analytic,
                         const std::function<double()>& f, double eps = 3e-5) {
  FdResult r;
  r.checked = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + eps;
    const double up = f();
    params[i] = keep - eps;
    const double dn = f();
    params[i] = keep;
    const double fd = (up - dn) / (2.0 * eps);
    const double diff = std::abs(fd - analytic[i]);
    if (diff < 5e-8) continue;
    const double rel = diff / std::max(std::abs(fd) + std::abs(analytic[i]), 1e-12);
    if (rel > r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst = i;
    }
  }
  return r;
}

// Fresh scratch directory under the system temp root; wiped if it already
// exists so reruns start clean.
inline std::filesystem::path fresh_dir(const std::string& tag) {
  const std::filesystem::path p =
      std::filesystem::temp_directory_path() / ("semex-test-" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// --- synthetic observations -------------------------------------------------
//
// Builders for the four interest levels used by the rule annotator:
//   0  nothing of note, no key held
//   1  key/door/chest visible, no key held
//   2  key held, nothing adjacent
//   3  key held, door or chest in the 4-neighborhood of the agent
// Irrelevant cells are filled with a random floor/wall texture so a learner
// cannot latch onto constant backgrounds.

inline grid::Observation obs_background(Rng& rng) {
  grid::Observation o;
  for (auto& t : o.window)
    t = rng.uniform() < 0.25 ? grid::Tile::wall : grid::Tile::floor;
  o.window[12] = grid::Tile::floor;  // cell under the agent
  o.has_key = false;
  return o;
}

// Window index of one of the four cells adjacent to the center.
inline int adjacent_cell(Rng& rng) {
  static const int cells[4] = {7, 11, 13, 17};
  return cells[rng.uniform_index(4)];
}

// A non-adjacent, non-center cell.
inline int far_cell(Rng& rng) {
  for (;;) {
    const int c = static_cast<int>(rng.uniform_index(grid::kWindowCells));
    if (c == 12 || c == 7 || c == 11 || c == 13 || c == 17) continue;
    return c;
  }
}

inline grid::Observation obs_level0(Rng& rng) { return obs_background(rng); }

inline grid::Observation obs_level1(Rng& rng) {
  grid::Observation o = obs_background(rng);
  static const grid::Tile items[3] = {grid::Tile::key, grid::Tile::locked_door,
                                      grid::Tile::chest_closed};
  o.window[static_cast<std::size_t>(far_cell(rng))] = items[rng.uniform_index(3)];
  return o;
}

inline grid::Observation obs_level2(Rng& rng) {
  grid::Observation o = obs_background(rng);
  // keep the 4-neighborhood clear of doors and chests
  o.window[7] = o.window[11] = o.window[13] = o.window[17] = grid::Tile::floor;
  o.has_key = true;
  return o;
}

inline grid::Observation obs_level3(Rng& rng) {
  grid::Observation o = obs_background(rng);
  o.has_key = true;
  o.window[static_cast<std::size_t>(adjacent_cell(rng))] =
      rng.uniform() < 0.5 ? grid::Tile::locked_door : grid::Tile::chest_closed;
  return o;
}

inline grid::Observation obs_at_level(int level, Rng& rng) {
  switch (level) {
    case 0: return obs_level0(rng);
    case 1: return obs_level1(rng);
    case 2: return obs_level2(rng);
    case 3: return obs_level3(rng);
    default: throw std::invalid_argument("level out of range");
  }
}

}  // namespace semex::test
