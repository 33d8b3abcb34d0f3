#include "semex/grid/grid.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "semex/util/hash.hpp"

namespace semex::grid {

namespace {

constexpr int kKeyRoomSize = 11;       // square grid, outermost ring is wall
constexpr int kKeyRoomInner = 4;       // inner room block, walls included
constexpr int kKeyRoomLimit = 600;

// Corridor across the top, three rooms below, one doorway gap per room.
constexpr int kChestRoomW = 5, kChestRoomH = 5, kChestRooms = 3;
constexpr int kChestWidth = 1 + kChestRooms * (kChestRoomW + 1);  // 19
constexpr int kChestHeight = 3 + kChestRoomH + 1;                 // 9
constexpr int kChestCorridorY = 1;
constexpr int kChestLimit = 800;

bool passable(Tile t) {
  return t == Tile::floor || t == Tile::key || t == Tile::open_door || t == Tile::exit;
}

struct XY {
  int x, y;
};

// Cells reachable by plain walking (doors stay shut, chests block).
std::vector<bool> reachable_from(const GridState& s, int sx, int sy) {
  std::vector<bool> seen(static_cast<std::size_t>(s.width * s.height), false);
  std::deque<XY> queue;
  queue.push_back({sx, sy});
  seen[static_cast<std::size_t>(sy * s.width + sx)] = true;
  while (!queue.empty()) {
    const XY c = queue.front();
    queue.pop_front();
    const int dx[4] = {0, 1, 0, -1}, dy[4] = {-1, 0, 1, 0};
    for (int d = 0; d < 4; ++d) {
      const int nx = c.x + dx[d], ny = c.y + dy[d];
      if (nx < 0 || ny < 0 || nx >= s.width || ny >= s.height) continue;
      const std::size_t idx = static_cast<std::size_t>(ny * s.width + nx);
      if (seen[idx] || !passable(s.at(nx, ny))) continue;
      seen[idx] = true;
      queue.push_back({nx, ny});
    }
  }
  return seen;
}

GridState make_key_room(Rng& rng) {
  GridState s;
  s.kind = EnvKind::key_room_lite;
  s.width = s.height = kKeyRoomSize;
  s.tiles.assign(static_cast<std::size_t>(s.width * s.height), Tile::floor);
  for (int x = 0; x < s.width; ++x) {
    s.set(x, 0, Tile::wall);
    s.set(x, s.height - 1, Tile::wall);
  }
  for (int y = 0; y < s.height; ++y) {
    s.set(0, y, Tile::wall);
    s.set(s.width - 1, y, Tile::wall);
  }

  // Inner room block.
  const int rx = 1 + static_cast<int>(rng.uniform_index(
                         static_cast<std::uint64_t>(s.width - 1 - kKeyRoomInner)));
  const int ry = 1 + static_cast<int>(rng.uniform_index(
                         static_cast<std::uint64_t>(s.height - 1 - kKeyRoomInner)));
  for (int y = ry; y < ry + kKeyRoomInner; ++y)
    for (int x = rx; x < rx + kKeyRoomInner; ++x) s.set(x, y, Tile::wall);
  for (int y = ry + 1; y < ry + kKeyRoomInner - 1; ++y)
    for (int x = rx + 1; x < rx + kKeyRoomInner - 1; ++x) s.set(x, y, Tile::floor);

  auto inside_block = [&](int x, int y) {
    return x >= rx && x < rx + kKeyRoomInner && y >= ry && y < ry + kKeyRoomInner;
  };

  // Door on a non-corner perimeter cell whose outward neighbor is open floor.
  std::vector<XY> door_candidates;
  for (int y = ry; y < ry + kKeyRoomInner; ++y) {
    for (int x = rx; x < rx + kKeyRoomInner; ++x) {
      const bool on_perimeter = x == rx || x == rx + kKeyRoomInner - 1 ||
                                y == ry || y == ry + kKeyRoomInner - 1;
      const bool corner = (x == rx || x == rx + kKeyRoomInner - 1) &&
                          (y == ry || y == ry + kKeyRoomInner - 1);
      if (!on_perimeter || corner) continue;
      const int ox = x == rx ? x - 1 : (x == rx + kKeyRoomInner - 1 ? x + 1 : x);
      const int oy = y == ry ? y - 1 : (y == ry + kKeyRoomInner - 1 ? y + 1 : y);
      if (!inside_block(ox, oy) && s.at(ox, oy) == Tile::floor)
        door_candidates.push_back({x, y});
    }
  }
  if (door_candidates.empty()) return s;  // caller rejects via solvability check
  const XY door = door_candidates[rng.uniform_index(door_candidates.size())];
  s.set(door.x, door.y, Tile::locked_door);

  // Exit inside the room.
  std::vector<XY> inner;
  for (int y = ry + 1; y < ry + kKeyRoomInner - 1; ++y)
    for (int x = rx + 1; x < rx + kKeyRoomInner - 1; ++x) inner.push_back({x, y});
  const XY exit_cell = inner[rng.uniform_index(inner.size())];
  s.set(exit_cell.x, exit_cell.y, Tile::exit);

  // Key and agent on distinct outside floor cells.
  std::vector<XY> outside;
  for (int y = 1; y < s.height - 1; ++y)
    for (int x = 1; x < s.width - 1; ++x)
      if (!inside_block(x, y) && s.at(x, y) == Tile::floor) outside.push_back({x, y});
  const std::size_t ki = rng.uniform_index(outside.size());
  const XY key_cell = outside[ki];
  outside.erase(outside.begin() + static_cast<std::ptrdiff_t>(ki));
  const XY agent = outside[rng.uniform_index(outside.size())];
  s.set(key_cell.x, key_cell.y, Tile::key);
  s.agent_x = agent.x;
  s.agent_y = agent.y;
  return s;
}

GridState make_key_chest(Rng& rng) {
  GridState s;
  s.kind = EnvKind::key_chest_lite;
  s.width = kChestWidth;
  s.height = kChestHeight;
  s.tiles.assign(static_cast<std::size_t>(s.width * s.height), Tile::wall);

  for (int x = 1; x < s.width - 1; ++x) s.set(x, kChestCorridorY, Tile::floor);

  const int room_y0 = kChestCorridorY + 2;
  std::array<int, kChestRooms> room_x0{};
  for (int r = 0; r < kChestRooms; ++r) {
    room_x0[static_cast<std::size_t>(r)] = 1 + r * (kChestRoomW + 1);
    const int x0 = room_x0[static_cast<std::size_t>(r)];
    for (int y = room_y0; y < room_y0 + kChestRoomH; ++y)
      for (int x = x0; x < x0 + kChestRoomW; ++x) s.set(x, y, Tile::floor);
    // Doorway through the wall row between corridor and room.
    const int gap_x = x0 + static_cast<int>(rng.uniform_index(kChestRoomW));
    s.set(gap_x, kChestCorridorY + 1, Tile::floor);
  }

  const std::size_t key_room = rng.uniform_index(kChestRooms);
  std::size_t chest_room = rng.uniform_index(kChestRooms - 1);
  if (chest_room >= key_room) ++chest_room;

  auto random_room_cell = [&](std::size_t room) {
    const int x0 = room_x0[room];
    const int x = x0 + static_cast<int>(rng.uniform_index(kChestRoomW));
    const int y = room_y0 + static_cast<int>(rng.uniform_index(kChestRoomH));
    return XY{x, y};
  };
  const XY key_cell = random_room_cell(key_room);
  s.set(key_cell.x, key_cell.y, Tile::key);
  const XY chest_cell = random_room_cell(chest_room);
  s.set(chest_cell.x, chest_cell.y, Tile::chest_closed);

  s.agent_x = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(s.width - 2)));
  s.agent_y = kChestCorridorY;
  return s;
}

}  // namespace

char tile_char(Tile t) {
  switch (t) {
    case Tile::wall: return '#';
    case Tile::floor: return '.';
    case Tile::key: return 'k';
    case Tile::locked_door: return 'D';
    case Tile::open_door: return 'd';
    case Tile::chest_closed: return 'C';
    case Tile::chest_open: return 'c';
    case Tile::exit: return '>';
  }
  throw std::logic_error("unknown tile");
}

Tile tile_from_char(char c) {
  switch (c) {
    case '#': return Tile::wall;
    case '.': return Tile::floor;
    case 'k': return Tile::key;
    case 'D': return Tile::locked_door;
    case 'd': return Tile::open_door;
    case 'C': return Tile::chest_closed;
    case 'c': return Tile::chest_open;
    case '>': return Tile::exit;
    default: throw std::invalid_argument(std::string("unknown tile char: ") + c);
  }
}

std::string action_name(Action a) {
  switch (a) {
    case Action::up: return "up";
    case Action::right: return "right";
    case Action::down: return "down";
    case Action::left: return "left";
    case Action::open: return "open";
  }
  throw std::logic_error("unknown action");
}

Action action_from_name(const std::string& s) {
  if (s == "up") return Action::up;
  if (s == "right") return Action::right;
  if (s == "down") return Action::down;
  if (s == "left") return Action::left;
  if (s == "open") return Action::open;
  throw std::invalid_argument("unknown action name: " + s);
}

std::string env_kind_name(EnvKind k) {
  return k == EnvKind::key_room_lite ? "key_room_lite" : "key_chest_lite";
}

EnvKind env_kind_from_name(const std::string& s) {
  if (s == "key_room_lite" || s == "keyroom") return EnvKind::key_room_lite;
  if (s == "key_chest_lite" || s == "keychest") return EnvKind::key_chest_lite;
  throw std::invalid_argument("unknown environment: " + s);
}

int EnvConfig::resolved_episode_limit() const {
  if (episode_limit > 0) return episode_limit;
  return kind == EnvKind::key_room_lite ? kKeyRoomLimit : kChestLimit;
}

Tile GridState::at(int x, int y) const {
  if (x < 0 || y < 0 || x >= width || y >= height) return Tile::wall;
  return tiles[static_cast<std::size_t>(y * width + x)];
}

void GridState::set(int x, int y, Tile t) {
  if (x < 0 || y < 0 || x >= width || y >= height)
    throw std::out_of_range("GridState::set out of bounds");
  tiles[static_cast<std::size_t>(y * width + x)] = t;
}

bool GridState::same_world(const GridState& o) const {
  return kind == o.kind && width == o.width && height == o.height &&
         agent_x == o.agent_x && agent_y == o.agent_y && has_key == o.has_key &&
         tiles == o.tiles;
}

std::vector<double> Observation::encode() const {
  std::vector<double> out(static_cast<std::size_t>(kObsDim), 0.0);
  encode_into(out.data());
  return out;
}

void Observation::encode_into(double* out) const {
  std::fill(out, out + kObsDim, 0.0);
  for (int i = 0; i < kWindowCells; ++i)
    out[i * kNumTileTypes + static_cast<int>(window[static_cast<std::size_t>(i)])] = 1.0;
  out[kWindowCells * kNumTileTypes] = has_key ? 1.0 : 0.0;
}

Observation observe(const GridState& s) {
  Observation o;
  o.has_key = s.has_key;
  int i = 0;
  for (int dy = -kWindow / 2; dy <= kWindow / 2; ++dy)
    for (int dx = -kWindow / 2; dx <= kWindow / 2; ++dx)
      o.window[static_cast<std::size_t>(i++)] = s.at(s.agent_x + dx, s.agent_y + dy);
  return o;
}

void EventCounters::add(const EventDeltas& d) {
  key_pickups += d.key_pickup;
  door_opens += d.door_open;
  chest_opens += d.chest_open;
  exits_reached += d.exit_reached;
  task_rewards += d.task_reward;
  at_door_with_key += d.at_door_with_key;
  at_chest_with_key += d.at_chest_with_key;
  env_steps += 1;
}

bool layout_solvable(const GridState& s) {
  // Key reachable by walking.
  std::vector<bool> from_agent = reachable_from(s, s.agent_x, s.agent_y);
  int key_x = -1, key_y = -1, chest_x = -1, chest_y = -1, door_x = -1, door_y = -1;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (s.at(x, y) == Tile::key) { key_x = x; key_y = y; }
      if (s.at(x, y) == Tile::chest_closed) { chest_x = x; chest_y = y; }
      if (s.at(x, y) == Tile::locked_door) { door_x = x; door_y = y; }
    }
  }
  if (key_x < 0) return false;
  if (!from_agent[static_cast<std::size_t>(key_y * s.width + key_x)]) return false;

  if (s.kind == EnvKind::key_room_lite) {
    // Door face must be reachable; the exit behind it then is by construction,
    // but check anyway on a copy with the door opened.
    if (door_x < 0) return false;
    GridState opened = s;
    opened.set(door_x, door_y, Tile::open_door);
    std::vector<bool> r = reachable_from(opened, opened.agent_x, opened.agent_y);
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        if (s.at(x, y) == Tile::exit && r[static_cast<std::size_t>(y * s.width + x)])
          return true;
    return false;
  }
  // Chest must have a reachable neighbor cell.
  if (chest_x < 0) return false;
  const int dx[4] = {0, 1, 0, -1}, dy[4] = {-1, 0, 1, 0};
  for (int d = 0; d < 4; ++d) {
    const int nx = chest_x + dx[d], ny = chest_y + dy[d];
    if (nx < 0 || ny < 0 || nx >= s.width || ny >= s.height) continue;
    if (from_agent[static_cast<std::size_t>(ny * s.width + nx)]) return true;
  }
  return false;
}

GridState make_layout(const EnvConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < cfg.max_layout_retries; ++attempt) {
    GridState s = cfg.kind == EnvKind::key_room_lite ? make_key_room(rng)
                                                     : make_key_chest(rng);
    if (layout_solvable(s)) return s;
  }
  throw std::runtime_error("no solvable layout after " +
                           std::to_string(cfg.max_layout_retries) + " attempts");
}

StepResult apply_step(GridState& state, Action a, const EnvConfig& cfg) {
  if (state.done) throw std::logic_error("apply_step on finished episode");
  if (static_cast<int>(a) >= cfg.num_actions())
    throw std::invalid_argument("action out of range for this environment");

  const GridState before = state;
  StepResult res;

  if (a == Action::open) {
    // Open an adjacent chest; requires the key. Anything else is a no-op.
    const int dx[4] = {0, 1, 0, -1}, dy[4] = {-1, 0, 1, 0};
    for (int d = 0; d < 4; ++d) {
      const int nx = state.agent_x + dx[d], ny = state.agent_y + dy[d];
      if (state.at(nx, ny) == Tile::chest_closed && state.has_key) {
        state.set(nx, ny, Tile::chest_open);
        res.deltas.chest_open = 1;
        res.deltas.task_reward = 1;
        res.reward = 1.0;
        state.done = true;
        break;
      }
    }
  } else {
    const int dx = a == Action::right ? 1 : (a == Action::left ? -1 : 0);
    const int dy = a == Action::down ? 1 : (a == Action::up ? -1 : 0);
    const int nx = state.agent_x + dx, ny = state.agent_y + dy;
    const Tile t = state.at(nx, ny);
    if (t == Tile::locked_door && state.has_key) {
      state.set(nx, ny, Tile::open_door);
      state.agent_x = nx;
      state.agent_y = ny;
      res.deltas.door_open = 1;
    } else if (t == Tile::floor || t == Tile::open_door || t == Tile::key ||
               t == Tile::exit) {
      state.agent_x = nx;
      state.agent_y = ny;
      if (t == Tile::key) {
        state.has_key = true;
        state.set(nx, ny, Tile::floor);
        res.deltas.key_pickup = 1;
      }
      if (t == Tile::exit) {
        res.deltas.exit_reached = 1;
        res.deltas.task_reward = 1;
        res.reward = 1.0;
        state.done = true;
      }
    }
    // Walls, chests and keyless door bumps leave the world unchanged.
  }

  state.step_count += 1;
  if (state.step_count >= cfg.resolved_episode_limit()) state.done = true;

  if (res.reward == 0.0 && state.same_world(before)) {
    res.reward = -0.01;
    res.deltas.no_change = 1;
  }

  if (state.has_key) {
    const int dx[4] = {0, 1, 0, -1}, dy[4] = {-1, 0, 1, 0};
    for (int d = 0; d < 4; ++d) {
      const Tile t = state.at(state.agent_x + dx[d], state.agent_y + dy[d]);
      if (t == Tile::locked_door || t == Tile::open_door) res.deltas.at_door_with_key = 1;
      if (t == Tile::chest_closed || t == Tile::chest_open) res.deltas.at_chest_with_key = 1;
    }
  }

  res.done = state.done;
  res.obs = observe(state);
  return res;
}

GridEnv::GridEnv(const EnvConfig& cfg, std::uint64_t run_seed)
    : cfg_(cfg), run_seed_(run_seed) {
  state_.done = true;  // force an explicit reset before stepping
}

Observation GridEnv::reset() {
  // Per-episode seeds are derived, not sequential, so runs differing only in
  // episode count still see identical layouts for shared episode indices.
  const std::uint64_t seed = mix64(run_seed_, static_cast<std::uint64_t>(episode_index_));
  ++episode_index_;
  return reset(seed);
}

Observation GridEnv::reset(std::uint64_t seed) {
  last_seed_ = seed;
  state_ = make_layout(cfg_, seed);
  counters_.episodes += 1;
  return observe(state_);
}

StepResult GridEnv::step(Action a) {
  StepResult r = apply_step(state_, a, cfg_);
  counters_.add(r.deltas);
  return r;
}

}  // namespace semex::grid
