#include "semex/grid/render.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "semex/util/hash.hpp"

namespace semex::grid {

std::string render_ascii(const GridState& s) {
  std::string out;
  out.reserve(static_cast<std::size_t>((s.width + 1) * s.height));
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x)
      out += (x == s.agent_x && y == s.agent_y) ? '@' : tile_char(s.at(x, y));
    out += '\n';
  }
  return out;
}

std::string render_window(const Observation& o) {
  std::string out;
  out.reserve(static_cast<std::size_t>((kWindow + 1) * kWindow));
  for (int i = 0; i < kWindowCells; ++i) {
    out += i == kWindowCells / 2 ? '@' : tile_char(o.window[static_cast<std::size_t>(i)]);
    if ((i + 1) % kWindow == 0) out += '\n';
  }
  return out;
}

std::string serialize_state(const GridState& s) {
  std::ostringstream os;
  os << "grid v1 kind=" << env_kind_name(s.kind) << " w=" << s.width
     << " h=" << s.height << " ax=" << s.agent_x << " ay=" << s.agent_y
     << " key=" << (s.has_key ? 1 : 0) << " steps=" << s.step_count
     << " done=" << (s.done ? 1 : 0) << " tiles=";
  for (Tile t : s.tiles) os << tile_char(t);
  return os.str();
}

namespace {

std::string field(const std::string& line, const std::string& key) {
  const std::string pat = key + "=";
  const std::size_t pos = line.find(pat);
  if (pos == std::string::npos)
    throw std::invalid_argument("state line missing field " + key);
  const std::size_t start = pos + pat.size();
  const std::size_t end = line.find(' ', start);
  return line.substr(start, end == std::string::npos ? end : end - start);
}

}  // namespace

GridState parse_state(const std::string& line) {
  if (line.rfind("grid v1 ", 0) != 0)
    throw std::invalid_argument("not a v1 state line");
  GridState s;
  s.kind = env_kind_from_name(field(line, "kind"));
  s.width = std::stoi(field(line, "w"));
  s.height = std::stoi(field(line, "h"));
  s.agent_x = std::stoi(field(line, "ax"));
  s.agent_y = std::stoi(field(line, "ay"));
  s.has_key = field(line, "key") == "1";
  s.step_count = std::stoi(field(line, "steps"));
  s.done = field(line, "done") == "1";
  const std::string tiles = field(line, "tiles");
  if (static_cast<int>(tiles.size()) != s.width * s.height)
    throw std::invalid_argument("state line tile count mismatch");
  s.tiles.resize(tiles.size());
  for (std::size_t i = 0; i < tiles.size(); ++i) s.tiles[i] = tile_from_char(tiles[i]);
  return s;
}

std::uint64_t state_hash(const GridState& s) {
  std::string repr;
  repr.reserve(s.tiles.size() + 16);
  for (Tile t : s.tiles) repr += static_cast<char>(t);
  repr += static_cast<char>(s.agent_x);
  repr += static_cast<char>(s.agent_y);
  repr += s.has_key ? '\1' : '\0';
  return fnv1a64(repr);
}

void write_episode_log(std::ostream& out, const GridState& initial,
                       const std::vector<EpisodeLogRecord>& records) {
  out << serialize_state(initial) << '\n';
  char buf[32];
  for (const EpisodeLogRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%a", r.reward);
    out << "step " << hex64(r.state_hash) << ' ' << action_name(r.action) << ' '
        << buf << ' ' << r.deltas.key_pickup << ' ' << r.deltas.door_open << ' '
        << r.deltas.chest_open << ' ' << r.deltas.exit_reached << ' '
        << r.deltas.task_reward << ' ' << r.deltas.at_door_with_key << ' '
        << r.deltas.at_chest_with_key << ' ' << r.deltas.no_change << '\n';
  }
  out << "end\n";
}

EpisodeLog read_episode_log(std::istream& in) {
  EpisodeLog log;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty episode log");
  log.initial = parse_state(line);
  while (std::getline(in, line)) {
    if (line == "end") return log;
    std::istringstream is(line);
    std::string tag, hash_hex, action, reward;
    EpisodeLogRecord r;
    is >> tag >> hash_hex >> action >> reward >> r.deltas.key_pickup >>
        r.deltas.door_open >> r.deltas.chest_open >> r.deltas.exit_reached >>
        r.deltas.task_reward >> r.deltas.at_door_with_key >>
        r.deltas.at_chest_with_key >> r.deltas.no_change;
    if (tag != "step" || !is) throw std::runtime_error("bad episode log line: " + line);
    r.state_hash = std::stoull(hash_hex, nullptr, 16);
    r.action = action_from_name(action);
    r.reward = std::strtod(reward.c_str(), nullptr);
    log.records.push_back(r);
  }
  throw std::runtime_error("episode log missing end marker");
}

}  // namespace semex::grid
