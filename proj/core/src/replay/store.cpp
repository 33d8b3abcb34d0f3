#include "semex/replay/store.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "semex/util/hash.hpp"

namespace semex::replay {

namespace {

std::string window_chars(const grid::Observation& o) {
  std::string s(grid::kWindowCells, '.');
  for (int i = 0; i < grid::kWindowCells; ++i)
    s[static_cast<std::size_t>(i)] = grid::tile_char(o.window[static_cast<std::size_t>(i)]);
  return s;
}

grid::Observation obs_from(const std::string& window, int flag) {
  if (window.size() != grid::kWindowCells)
    throw std::invalid_argument("bad window length in episode record");
  grid::Observation o;
  o.has_key = flag != 0;
  for (int i = 0; i < grid::kWindowCells; ++i)
    o.window[static_cast<std::size_t>(i)] = grid::tile_from_char(window[static_cast<std::size_t>(i)]);
  return o;
}

void check_tag(const std::string& tag, const char* what) {
  if (tag.empty() || tag.find_first_of(" \t\n") != std::string::npos)
    throw std::invalid_argument(std::string("invalid ") + what + " tag: '" + tag + "'");
}

}  // namespace

std::string serialize_episode(const Episode& e) {
  std::ostringstream os;
  os << "episode " << e.id << " env=" << grid::env_kind_name(e.env)
     << " seed=" << e.seed << " policy=" << e.policy << " phase=" << e.phase
     << " len=" << e.steps.size() << '\n';
  os << "init " << (e.init_obs.has_key ? 1 : 0) << ' ' << window_chars(e.init_obs) << '\n';
  char buf[32];
  for (const Step& s : e.steps) {
    std::snprintf(buf, sizeof(buf), "%a", s.reward);
    os << "step " << grid::action_name(s.action) << ' ' << buf << ' '
       << (s.done ? 1 : 0) << ' ' << s.deltas.key_pickup << ' '
       << s.deltas.door_open << ' ' << s.deltas.chest_open << ' '
       << s.deltas.exit_reached << ' ' << s.deltas.task_reward << ' '
       << s.deltas.at_door_with_key << ' ' << s.deltas.at_chest_with_key << ' '
       << s.deltas.no_change << ' ' << (s.next_obs.has_key ? 1 : 0) << ' '
       << window_chars(s.next_obs) << '\n';
  }
  os << "end\n";
  return os.str();
}

Episode parse_episode(const std::string& block) {
  std::istringstream in(block);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty episode block");

  Episode e;
  {
    std::istringstream hl(line);
    std::string tag;
    hl >> tag >> e.id;
    if (tag != "episode" || !hl) throw std::runtime_error("bad episode header: " + line);
    std::string kv;
    std::size_t expected_len = 0;
    while (hl >> kv) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) throw std::runtime_error("bad episode header: " + line);
      const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "env") e.env = grid::env_kind_from_name(val);
      else if (key == "seed") e.seed = std::stoull(val);
      else if (key == "policy") e.policy = val;
      else if (key == "phase") e.phase = val;
      else if (key == "len") expected_len = std::stoull(val);
      else throw std::runtime_error("unknown episode header key: " + key);
    }
    e.steps.reserve(expected_len);
  }

  if (!std::getline(in, line)) throw std::runtime_error("episode block truncated");
  {
    std::istringstream il(line);
    std::string tag, window;
    int flag = 0;
    il >> tag >> flag >> window;
    if (tag != "init" || !il) throw std::runtime_error("bad init line: " + line);
    e.init_obs = obs_from(window, flag);
  }

  while (std::getline(in, line)) {
    if (line == "end") return e;
    std::istringstream sl(line);
    std::string tag, action, reward, window;
    int done = 0, flag = 0;
    Step s;
    sl >> tag >> action >> reward >> done >> s.deltas.key_pickup >>
        s.deltas.door_open >> s.deltas.chest_open >> s.deltas.exit_reached >>
        s.deltas.task_reward >> s.deltas.at_door_with_key >>
        s.deltas.at_chest_with_key >> s.deltas.no_change >> flag >> window;
    if (tag != "step" || !sl) throw std::runtime_error("bad step line: " + line);
    s.action = grid::action_from_name(action);
    s.reward = std::strtod(reward.c_str(), nullptr);
    s.done = done != 0;
    s.next_obs = obs_from(window, flag);
    e.steps.push_back(std::move(s));
  }
  throw std::runtime_error("episode block missing end marker");
}

std::int64_t ReplayStore::add(Episode e) {
  check_tag(e.policy, "policy");
  check_tag(e.phase, "phase");
  e.id = static_cast<std::int64_t>(episodes_.size());
  episodes_.push_back(std::move(e));
  return episodes_.back().id;
}

const Episode& ReplayStore::episode(std::int64_t id) const {
  if (id < 0 || id >= static_cast<std::int64_t>(episodes_.size()))
    throw std::out_of_range("episode id out of range");
  return episodes_[static_cast<std::size_t>(id)];
}

std::size_t ReplayStore::num_steps() const {
  std::size_t n = 0;
  for (const Episode& e : episodes_) n += e.steps.size();
  return n;
}

std::size_t ReplayStore::num_observations() const {
  return num_steps() + episodes_.size();
}

const grid::Observation& ReplayStore::obs(const ObsRef& r) const {
  const Episode& e = episode(r.episode);
  if (r.index == 0) return e.init_obs;
  if (r.index < 0 || r.index > e.length())
    throw std::out_of_range("observation index out of range");
  return e.steps[static_cast<std::size_t>(r.index - 1)].next_obs;
}

ObsRef ReplayStore::sample_obs(Rng& rng) const {
  const std::size_t total = num_observations();
  if (total == 0) throw std::logic_error("sample_obs on empty store");
  std::uint64_t k = rng.uniform_index(total);
  for (const Episode& e : episodes_) {
    const std::uint64_t here = static_cast<std::uint64_t>(e.length()) + 1;
    if (k < here) return ObsRef{e.id, static_cast<int>(k)};
    k -= here;
  }
  throw std::logic_error("sample_obs internal error");
}

std::vector<std::pair<ObsRef, ObsRef>> ReplayStore::sample_pairs(std::size_t n,
                                                                 Rng& rng) const {
  if (num_observations() < 2)
    throw std::logic_error("sample_pairs needs at least two observations");
  std::vector<std::pair<ObsRef, ObsRef>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ObsRef a = sample_obs(rng);
    ObsRef b = sample_obs(rng);
    while (b == a) b = sample_obs(rng);
    out.emplace_back(a, b);
  }
  return out;
}

std::vector<SequenceRef> ReplayStore::sample_sequences(std::size_t batch, int length,
                                                       Rng& rng) const {
  if (length <= 0) throw std::invalid_argument("sequence length must be positive");
  std::uint64_t eligible = 0;
  for (const Episode& e : episodes_)
    if (e.length() >= length) eligible += static_cast<std::uint64_t>(e.length() - length + 1);
  if (eligible == 0)
    throw std::logic_error("no episode long enough for requested sequence length");
  std::vector<SequenceRef> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    std::uint64_t k = rng.uniform_index(eligible);
    for (const Episode& e : episodes_) {
      if (e.length() < length) continue;
      const std::uint64_t here = static_cast<std::uint64_t>(e.length() - length + 1);
      if (k < here) {
        out.push_back(SequenceRef{e.id, static_cast<int>(k), length});
        break;
      }
      k -= here;
    }
  }
  return out;
}

void ReplayStore::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const std::string epath = dir + "/episodes.txt";
  const std::string ipath = dir + "/index.txt";
  std::ofstream ep(epath, std::ios::binary | std::ios::trunc);
  std::ofstream ix(ipath, std::ios::binary | std::ios::trunc);
  if (!ep || !ix) throw std::runtime_error("cannot open store files in " + dir);
  ix << "index v1\n";
  std::size_t offset = 0;
  for (const Episode& e : episodes_) {
    const std::string block = serialize_episode(e);
    ep << block;
    ix << e.id << ' ' << offset << ' ' << block.size() << '\n';
    offset += block.size();
  }
  ep.flush();
  ix.flush();
  if (!ep || !ix) throw std::runtime_error("store write failed in " + dir);
}

ReplayStore ReplayStore::load(const std::string& dir) {
  const std::string epath = dir + "/episodes.txt";
  const std::string ipath = dir + "/index.txt";
  std::ifstream ix(ipath, std::ios::binary);
  if (!ix) throw std::runtime_error("cannot open " + ipath);
  std::string header;
  std::getline(ix, header);
  if (header != "index v1") throw std::runtime_error("bad index header in " + ipath);

  std::ifstream ep(epath, std::ios::binary);
  if (!ep) throw std::runtime_error("cannot open " + epath);
  std::ostringstream buf;
  buf << ep.rdbuf();
  const std::string all = buf.str();

  ReplayStore store;
  std::int64_t id = 0;
  std::size_t offset = 0, len = 0;
  while (ix >> id >> offset >> len) {
    if (offset + len > all.size()) throw std::runtime_error("index out of bounds in " + ipath);
    Episode e = parse_episode(all.substr(offset, len));
    if (e.id != id) throw std::runtime_error("index/episode id mismatch in " + dir);
    if (e.id != static_cast<std::int64_t>(store.episodes_.size()))
      throw std::runtime_error("non-contiguous episode ids in " + dir);
    store.episodes_.push_back(std::move(e));
  }
  return store;
}

std::uint64_t ReplayStore::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Episode& e : episodes_) h = fnv1a64(serialize_episode(e), h);
  return h;
}

}  // namespace semex::replay
