#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "semex/replay/store.hpp"
#include "semex/rng.hpp"

using namespace semex;
using namespace semex::replay;

namespace {

// Synthetic episode of `len` steps with recognizable content.
Episode make_episode(int len, std::uint64_t seed, const std::string& phase = "collect") {
  Rng rng(seed);
  Episode e;
  e.env = grid::EnvKind::key_chest_lite;
  e.seed = seed;
  e.policy = "scripted";
  e.phase = phase;
  e.init_obs = test::obs_level0(rng);
  for (int t = 0; t < len; ++t) {
    Step s;
    s.action = static_cast<grid::Action>(rng.uniform_index(5));
    s.reward = t == len - 1 ? 1.0 : -0.01 * static_cast<double>(t % 3);
    s.done = t == len - 1;
    s.deltas.key_pickup = t == 2 ? 1 : 0;
    s.next_obs = test::obs_at_level(static_cast<int>(rng.uniform_index(4)), rng);
    e.steps.push_back(std::move(s));
  }
  return e;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("append assigns dense distinct ids and get returns the same episode") {
  ReplayStore store;
  std::set<std::int64_t> ids;
  for (int i = 0; i < 100; ++i)
    ids.insert(store.add(make_episode(3 + i % 5, static_cast<std::uint64_t>(i))));
  CHECK(ids.size() == 100);
  CHECK(store.size() == 100);
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == 99);

  const Episode probe = make_episode(4, 17);
  ReplayStore s2;
  const std::int64_t id = s2.add(make_episode(4, 17));
  const Episode& got = s2.episode(id);
  CHECK(got.seed == probe.seed);
  CHECK(got.length() == probe.length());
  CHECK(got.init_obs == probe.init_obs);
  for (int t = 0; t < probe.length(); ++t) {
    CHECK(got.steps[static_cast<std::size_t>(t)].action ==
          probe.steps[static_cast<std::size_t>(t)].action);
    CHECK(got.steps[static_cast<std::size_t>(t)].next_obs ==
          probe.steps[static_cast<std::size_t>(t)].next_obs);
    CHECK(got.steps[static_cast<std::size_t>(t)].reward ==
          probe.steps[static_cast<std::size_t>(t)].reward);
  }
}

TEST_CASE("whitespace in policy or phase tags is rejected") {
  ReplayStore store;
  Episode e = make_episode(2, 1);
  e.policy = "two words";
  CHECK_THROWS_AS(store.add(std::move(e)), std::invalid_argument);
  Episode f = make_episode(2, 1);
  f.phase = "";
  CHECK_THROWS_AS(store.add(std::move(f)), std::invalid_argument);
}

TEST_CASE("episode text serialization round trips exactly") {
  const Episode e = [] {
    ReplayStore s;
    s.add(make_episode(6, 99));
    return s.episodes()[0];
  }();
  const std::string block = serialize_episode(e);
  const Episode back = parse_episode(block);
  CHECK(serialize_episode(back) == block);
  CHECK(back.init_obs == e.init_obs);
  CHECK(back.length() == e.length());
  for (int t = 0; t < e.length(); ++t)
    CHECK(back.steps[static_cast<std::size_t>(t)].reward ==
          e.steps[static_cast<std::size_t>(t)].reward);
}

TEST_CASE("save, load and save again produce identical files") {
  ReplayStore store;
  for (int i = 0; i < 12; ++i) store.add(make_episode(4 + i % 7, static_cast<std::uint64_t>(i)));

  const auto dir = test::fresh_dir("store-a");
  const auto dir2 = test::fresh_dir("store-b");
  store.save(dir.string());
  const ReplayStore loaded = ReplayStore::load(dir.string());
  CHECK(loaded.size() == store.size());
  CHECK(loaded.content_hash() == store.content_hash());
  loaded.save(dir2.string());
  CHECK(slurp(dir / "episodes.txt") == slurp(dir2 / "episodes.txt"));
  CHECK(slurp(dir / "index.txt") == slurp(dir2 / "index.txt"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("obs ref 0 is the initial observation") {
  ReplayStore store;
  store.add(make_episode(3, 5));
  const Episode& e = store.episodes()[0];
  CHECK(store.obs(ObsRef{0, 0}) == e.init_obs);
  CHECK(store.obs(ObsRef{0, 1}) == e.steps[0].next_obs);
  CHECK(store.obs(ObsRef{0, 3}) == e.steps[2].next_obs);
  CHECK(store.num_observations() == 4);
  CHECK_THROWS_AS(store.obs(ObsRef{0, 4}), std::out_of_range);
}

TEST_CASE("sampling the only possible pair returns it in either order") {
  ReplayStore store;
  store.add(make_episode(1, 2));  // init obs + one step obs
  REQUIRE(store.num_observations() == 2);
  Rng rng(9);
  const auto pairs = store.sample_pairs(10, rng);
  for (const auto& [a, b] : pairs) {
    CHECK(a != b);
    CHECK((a.index == 0 || a.index == 1));
    CHECK((b.index == 0 || b.index == 1));
  }
}

TEST_CASE("pair sampling is deterministic and never returns an identical pair") {
  ReplayStore store;
  for (int i = 0; i < 5; ++i) store.add(make_episode(6, static_cast<std::uint64_t>(i)));
  Rng r1(31), r2(31);
  const auto p1 = store.sample_pairs(500, r1);
  const auto p2 = store.sample_pairs(500, r2);
  CHECK(p1 == p2);
  for (const auto& [a, b] : p1) CHECK_FALSE(a == b);
}

TEST_CASE("pair sampling hits every stored observation at its expected rate") {
  // 4 episodes x 24 steps = 96 step observations + 4 initials = 100 refs.
  ReplayStore store;
  for (int i = 0; i < 4; ++i) store.add(make_episode(24, static_cast<std::uint64_t>(i)));
  REQUIRE(store.num_observations() == 100);

  Rng rng(424242);
  const std::size_t n = 100000;
  const auto pairs = store.sample_pairs(n, rng);
  std::map<std::pair<std::int64_t, int>, std::size_t> freq;
  for (const auto& [a, b] : pairs) {
    freq[{a.episode, a.index}]++;
    freq[{b.episode, b.index}]++;
  }
  CHECK(freq.size() == 100);
  const double expected = 2.0 * static_cast<double>(n) / 100.0;
  for (const auto& [ref, count] : freq) {
    CHECK(static_cast<double>(count) > expected * 0.95);
    CHECK(static_cast<double>(count) < expected * 1.05);
  }
}

TEST_CASE("single eligible window is always the one returned") {
  ReplayStore store;
  store.add(make_episode(5, 3));
  Rng rng(1);
  const auto refs = store.sample_sequences(8, 5, rng);
  for (const SequenceRef& r : refs) {
    CHECK(r.episode == 0);
    CHECK(r.start == 0);
    CHECK(r.length == 5);
  }
}

TEST_CASE("sequence sampling is deterministic and stays in bounds") {
  ReplayStore store;
  for (int i = 0; i < 6; ++i) store.add(make_episode(4 + 3 * i, static_cast<std::uint64_t>(i)));
  Rng r1(7), r2(7);
  const auto a = store.sample_sequences(64, 6, r1);
  const auto b = store.sample_sequences(64, 6, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].episode == b[i].episode);
    CHECK(a[i].start == b[i].start);
    const Episode& e = store.episode(a[i].episode);
    CHECK(e.length() >= 6);
    CHECK(a[i].start >= 0);
    CHECK(a[i].start + a[i].length <= e.length());
  }
}

TEST_CASE("sequence start indices are uniform per the chi-square oracle") {
  // One 20-step episode sampled at length 5 has 16 possible starts.
  ReplayStore store;
  store.add(make_episode(20, 11));
  Rng rng(1337);
  std::vector<std::size_t> counts(16, 0);
  const auto refs = store.sample_sequences(10000, 5, rng);
  for (const SequenceRef& r : refs) counts[static_cast<std::size_t>(r.start)]++;

  const double expected = 10000.0 / 16.0;
  double chi2 = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value, 15 degrees of freedom, p = 0.01
  CHECK(chi2 < 30.578);
}

TEST_CASE("sampling never mutates the store") {
  ReplayStore store;
  for (int i = 0; i < 3; ++i) store.add(make_episode(10, static_cast<std::uint64_t>(i)));
  const std::uint64_t before = store.content_hash();
  Rng rng(2);
  store.sample_pairs(1000, rng);
  store.sample_sequences(100, 4, rng);
  store.sample_obs(rng);
  CHECK(store.content_hash() == before);
}

TEST_CASE("sampling errors on insufficient data") {
  ReplayStore empty;
  Rng rng(1);
  CHECK_THROWS_AS(empty.sample_obs(rng), std::logic_error);
  CHECK_THROWS_AS(empty.sample_pairs(1, rng), std::logic_error);

  ReplayStore shallow;
  shallow.add(make_episode(3, 1));
  CHECK_THROWS_AS(shallow.sample_sequences(1, 4, rng), std::logic_error);
  CHECK_THROWS_AS(shallow.sample_sequences(1, 0, rng), std::invalid_argument);
}
