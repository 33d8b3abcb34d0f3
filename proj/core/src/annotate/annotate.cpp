#include "semex/annotate/annotate.hpp"

#include <cctype>
#include <chrono>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace semex::annotate {

namespace {

using nlohmann::json;

bool is_interest_tile(grid::Tile t) {
  using grid::Tile;
  return t == Tile::key || t == Tile::locked_door || t == Tile::open_door ||
         t == Tile::chest_closed || t == Tile::chest_open;
}

bool is_goal_tile(grid::Tile t) {
  using grid::Tile;
  return t == Tile::locked_door || t == Tile::open_door ||
         t == Tile::chest_closed || t == Tile::chest_open;
}

std::string window_chars(const grid::Observation& o) {
  std::string s(grid::kWindowCells, '.');
  for (int i = 0; i < grid::kWindowCells; ++i)
    s[static_cast<std::size_t>(i)] = grid::tile_char(o.window[static_cast<std::size_t>(i)]);
  return s;
}

grid::Observation obs_from_json(const json& j) {
  grid::Observation o;
  o.has_key = j.at("key").get<int>() != 0;
  const std::string w = j.at("window").get<std::string>();
  if (w.size() != grid::kWindowCells)
    throw std::runtime_error("dataset record has bad window length");
  for (int i = 0; i < grid::kWindowCells; ++i)
    o.window[static_cast<std::size_t>(i)] = grid::tile_from_char(w[static_cast<std::size_t>(i)]);
  return o;
}

json obs_to_json(const replay::ObsRef& ref, const grid::Observation& o) {
  return json{{"episode", ref.episode},
              {"step", ref.index},
              {"window", window_chars(o)},
              {"key", o.has_key ? 1 : 0}};
}

}  // namespace

std::string choice_name(Choice c) {
  switch (c) {
    case Choice::first: return "first";
    case Choice::second: return "second";
    case Choice::both: return "both";
    case Choice::none: return "none";
  }
  throw std::logic_error("unknown choice");
}

Choice choice_from_name(const std::string& s) {
  if (s == "first") return Choice::first;
  if (s == "second") return Choice::second;
  if (s == "both") return Choice::both;
  if (s == "none") return Choice::none;
  throw std::invalid_argument("unknown choice name: " + s);
}

Choice flip_choice(Choice c) {
  if (c == Choice::first) return Choice::second;
  if (c == Choice::second) return Choice::first;
  return c;
}

int interestingness_level(const grid::Observation& o) {
  if (o.has_key) {
    // 4-neighborhood of the center cell in the 5x5 window.
    const int center = grid::kWindowCells / 2;
    const int neighbors[4] = {center - grid::kWindow, center - 1, center + 1,
                              center + grid::kWindow};
    for (int n : neighbors)
      if (is_goal_tile(o.window[static_cast<std::size_t>(n)])) return 3;
    return 2;
  }
  for (grid::Tile t : o.window)
    if (is_interest_tile(t)) return 1;
  return 0;
}

Choice oracle_annotate(const grid::Observation& a, const grid::Observation& b) {
  const int la = interestingness_level(a), lb = interestingness_level(b);
  if (la > lb) return Choice::first;
  if (lb > la) return Choice::second;
  return la > 0 ? Choice::both : Choice::none;
}

std::optional<Choice> parse_annotation_response(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    const bool left_digit = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
    const bool right_digit =
        i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (left_digit || right_digit) {
      // Skip the whole run of digits; none of them stands alone.
      while (i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) ++i;
      continue;
    }
    switch (text[i]) {
      case '0': return Choice::first;
      case '1': return Choice::second;
      case '2': return Choice::both;
      case '3': return Choice::none;
      default: return std::nullopt;  // standalone digit outside the grammar
    }
  }
  return std::nullopt;
}

std::string digit_for_choice(Choice c) {
  switch (c) {
    case Choice::first: return "0";
    case Choice::second: return "1";
    case Choice::both: return "2";
    case Choice::none: return "3";
  }
  throw std::logic_error("unknown choice");
}

void AnnotationStats::tally(Choice c) {
  ++annotated;
  switch (c) {
    case Choice::first: ++count_first; break;
    case Choice::second: ++count_second; break;
    case Choice::both: ++count_both; break;
    case Choice::none: ++count_none; break;
  }
}

void write_dataset(std::ostream& out, const std::vector<AnnotatedPair>& pairs) {
  for (const AnnotatedPair& p : pairs) {
    json j{{"a", obs_to_json(p.a_ref, p.a)},
           {"b", obs_to_json(p.b_ref, p.b)},
           {"choice", choice_name(p.choice)},
           {"annotator", p.annotator},
           {"latency_ms", p.latency_ms},
           {"raw", p.raw}};
    out << j.dump() << '\n';
  }
}

void write_dataset_file(const std::string& path, const std::vector<AnnotatedPair>& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open dataset for writing: " + path);
  write_dataset(out, pairs);
  out.flush();
  if (!out) throw std::runtime_error("dataset write failed: " + path);
}

std::vector<AnnotatedPair> read_dataset(std::istream& in) {
  std::vector<AnnotatedPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               " is not valid JSON: " + e.what());
    }
    AnnotatedPair p;
    p.a_ref = {j.at("a").at("episode").get<std::int64_t>(), j.at("a").at("step").get<int>()};
    p.b_ref = {j.at("b").at("episode").get<std::int64_t>(), j.at("b").at("step").get<int>()};
    p.a = obs_from_json(j.at("a"));
    p.b = obs_from_json(j.at("b"));
    p.choice = choice_from_name(j.at("choice").get<std::string>());
    p.annotator = j.at("annotator").get<std::string>();
    p.latency_ms = j.value("latency_ms", 0);
    p.raw = j.value("raw", "");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<AnnotatedPair> read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return read_dataset(in);
}

std::pair<std::vector<AnnotatedPair>, AnnotationStats> oracle_annotate_dataset(
    const replay::ReplayStore& store, std::size_t n, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  const auto refs = store.sample_pairs(n, rng);
  std::vector<AnnotatedPair> out;
  out.reserve(n);
  AnnotationStats stats;
  stats.requested = n;
  for (const auto& [ra, rb] : refs) {
    AnnotatedPair p;
    p.a_ref = ra;
    p.b_ref = rb;
    p.a = store.obs(ra);
    p.b = store.obs(rb);
    p.choice = oracle_annotate(p.a, p.b);
    p.annotator = "oracle";
    stats.tally(p.choice);
    out.push_back(std::move(p));
  }
  stats.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return {std::move(out), stats};
}

}  // namespace semex::annotate
