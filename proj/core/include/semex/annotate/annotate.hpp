#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semex/grid/grid.hpp"
#include "semex/replay/store.hpp"

namespace semex::annotate {

// Preference over an ordered observation pair.
enum class Choice { first, second, both, none };

std::string choice_name(Choice c);
Choice choice_from_name(const std::string& s);

// Swaps first/second, fixes both/none. Used by the antisymmetry tests and by
// order-randomized annotation.
Choice flip_choice(Choice c);

// Rule-based interest score of a single observation:
//   0  nothing of note
//   1  a key, door or chest is visible but the agent holds no key
//   2  the agent holds the key
//   3  the agent holds the key next to a door or chest
int interestingness_level(const grid::Observation& o);

// Deterministic annotator: higher level wins; equal nonzero levels -> both,
// two level-0 observations -> none.
Choice oracle_annotate(const grid::Observation& a, const grid::Observation& b);

// Response grammar shared by every annotator backend: the first standalone
// digit (no digit neighbors) decides; 0 -> first, 1 -> second, 2 -> both,
// 3 -> none. Anything else is unparseable.
std::optional<Choice> parse_annotation_response(const std::string& text);

std::string digit_for_choice(Choice c);

struct AnnotatedPair {
  replay::ObsRef a_ref, b_ref;
  grid::Observation a, b;
  Choice choice = Choice::none;
  std::string annotator;  // backend id
  int latency_ms = 0;
  std::string raw;  // raw response text, empty for rule-based backends
};

struct AnnotationStats {
  std::size_t requested = 0;
  std::size_t annotated = 0;       // records produced (includes fallbacks)
  std::size_t parse_failures = 0;  // pairs whose every attempt was unparseable
  std::size_t transport_retries = 0;
  std::size_t http_errors = 0;
  std::int64_t elapsed_ms = 0;
  std::size_t count_first = 0, count_second = 0, count_both = 0, count_none = 0;

  void tally(Choice c);
};

// Line-delimited JSON dataset; one object per pair, self-contained (embeds
// both observations). See docs/formats.md.
void write_dataset(std::ostream& out, const std::vector<AnnotatedPair>& pairs);
void write_dataset_file(const std::string& path, const std::vector<AnnotatedPair>& pairs);
std::vector<AnnotatedPair> read_dataset(std::istream& in);
std::vector<AnnotatedPair> read_dataset_file(const std::string& path);

// Samples `n` pairs from the store and labels them with the rule oracle.
std::pair<std::vector<AnnotatedPair>, AnnotationStats> oracle_annotate_dataset(
    const replay::ReplayStore& store, std::size_t n, std::uint64_t seed);

}  // namespace semex::annotate
