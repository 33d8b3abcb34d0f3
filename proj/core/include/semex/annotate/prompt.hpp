#pragma once

#include <string>
#include <vector>

#include "semex/grid/grid.hpp"

namespace semex::annotate {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
};

struct PromptConfig {
  bool multi_turn = false;  // prime the conversation with a cached legend turn
  bool randomize_order = false;  // present pairs in random order, unflip after
  std::string task_hint = "finding keys and opening doors or chests";
};

// Tile legend and task framing shared by every prompt.
std::string legend_text();

// Opening message of the multi-turn variant; the reply gets cached and
// replayed as an assistant turn.
std::string context_request_text();

// The per-pair question. The rendering is also the wire format the mock
// server parses, so tests can cross-check both sides.
std::string render_pair_prompt(const grid::Observation& a, const grid::Observation& b,
                               const PromptConfig& cfg);

// Full message list for one pair. cached_context is the assistant reply from
// the context request (empty in single-turn mode).
std::vector<ChatMessage> build_messages(const grid::Observation& a,
                                        const grid::Observation& b,
                                        const PromptConfig& cfg,
                                        const std::string& cached_context);

// Inverse of the prompt rendering, used by the mock server. Throws
// std::invalid_argument if the text is not a rendered pair prompt.
struct ParsedPairPrompt {
  grid::Observation a, b;
};
ParsedPairPrompt parse_pair_prompt(const std::string& text);
bool looks_like_pair_prompt(const std::string& text);

}  // namespace semex::annotate
