#include "semex/annotate/prompt.hpp"

#include <sstream>
#include <stdexcept>

#include "semex/grid/render.hpp"

namespace semex::annotate {

namespace {

const char* kStateA = "State A:";
const char* kStateB = "State B:";

std::string inventory_sentence(char label, bool has_key) {
  std::string s = "In state ";
  s += label;
  s += has_key ? " the agent holds a key." : " the agent holds no key.";
  return s;
}

grid::Observation parse_block(const std::string& text, const char* marker, char label) {
  const std::size_t pos = text.find(marker);
  if (pos == std::string::npos)
    throw std::invalid_argument(std::string("prompt missing marker ") + marker);
  std::size_t line_start = text.find('\n', pos);
  if (line_start == std::string::npos) throw std::invalid_argument("truncated prompt");
  ++line_start;

  grid::Observation o;
  for (int row = 0; row < grid::kWindow; ++row) {
    const std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) throw std::invalid_argument("truncated prompt");
    const std::string line = text.substr(line_start, line_end - line_start);
    if (line.size() != grid::kWindow)
      throw std::invalid_argument("bad window row in prompt: " + line);
    for (int col = 0; col < grid::kWindow; ++col) {
      const int i = row * grid::kWindow + col;
      const char c = line[static_cast<std::size_t>(col)];
      // '@' hides the tile under the agent; that tile never affects the
      // interest rules, so floor is a safe stand-in.
      o.window[static_cast<std::size_t>(i)] =
          c == '@' ? grid::Tile::floor : grid::tile_from_char(c);
    }
    line_start = line_end + 1;
  }

  if (text.find(inventory_sentence(label, true)) != std::string::npos)
    o.has_key = true;
  else if (text.find(inventory_sentence(label, false)) != std::string::npos)
    o.has_key = false;
  else
    throw std::invalid_argument(std::string("prompt missing inventory sentence for ") + label);
  return o;
}

}  // namespace

std::string legend_text() {
  return "You watch an agent exploring a tiled dungeon, one snapshot at a time. "
         "Each snapshot is the 5x5 patch of the map around the agent. Tiles: "
         "'#' wall, '.' floor, 'k' key, 'D' locked door, 'd' open door, "
         "'C' closed chest, 'c' opened chest, '>' staircase out, '@' the agent.";
}

std::string context_request_text() {
  return legend_text() +
         "\n\nBriefly acknowledge the legend; afterwards you will be shown "
         "pairs of snapshots and asked which one looks more interesting.";
}

std::string render_pair_prompt(const grid::Observation& a, const grid::Observation& b,
                               const PromptConfig& cfg) {
  std::ostringstream os;
  os << kStateA << '\n' << grid::render_window(a);
  os << inventory_sentence('A', a.has_key) << '\n';
  os << '\n';
  os << kStateB << '\n' << grid::render_window(b);
  os << inventory_sentence('B', b.has_key) << '\n';
  os << '\n';
  os << "Which state is more interesting for " << cfg.task_hint
     << "? Answer with a single digit: 0 if state A, 1 if state B, 2 if both "
        "are equally interesting, 3 if neither is or you cannot tell.";
  return os.str();
}

std::vector<ChatMessage> build_messages(const grid::Observation& a,
                                        const grid::Observation& b,
                                        const PromptConfig& cfg,
                                        const std::string& cached_context) {
  std::vector<ChatMessage> msgs;
  if (cfg.multi_turn) {
    msgs.push_back({"user", context_request_text()});
    msgs.push_back({"assistant",
                    cached_context.empty() ? "Understood." : cached_context});
    msgs.push_back({"user", render_pair_prompt(a, b, cfg)});
  } else {
    msgs.push_back({"system", legend_text()});
    msgs.push_back({"user", render_pair_prompt(a, b, cfg)});
  }
  return msgs;
}

bool looks_like_pair_prompt(const std::string& text) {
  return text.find(kStateA) != std::string::npos &&
         text.find(kStateB) != std::string::npos;
}

ParsedPairPrompt parse_pair_prompt(const std::string& text) {
  ParsedPairPrompt p;
  p.a = parse_block(text, kStateA, 'A');
  p.b = parse_block(text, kStateB, 'B');
  return p;
}

}  // namespace semex::annotate
