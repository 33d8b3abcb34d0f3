#pragma once

#include <memory>
#include <string>
#include <vector>

#include "semex/annotate/annotate.hpp"
#include "semex/annotate/prompt.hpp"
#include "semex/replay/store.hpp"

namespace semex::annotate {

struct EndpointConfig {
  std::string url = "http://127.0.0.1:8080";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "annotator";
  double temperature = 0.2;
  // Name of the environment variable holding the bearer token. The credential
  // itself is never accepted through flags or config files.
  std::string api_key_env = "SEMEX_API_KEY";
  int timeout_ms = 30000;
  int max_attempts = 3;   // total tries per request
  int backoff_ms = 250;   // first retry delay, doubles per retry
  int workers = 4;        // parallel in-flight requests
};

struct ChatResult {
  bool ok = false;
  int status = 0;        // last HTTP status, 0 for transport failure
  std::string content;   // assistant text when ok
  std::string error;     // human-readable failure reason
  int retries = 0;
};

// Minimal chat-completions client. Retries transport failures, HTTP 429 and
// 5xx with exponential backoff; 401/403 fail immediately.
class ChatClient {
 public:
  explicit ChatClient(const EndpointConfig& cfg);
  ~ChatClient();
  ChatClient(ChatClient&&) noexcept;
  ChatClient& operator=(ChatClient&&) noexcept;

  ChatResult complete(const std::vector<ChatMessage>& messages);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RemoteAnnotateConfig {
  EndpointConfig endpoint;
  PromptConfig prompt;
};

// Samples `n` pairs from the store and annotates them over the wire. Pair
// sampling matches oracle_annotate_dataset for the same seed. Results keep
// input order regardless of completion order. Pairs that stay unparseable or
// undeliverable after all attempts fall back to Choice::none and are counted
// in the stats. Throws std::runtime_error if the endpoint rejects the
// credential.
std::pair<std::vector<AnnotatedPair>, AnnotationStats> remote_annotate_dataset(
    const replay::ReplayStore& store, std::size_t n, std::uint64_t seed,
    const RemoteAnnotateConfig& cfg);

}  // namespace semex::annotate
