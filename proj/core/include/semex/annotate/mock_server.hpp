#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace semex::annotate {

// In-process stand-in for a chat-completions endpoint. Three reply modes:
//   oracle  parse the rendered pair prompt and answer with the rule oracle,
//           which keeps replies content-deterministic under parallel clients
//   fixed   always reply with fixed_text
//   queue   pop scripted_replies front to back; exhausted queue -> HTTP 500
// status_script, when non-empty, overrides the HTTP status of successive
// requests (200 entries fall through to normal handling); used to exercise
// retry paths.
struct MockBehavior {
  enum class Mode { oracle, fixed, queue };
  Mode mode = Mode::oracle;
  std::string fixed_text;
  std::vector<std::string> scripted_replies;
  std::vector<int> status_script;
  bool require_auth = false;  // 401 unless a Bearer token is present
  int latency_ms = 0;
};

class MockVlmServer {
 public:
  MockVlmServer();
  ~MockVlmServer();

  // Binds 127.0.0.1 on an ephemeral port and serves on a background thread.
  void start(const MockBehavior& behavior);
  void stop();

  std::string url() const;  // http://127.0.0.1:<port>
  int port() const;

  std::size_t request_count() const;
  std::string last_request_body() const;
  void set_behavior(const MockBehavior& behavior);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace semex::annotate
