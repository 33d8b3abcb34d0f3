#include "semex/annotate/mock_server.hpp"

#include <chrono>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semex/annotate/annotate.hpp"
#include "semex/annotate/prompt.hpp"

namespace semex::annotate {

namespace {
using nlohmann::json;

std::string completion_body(const std::string& content) {
  return json{{"id", "mock"},
              {"object", "chat.completion"},
              {"choices",
               json::array({json{{"index", 0},
                                 {"message", {{"role", "assistant"}, {"content", content}}},
                                 {"finish_reason", "stop"}}})}}
      .dump();
}

std::string error_body(const std::string& message) {
  return json{{"error", {{"message", message}}}}.dump();
}

}  // namespace

struct MockVlmServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mu;
  MockBehavior behavior;
  std::size_t requests = 0;
  std::size_t reply_cursor = 0;
  std::size_t status_cursor = 0;
  std::string last_body;

  void handle(const httplib::Request& req, httplib::Response& res) {
    MockBehavior b;
    int scripted_status = 200;
    int latency = 0;
    {
      std::lock_guard<std::mutex> lock(mu);
      ++requests;
      last_body = req.body;
      b = behavior;
      latency = b.latency_ms;
      if (status_cursor < b.status_script.size())
        scripted_status = b.status_script[status_cursor++];
    }
    if (latency > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency));

    if (b.require_auth) {
      const std::string auth = req.get_header_value("Authorization");
      if (auth.rfind("Bearer ", 0) != 0 || auth.size() <= 7) {
        res.status = 401;
        res.set_content(error_body("missing or invalid credential"), "application/json");
        return;
      }
    }
    if (scripted_status != 200) {
      res.status = scripted_status;
      res.set_content(error_body("scripted status"), "application/json");
      return;
    }

    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(error_body("request body is not JSON"), "application/json");
      return;
    }
    if (!body.contains("model") || !body.contains("messages") ||
        !body["messages"].is_array() || body["messages"].empty()) {
      res.status = 400;
      res.set_content(error_body("need model and non-empty messages"), "application/json");
      return;
    }

    std::string reply;
    switch (b.mode) {
      case MockBehavior::Mode::fixed:
        reply = b.fixed_text;
        break;
      case MockBehavior::Mode::queue: {
        std::lock_guard<std::mutex> lock(mu);
        if (reply_cursor >= behavior.scripted_replies.size()) {
          res.status = 500;
          res.set_content(error_body("scripted replies exhausted"), "application/json");
          return;
        }
        reply = behavior.scripted_replies[reply_cursor++];
        break;
      }
      case MockBehavior::Mode::oracle: {
        const std::string content =
            body["messages"].back().value("content", std::string());
        if (!looks_like_pair_prompt(content)) {
          reply = "Understood.";
          break;
        }
        try {
          const ParsedPairPrompt p = parse_pair_prompt(content);
          reply = digit_for_choice(oracle_annotate(p.a, p.b));
        } catch (const std::invalid_argument& e) {
          res.status = 400;
          res.set_content(error_body(std::string("unparseable prompt: ") + e.what()),
                          "application/json");
          return;
        }
        break;
      }
    }
    res.status = 200;
    res.set_content(completion_body(reply), "application/json");
  }
};

MockVlmServer::MockVlmServer() : impl_(std::make_unique<Impl>()) {}

MockVlmServer::~MockVlmServer() { stop(); }

void MockVlmServer::start(const MockBehavior& behavior) {
  if (impl_->thread.joinable()) throw std::logic_error("mock server already running");
  impl_->behavior = behavior;
  impl_->server.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                       impl_->handle(req, res);
                     });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("mock server failed to bind");
  impl_->thread = std::thread([this]() { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockVlmServer::stop() {
  if (!impl_) return;
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

std::string MockVlmServer::url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

int MockVlmServer::port() const { return impl_->port; }

std::size_t MockVlmServer::request_count() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->requests;
}

std::string MockVlmServer::last_request_body() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->last_body;
}

void MockVlmServer::set_behavior(const MockBehavior& behavior) {
  std::lock_guard<std::mutex> lock(impl_->mu);
  impl_->behavior = behavior;
  impl_->reply_cursor = 0;
  impl_->status_cursor = 0;
}

}  // namespace semex::annotate
