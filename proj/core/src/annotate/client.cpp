#include "semex/annotate/client.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "semex/util/hash.hpp"

namespace semex::annotate {

namespace {

using nlohmann::json;

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

bool auth_status(int status) { return status == 401 || status == 403; }

}  // namespace

struct ChatClient::Impl {
  EndpointConfig cfg;
  httplib::Client http;
  std::string bearer;

  explicit Impl(const EndpointConfig& c) : cfg(c), http(c.url) {
    http.set_connection_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    http.set_read_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    http.set_write_timeout(std::chrono::milliseconds(cfg.timeout_ms));
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
      bearer = std::string("Bearer ") + key;
  }
};

ChatClient::ChatClient(const EndpointConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
ChatClient::~ChatClient() = default;
ChatClient::ChatClient(ChatClient&&) noexcept = default;
ChatClient& ChatClient::operator=(ChatClient&&) noexcept = default;

ChatResult ChatClient::complete(const std::vector<ChatMessage>& messages) {
  json body{{"model", impl_->cfg.model},
            {"temperature", impl_->cfg.temperature},
            {"messages", json::array()}};
  for (const ChatMessage& m : messages)
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!impl_->bearer.empty()) headers.emplace("Authorization", impl_->bearer);

  ChatResult res;
  int delay = impl_->cfg.backoff_ms;
  for (int attempt = 1; attempt <= impl_->cfg.max_attempts; ++attempt) {
    auto r = impl_->http.Post(impl_->cfg.path, headers, payload, "application/json");
    if (!r) {
      res.status = 0;
      res.error = "transport: " + httplib::to_string(r.error());
    } else {
      res.status = r->status;
      if (r->status == 200) {
        try {
          const json j = json::parse(r->body);
          res.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
          res.ok = true;
          res.error.clear();
          return res;
        } catch (const json::exception& e) {
          res.error = std::string("malformed response body: ") + e.what();
        }
      } else if (auth_status(r->status)) {
        res.error = "endpoint rejected credential (HTTP " + std::to_string(r->status) + ")";
        return res;
      } else {
        res.error = "HTTP " + std::to_string(r->status);
      }
    }
    if (attempt < impl_->cfg.max_attempts) {
      if (res.status != 0 && !retryable_status(res.status) && res.error.rfind("malformed", 0) != 0)
        break;  // non-retryable 4xx
      ++res.retries;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay *= 2;
    }
  }
  return res;
}

std::pair<std::vector<AnnotatedPair>, AnnotationStats> remote_annotate_dataset(
    const replay::ReplayStore& store, std::size_t n, std::uint64_t seed,
    const RemoteAnnotateConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  const auto refs = store.sample_pairs(n, rng);

  std::string cached_context;
  if (cfg.prompt.multi_turn) {
    ChatClient client(cfg.endpoint);
    ChatResult ctx = client.complete({{"user", context_request_text()}});
    if (!ctx.ok && auth_status(ctx.status)) throw std::runtime_error(ctx.error);
    if (ctx.ok) cached_context = ctx.content;
  }

  std::vector<AnnotatedPair> out(n);
  AnnotationStats stats;
  stats.requested = n;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> auth_failed{false};
  std::mutex stats_mu;
  std::string auth_error;

  auto worker = [&]() {
    ChatClient client(cfg.endpoint);
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || auth_failed.load()) return;

      const auto& [ra, rb] = refs[i];
      AnnotatedPair& p = out[i];
      p.a_ref = ra;
      p.b_ref = rb;
      p.a = store.obs(ra);
      p.b = store.obs(rb);
      p.annotator = "remote:" + cfg.endpoint.model;

      // Optional order randomization to cancel position bias; the stored
      // choice is always expressed in (a, b) order.
      bool swapped = false;
      if (cfg.prompt.randomize_order) swapped = (mix64(seed, i) & 1) != 0;
      const grid::Observation& first = swapped ? p.b : p.a;
      const grid::Observation& second = swapped ? p.a : p.b;
      const auto msgs = build_messages(first, second, cfg.prompt, cached_context);

      const auto q0 = std::chrono::steady_clock::now();
      std::optional<Choice> choice;
      int retries = 0, http_errors = 0;
      std::string raw;
      for (int attempt = 0; attempt < cfg.endpoint.max_attempts && !choice; ++attempt) {
        ChatResult r = client.complete(msgs);
        retries += r.retries;
        if (!r.ok) {
          if (auth_status(r.status)) {
            std::lock_guard<std::mutex> lock(stats_mu);
            auth_error = r.error;
            auth_failed.store(true);
            return;
          }
          ++http_errors;
          raw = r.error;
          continue;
        }
        raw = r.content;
        choice = parse_annotation_response(r.content);
      }
      p.latency_ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - q0)
                                          .count());
      p.raw = raw;

      std::lock_guard<std::mutex> lock(stats_mu);
      stats.transport_retries += static_cast<std::size_t>(retries);
      stats.http_errors += static_cast<std::size_t>(http_errors);
      if (choice) {
        p.choice = swapped ? flip_choice(*choice) : *choice;
      } else {
        p.choice = Choice::none;
        ++stats.parse_failures;
      }
      stats.tally(p.choice);
    }
  };

  const int workers = std::max(1, cfg.endpoint.workers);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  if (auth_failed.load()) throw std::runtime_error(auth_error);

  stats.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return {std::move(out), stats};
}

}  // namespace semex::annotate
