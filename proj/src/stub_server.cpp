#include "yarnlab/stub_server.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace yarnlab::lm {

using nlohmann::json;

struct StubServer::Impl {
  std::shared_ptr<NGramLm> model;
  StubServerOptions options;
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;
  std::atomic<int> failures_left{0};
  mutable std::mutex body_mutex;
  std::string last_body;

  Impl(std::shared_ptr<NGramLm> m, StubServerOptions opts)
      : model(std::move(m)), options(std::move(opts)) {
    if (options.bearer_token.empty()) {
      if (const char* env = std::getenv("YARNLAB_LM_TOKEN")) options.bearer_token = env;
    }
    failures_left.store(options.inject_500);
  }

  bool authorized(const httplib::Request& req) const {
    if (options.bearer_token.empty()) return true;
    auto it = req.headers.find("Authorization");
    return it != req.headers.end() && it->second == "Bearer " + options.bearer_token;
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    json body;
    body["error"] = msg;
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void handle_vocab(const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) return send_error(res, 401, "unauthorized");
    json body;
    body["fingerprint"] = model->vocab_fingerprint();
    body["size"] = model->vocab_size();
    res.set_content(body.dump(), "application/json");
  }

  void handle_distribution(const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) return send_error(res, 401, "unauthorized");
    {
      std::lock_guard lock(body_mutex);
      last_body = req.body;
    }
    int left = failures_left.load();
    while (left > 0 && !failures_left.compare_exchange_weak(left, left - 1)) {
    }
    if (left > 0) return send_error(res, 500, "injected failure");

    json parsed = json::parse(req.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("prefix_tokens") ||
        !parsed["prefix_tokens"].is_array())
      return send_error(res, 400, "body must be a JSON object with a prefix_tokens array");

    TokenSeq context;
    context.vocab_fingerprint = model->vocab_fingerprint();
    for (const auto& v : parsed["prefix_tokens"]) {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        return send_error(res, 400, "prefix_tokens must contain integers");
      auto id = v.get<long long>();
      if (id < 0 || static_cast<std::size_t>(id) >= model->vocab_size())
        return send_error(res, 400, "token id out of range");
      context.ids.push_back(static_cast<TokenId>(id));
    }
    std::size_t top_k = model->vocab_size();
    if (parsed.contains("top_k")) {
      if (!parsed["top_k"].is_number_integer() && !parsed["top_k"].is_number_unsigned())
        return send_error(res, 400, "top_k must be an integer");
      auto k = parsed["top_k"].get<long long>();
      if (k < 1) return send_error(res, 400, "top_k must be >= 1");
      top_k = std::min<std::size_t>(static_cast<std::size_t>(k), model->vocab_size());
    }

    const auto dist = model->next_distribution(context);
    const auto& probs = dist.probs();
    std::vector<TokenId> order(probs.size());
    std::iota(order.begin(), order.end(), TokenId{0});
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
      if (probs[a] != probs[b]) return probs[a] > probs[b];
      return a < b;
    });

    json entries = json::array();
    for (std::size_t i = 0; i < top_k; ++i) {
      TokenId id = order[i];
      json e;
      e["id"] = id;
      e["token"] = model->vocabulary().token(id);
      e["logprob"] = std::log(probs[id]);
      entries.push_back(std::move(e));
    }
    json body;
    body["vocab_fingerprint"] = options.fingerprint_override.empty()
                                    ? model->vocab_fingerprint()
                                    : options.fingerprint_override;
    body["entries"] = std::move(entries);
    body["complete"] = top_k == model->vocab_size();
    res.set_content(body.dump(), "application/json");
  }
};

StubServer::StubServer(std::shared_ptr<NGramLm> model, StubServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(options))) {}

StubServer::~StubServer() { stop(); }

void StubServer::start() {
  auto* impl = impl_.get();
  impl->server.Get("/v1/vocab", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->handle_vocab(req, res);
  });
  impl->server.Post("/v1/distribution", [impl](const httplib::Request& req, httplib::Response& res) {
    impl->handle_distribution(req, res);
  });

  if (impl->options.port == 0) {
    impl->bound_port = impl->server.bind_to_any_port(impl->options.host);
  } else {
    if (!impl->server.bind_to_port(impl->options.host, impl->options.port))
      throw IoError("cannot bind " + impl->options.host + ":" + std::to_string(impl->options.port));
    impl->bound_port = impl->options.port;
  }
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  while (!impl->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

void StubServer::stop() {
  if (impl_ && impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int StubServer::port() const { return impl_->bound_port; }

std::string StubServer::url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->bound_port);
}

void StubServer::inject_failures(int n) { impl_->failures_left.store(n); }

std::string StubServer::last_request_body() const {
  std::lock_guard lock(impl_->body_mutex);
  return impl_->last_body;
}

}  // namespace yarnlab::lm
