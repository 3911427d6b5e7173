#include "yarnlab/remote.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "yarnlab/util.hpp"

namespace yarnlab::lm {

using nlohmann::json;

namespace {

class Semaphore {
 public:
  explicit Semaphore(int count) : count_(count) {}
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return count_ > 0; });
    --count_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int count_;
};

struct SlotGuard {
  Semaphore& sem;
  explicit SlotGuard(Semaphore& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
};

bool is_timeout(httplib::Error err) {
  return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
         err == httplib::Error::Write;
}

}  // namespace

struct RemoteLm::Impl {
  RemoteLmOptions options;
  Semaphore slots;
  std::mutex state_mutex;
  std::string fingerprint;
  std::size_t size = 0;
  bool contacted = false;
  std::atomic<bool> failed{false};
  std::shared_ptr<const Vocabulary> vocab;
  std::optional<TokenId> eos;
  std::optional<TokenId> unk;

  explicit Impl(RemoteLmOptions opts) : options(std::move(opts)), slots(options.max_in_flight) {
    if (options.bearer_token.empty()) {
      if (const char* env = std::getenv("YARNLAB_LM_TOKEN")) options.bearer_token = env;
    }
  }

  httplib::Headers headers() const {
    httplib::Headers h;
    if (!options.bearer_token.empty())
      h.emplace("Authorization", "Bearer " + options.bearer_token);
    return h;
  }

  void check_not_failed() const {
    if (failed.load())
      throw VocabMismatchError(fingerprint, "<provider in failed state>");
  }

  // One request with retry on transport failures and 5xx responses.
  json request(const std::string& path, const std::optional<std::string>& body) {
    check_not_failed();
    SlotGuard guard(slots);
    int backoff = options.backoff_ms;
    httplib::Error last_err = httplib::Error::Success;
    int last_status = 0;
    std::string last_body;
    for (int attempt = 0; attempt < options.attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff *= 2;
      }
      httplib::Client client(options.base_url);
      client.set_connection_timeout(0, options.timeout_ms * 1000);
      client.set_read_timeout(0, options.timeout_ms * 1000);
      client.set_write_timeout(0, options.timeout_ms * 1000);
      httplib::Result res =
          body ? client.Post(path, headers(), *body, "application/json")
               : client.Get(path, headers());
      if (!res) {
        last_err = res.error();
        last_status = 0;
        continue;
      }
      if (res->status >= 500) {
        last_status = res->status;
        last_body = res->body;
        continue;
      }
      if (res->status != 200) {
        std::string detail = res->body;
        json err = json::parse(res->body, nullptr, false);
        if (err.is_object() && err.contains("error")) detail = err["error"].get<std::string>();
        throw TransportError(res->status, detail);
      }
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) throw MalformedError("response is not valid JSON");
      return parsed;
    }
    if (last_status >= 500) throw TransportError(last_status, last_body);
    if (is_timeout(last_err)) throw TimeoutError(options.base_url + path);
    throw TransportError(0, "connection to " + options.base_url + " failed");
  }

  void ensure_contacted() {
    std::lock_guard lock(state_mutex);
    if (contacted) return;
    json v = request("/v1/vocab", std::nullopt);
    if (!v.is_object() || !v.contains("fingerprint") || !v.contains("size") ||
        !v["fingerprint"].is_string() || !v["size"].is_number_unsigned())
      throw MalformedError("vocab response missing or mistyped fields");
    fingerprint = v["fingerprint"].get<std::string>();
    size = v["size"].get<std::size_t>();
    contacted = true;
  }

  json fetch_distribution(const TokenSeq& context, std::optional<int> top_k) {
    ensure_contacted();
    if (!context.vocab_fingerprint.empty() && context.vocab_fingerprint != fingerprint)
      throw VocabMismatchError(fingerprint, context.vocab_fingerprint);
    json body;
    body["prefix_tokens"] = context.ids;
    if (top_k) body["top_k"] = *top_k;
    json res = request("/v1/distribution", body.dump());
    if (!res.is_object() || !res.contains("vocab_fingerprint") || !res.contains("entries") ||
        !res.contains("complete") || !res["vocab_fingerprint"].is_string() ||
        !res["entries"].is_array() || !res["complete"].is_boolean())
      throw MalformedError("distribution response missing or mistyped fields");
    const std::string got = res["vocab_fingerprint"].get<std::string>();
    if (got != fingerprint) {
      failed.store(true);
      throw VocabMismatchError(fingerprint, got);
    }
    return res;
  }

  NextTokenDistribution parse_distribution(const json& res) try {
    std::vector<SparseEntry> entries;
    entries.reserve(res["entries"].size());
    for (const auto& e : res["entries"]) {
      if (!e.is_object() || !e.contains("id") || !e.contains("logprob") ||
          !e["id"].is_number_unsigned() || !e["logprob"].is_number())
        throw MalformedError("distribution entry missing or mistyped fields");
      entries.push_back({e["id"].get<TokenId>(), e["logprob"].get<double>()});
    }
    return NextTokenDistribution::sparse_top_k(fingerprint, std::move(entries),
                                               res["complete"].get<bool>());
  } catch (const json::exception& e) {
    throw MalformedError(std::string("distribution response: ") + e.what());
  }

  void ensure_vocabulary() {
    ensure_contacted();
    {
      std::lock_guard lock(state_mutex);
      if (vocab) return;
    }
    TokenSeq empty;
    empty.vocab_fingerprint = fingerprint;
    json res = fetch_distribution(empty, std::nullopt);
    if (!res["complete"].get<bool>() || res["entries"].size() != size)
      throw UnsupportedError("server does not expose its full support; cannot reconstruct vocabulary");
    std::vector<std::string> tokens(size);
    std::vector<bool> seen(size, false);
    for (const auto& e : res["entries"]) {
      if (!e.contains("token")) throw MalformedError("distribution entry lacks token string");
      auto id = e["id"].get<std::size_t>();
      if (id >= size || seen[id]) throw MalformedError("distribution entry ids do not cover 0..size-1");
      tokens[id] = e["token"].get<std::string>();
      seen[id] = true;
    }
    auto built = std::make_shared<Vocabulary>(std::move(tokens));
    if (built->fingerprint() != fingerprint) {
      failed.store(true);
      throw VocabMismatchError(fingerprint, built->fingerprint());
    }
    std::lock_guard lock(state_mutex);
    if (!vocab) {
      vocab = std::move(built);
      eos = vocab->id_of(kEosToken);
      unk = vocab->id_of(kUnkToken);
    }
  }
};

RemoteLm::RemoteLm(RemoteLmOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

RemoteLm::~RemoteLm() = default;

std::string RemoteLm::vocab_fingerprint() {
  impl_->ensure_contacted();
  return impl_->fingerprint;
}

std::size_t RemoteLm::vocab_size() {
  impl_->ensure_contacted();
  return impl_->size;
}

const Vocabulary& RemoteLm::vocabulary() {
  impl_->ensure_vocabulary();
  return *impl_->vocab;
}

TokenSeq RemoteLm::tokenize(const std::string& text) {
  impl_->ensure_vocabulary();
  TokenSeq seq;
  seq.vocab_fingerprint = impl_->fingerprint;
  for (const auto& word : split_whitespace(text)) {
    auto id = impl_->vocab->id_of(word);
    if (!id) {
      if (!impl_->unk) throw TokenizationMismatchError("word outside remote vocabulary: " + word);
      id = impl_->unk;
    }
    seq.ids.push_back(*id);
  }
  return seq;
}

std::string RemoteLm::detokenize(const TokenSeq& seq) {
  impl_->ensure_vocabulary();
  std::vector<std::string> words;
  words.reserve(seq.ids.size());
  for (TokenId id : seq.ids) {
    if (id >= impl_->vocab->size())
      throw TokenizationMismatchError("token id beyond remote vocabulary size");
    words.push_back(impl_->vocab->token(id));
  }
  return join_tokens(words);
}

NextTokenDistribution RemoteLm::next_distribution(const TokenSeq& context) {
  return next_distribution(context, impl_->options.default_top_k);
}

NextTokenDistribution RemoteLm::next_distribution(const TokenSeq& context,
                                                  std::optional<int> top_k) {
  json res = impl_->fetch_distribution(context, top_k);
  return impl_->parse_distribution(res);
}

std::optional<TokenId> RemoteLm::eos_id() {
  impl_->ensure_vocabulary();
  return impl_->eos;
}

}  // namespace yarnlab::lm
