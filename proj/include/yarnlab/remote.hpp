#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "yarnlab/lm.hpp"

namespace yarnlab::lm {

struct RemoteLmOptions {
  std::string base_url;              // e.g. "http://127.0.0.1:8080"
  std::string bearer_token;          // empty = read YARNLAB_LM_TOKEN from the environment
  int timeout_ms = 5000;
  int max_in_flight = 4;
  int attempts = 3;                  // total tries per request
  int backoff_ms = 250;              // doubles after each failed attempt
  std::optional<int> default_top_k;  // request top-k entries instead of full support
};

// Client for the log-probability wire protocol:
//   GET  /v1/vocab        -> {"fingerprint": "<hex>", "size": <int>}
//   POST /v1/distribution -> {"vocab_fingerprint", "entries": [{"id","token","logprob"}], "complete"}
// The vocabulary fingerprint is cached on first contact; any response carrying
// a different fingerprint moves the provider into a failed state.
class RemoteLm final : public LmProvider {
 public:
  explicit RemoteLm(RemoteLmOptions options);
  ~RemoteLm() override;

  std::string vocab_fingerprint() override;
  std::size_t vocab_size() override;

  // The protocol carries no vocabulary dump; the full token list is
  // reconstructed from one complete /v1/distribution response. Servers that
  // only ever return truncated supports cannot back tokenize/detokenize.
  const Vocabulary& vocabulary() override;
  TokenSeq tokenize(const std::string& text) override;
  std::string detokenize(const TokenSeq& seq) override;

  NextTokenDistribution next_distribution(const TokenSeq& context) override;
  NextTokenDistribution next_distribution(const TokenSeq& context, std::optional<int> top_k);
  std::optional<TokenId> eos_id() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace yarnlab::lm
