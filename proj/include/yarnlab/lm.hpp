#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "yarnlab/core.hpp"

namespace yarnlab::lm {

inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kUnkToken = "<unk>";

// Contract fulfilled by both in-process models and remote clients: context in,
// next-token distribution out. next_distribution must be deterministic for a
// fixed provider state and context, and the returned distribution's
// fingerprint must equal the provider vocabulary's fingerprint.
class LmProvider {
 public:
  virtual ~LmProvider() = default;

  virtual std::string vocab_fingerprint() = 0;
  virtual std::size_t vocab_size() = 0;
  virtual const Vocabulary& vocabulary() = 0;
  virtual TokenSeq tokenize(const std::string& text) = 0;
  virtual std::string detokenize(const TokenSeq& seq) = 0;
  virtual NextTokenDistribution next_distribution(const TokenSeq& context) = 0;
  virtual std::optional<TokenId> eos_id() = 0;
};

struct NGramOptions {
  int order = 3;
  double alpha = 0.01;
  std::vector<double> lambdas;  // empty = uniform over orders
};

// Interpolated add-alpha n-gram model:
//   P(y|ctx) = sum_m lambda_m * (count_m(ctx_m, y) + alpha) / (total_m(ctx_m) + alpha*|V|)
// where ctx_m is the last m-1 tokens, BOS-padded on the left. Immutable after
// build and safe to share across threads.
class NGramLm final : public LmProvider {
 public:
  std::string vocab_fingerprint() override { return vocab_->fingerprint(); }
  std::size_t vocab_size() override { return vocab_->size(); }
  const Vocabulary& vocabulary() override { return *vocab_; }

  // Whitespace tokenizer; unknown words map to the <unk> token.
  TokenSeq tokenize(const std::string& text) override;
  std::string detokenize(const TokenSeq& seq) override;
  NextTokenDistribution next_distribution(const TokenSeq& context) override;
  std::optional<TokenId> eos_id() override { return eos_id_; }

  int order() const { return options_.order; }
  const NGramOptions& options() const { return options_; }
  std::shared_ptr<const Vocabulary> vocabulary_ptr() const { return vocab_; }

 private:
  friend NGramLm build_ngram(const std::vector<std::vector<std::string>>&, const NGramOptions&,
                             std::shared_ptr<const Vocabulary>);

  struct ContextRow {
    std::unordered_map<TokenId, std::uint32_t> counts;
    std::uint64_t total = 0;
  };
  struct KeyHash {
    std::size_t operator()(const std::vector<TokenId>& key) const {
      std::size_t h = 0xcbf29ce484222325ULL;
      for (TokenId id : key) {
        h ^= id;
        h *= 0x100000001b3ULL;
      }
      return h;
    }
  };
  using CountTable = std::unordered_map<std::vector<TokenId>, ContextRow, KeyHash>;

  std::shared_ptr<const Vocabulary> vocab_;
  NGramOptions options_;
  std::vector<double> lambdas_;       // resolved, one per order
  std::vector<CountTable> tables_;    // index m-1 for order m
  TokenId bos_id_ = 0;
  TokenId eos_id_ = 0;
  TokenId unk_id_ = 0;
};

// Builds an n-gram model over tokenized lines. The vocabulary is every corpus
// token plus the reserved boundary/unknown tokens, or the given shared
// vocabulary (which must cover the reserved tokens).
NGramLm build_ngram(const std::vector<std::vector<std::string>>& corpus, const NGramOptions& options,
                    std::shared_ptr<const Vocabulary> shared_vocab = nullptr);

// Convenience: whitespace-splits raw lines first.
NGramLm build_ngram_from_lines(const std::vector<std::string>& lines, const NGramOptions& options);

// Collects the deterministic vocabulary (reserved tokens first, then corpus
// tokens in order of first appearance) over one or more corpora.
std::shared_ptr<const Vocabulary> collect_vocabulary(
    const std::vector<const std::vector<std::vector<std::string>>*>& corpora);

// Appends up to `steps` greedy argmax tokens; stops early at end-of-sequence.
// A context already ending at end-of-sequence yields an empty continuation.
TokenSeq greedy_continue(LmProvider& provider, const TokenSeq& context, int steps);

}  // namespace yarnlab::lm
