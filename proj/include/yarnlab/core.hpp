#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "yarnlab/errors.hpp"

namespace yarnlab {

using TokenId = std::uint32_t;

// Immutable ordered token list with a content fingerprint. Two providers may
// be compared only when their fingerprints are equal.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<TokenId> id_of(std::string_view token) const;
  // Lowercase hex SHA-256 over the token strings joined by a 0x00 byte, in id order.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::string fingerprint_;
};

struct TokenSeq {
  std::vector<TokenId> ids;
  std::string vocab_fingerprint;

  bool empty() const { return ids.empty(); }
  std::size_t size() const { return ids.size(); }
};

struct SparseEntry {
  TokenId id;
  double logprob;
};

// Next-token distribution over a vocabulary, either dense probabilities per
// id or a sparse top-K list of (id, logprob). Sparse lists keep logprobs
// because inference servers natively emit them; conversion to probabilities
// happens at analysis time.
class NextTokenDistribution {
 public:
  static NextTokenDistribution dense(std::string vocab_fingerprint, std::vector<double> probs);
  static NextTokenDistribution sparse_top_k(std::string vocab_fingerprint,
                                            std::vector<SparseEntry> entries, bool complete);

  bool is_dense() const { return is_dense_; }
  const std::vector<double>& probs() const;
  const std::vector<SparseEntry>& entries() const;
  // For sparse form: whether the entry list covers the full support.
  bool complete() const { return complete_; }
  const std::string& vocab_fingerprint() const { return vocab_fingerprint_; }
  std::size_t support_size() const;

  // Dense probabilities over [0, vocab_size). Sparse form requires complete=true.
  std::vector<double> to_dense(std::size_t vocab_size) const;

 private:
  NextTokenDistribution() = default;
  bool is_dense_ = false;
  bool complete_ = true;
  std::string vocab_fingerprint_;
  std::vector<double> probs_;
  std::vector<SparseEntry> entries_;
};

struct TopKResult {
  std::vector<TokenId> ids;  // probability-descending, ties by lowest id
  bool truncated = false;    // support was smaller than the requested K
};

// Highest-probability token id; ties broken by lowest id.
TokenId argmax(const NextTokenDistribution& dist);

// K highest-probability ids, probability-descending, ties by lowest id.
TopKResult top_k(const NextTokenDistribution& dist, std::size_t k);

// 1-based rank of `id` under the (probability desc, id asc) order.
// nullopt when the id is absent from an incomplete sparse support.
std::optional<std::size_t> rank_of(const NextTokenDistribution& dist, TokenId id);

// Floors every probability at eps, then renormalizes to sum 1.
std::vector<double> clamp_normalize(std::vector<double> probs, double eps);

// Substitutes {name} placeholders verbatim; unbound placeholders raise
// MissingFieldError.
std::string render_instruction(std::string_view tmpl,
                               const std::map<std::string, std::string>& fields);

struct InstructionInput {
  std::string template_text;
  std::map<std::string, std::string> fields;
  std::string rendered;

  static InstructionInput make(std::string tmpl, std::map<std::string, std::string> fields);
};

}  // namespace yarnlab
