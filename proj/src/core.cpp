#include "yarnlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "yarnlab/util.hpp"

namespace yarnlab {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    auto [it, inserted] = index_.emplace(tokens_[id], id);
    if (!inserted) throw InvalidVocabularyError("duplicate token: " + tokens_[id]);
  }
  std::string joined;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) joined.push_back('\0');
    joined += tokens_[i];
  }
  fingerprint_ = sha256_hex(joined);
}

std::optional<TokenId> Vocabulary::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NextTokenDistribution NextTokenDistribution::dense(std::string vocab_fingerprint,
                                                   std::vector<double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0 + 1e-12) || !std::isfinite(p))
      throw InvalidDistributionError("dense probability out of [0,1]");
    sum += p;
  }
  if (!probs.empty() && std::abs(sum - 1.0) > 1e-6)
    throw InvalidDistributionError("dense probabilities sum to " + std::to_string(sum));
  NextTokenDistribution d;
  d.is_dense_ = true;
  d.complete_ = true;
  d.vocab_fingerprint_ = std::move(vocab_fingerprint);
  d.probs_ = std::move(probs);
  return d;
}

NextTokenDistribution NextTokenDistribution::sparse_top_k(std::string vocab_fingerprint,
                                                          std::vector<SparseEntry> entries,
                                                          bool complete) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i].logprob))
      throw InvalidDistributionError("non-finite logprob in sparse distribution");
    if (i > 0 && entries[i].logprob > entries[i - 1].logprob)
      throw InvalidDistributionError("sparse entries not sorted by descending logprob");
  }
  // canonicalize equal-logprob runs by ascending id; detect duplicates
  std::stable_sort(entries.begin(), entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.id < b.id;
  });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].id == entries[i - 1].id)
      throw InvalidDistributionError("duplicate token id in sparse distribution");
  }
  NextTokenDistribution d;
  d.is_dense_ = false;
  d.complete_ = complete;
  d.vocab_fingerprint_ = std::move(vocab_fingerprint);
  d.entries_ = std::move(entries);
  return d;
}

const std::vector<double>& NextTokenDistribution::probs() const {
  if (!is_dense_) throw InvalidDistributionError("distribution is sparse, not dense");
  return probs_;
}

const std::vector<SparseEntry>& NextTokenDistribution::entries() const {
  if (is_dense_) throw InvalidDistributionError("distribution is dense, not sparse");
  return entries_;
}

std::size_t NextTokenDistribution::support_size() const {
  return is_dense_ ? probs_.size() : entries_.size();
}

std::vector<double> NextTokenDistribution::to_dense(std::size_t vocab_size) const {
  if (is_dense_) {
    if (probs_.size() != vocab_size)
      throw DimensionMismatchError("dense distribution size differs from vocabulary size");
    return probs_;
  }
  if (!complete_)
    throw UnsupportedError("sparse distribution with complete=false cannot be densified");
  std::vector<double> out(vocab_size, 0.0);
  double sum = 0.0;
  for (const auto& e : entries_) {
    if (e.id >= vocab_size) throw DimensionMismatchError("sparse entry id beyond vocabulary size");
    out[e.id] = std::exp(e.logprob);
    sum += out[e.id];
  }
  if (sum <= 0.0) throw InvalidDistributionError("sparse distribution has zero mass");
  for (auto& p : out) p /= sum;
  return out;
}

TokenId argmax(const NextTokenDistribution& dist) {
  if (dist.support_size() == 0) throw EmptyDistributionError();
  if (dist.is_dense()) {
    const auto& p = dist.probs();
    TokenId best = 0;
    for (TokenId i = 1; i < p.size(); ++i) {
      if (p[i] > p[best]) best = i;
    }
    return best;
  }
  // entries are canonical: (logprob desc, id asc)
  return dist.entries().front().id;
}

TopKResult top_k(const NextTokenDistribution& dist, std::size_t k) {
  if (k < 1) throw Error("top_k requires K >= 1");
  if (dist.support_size() == 0) throw EmptyDistributionError();
  TopKResult result;
  if (dist.is_dense()) {
    const auto& p = dist.probs();
    std::vector<TokenId> order(p.size());
    std::iota(order.begin(), order.end(), TokenId{0});
    std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
      if (p[a] != p[b]) return p[a] > p[b];
      return a < b;
    });
    std::size_t take = std::min(k, order.size());
    result.ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    result.truncated = take < k;
  } else {
    const auto& entries = dist.entries();
    std::size_t take = std::min(k, entries.size());
    result.ids.reserve(take);
    for (std::size_t i = 0; i < take; ++i) result.ids.push_back(entries[i].id);
    result.truncated = take < k;
  }
  return result;
}

std::optional<std::size_t> rank_of(const NextTokenDistribution& dist, TokenId id) {
  if (dist.support_size() == 0) throw EmptyDistributionError();
  if (dist.is_dense()) {
    const auto& p = dist.probs();
    if (id >= p.size()) return std::nullopt;
    std::size_t rank = 1;
    for (TokenId i = 0; i < p.size(); ++i) {
      if (i == id) continue;
      if (p[i] > p[id] || (p[i] == p[id] && i < id)) ++rank;
    }
    return rank;
  }
  const auto& entries = dist.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].id == id) return i + 1;
  }
  return std::nullopt;
}

std::vector<double> clamp_normalize(std::vector<double> probs, double eps) {
  if (eps <= 0.0) throw Error("clamp_normalize requires eps > 0");
  double sum = 0.0;
  for (auto& p : probs) {
    if (p < eps) p = eps;
    sum += p;
  }
  if (sum > 0.0) {
    for (auto& p : probs) p /= sum;
  }
  return probs;
}

std::string render_instruction(std::string_view tmpl,
                               const std::map<std::string, std::string>& fields) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    char c = tmpl[i];
    if (c == '{') {
      std::size_t close = tmpl.find('}', i + 1);
      if (close == std::string_view::npos) {
        out += tmpl.substr(i);  // unclosed brace: literal remainder
        break;
      }
      std::string name(tmpl.substr(i + 1, close - i - 1));
      auto it = fields.find(name);
      if (it == fields.end()) throw MissingFieldError(name);
      out += it->second;
      i = close + 1;
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

InstructionInput InstructionInput::make(std::string tmpl, std::map<std::string, std::string> fields) {
  InstructionInput input;
  input.rendered = render_instruction(tmpl, fields);
  input.template_text = std::move(tmpl);
  input.fields = std::move(fields);
  return input;
}

}  // namespace yarnlab
