#include "yarnlab/decode.hpp"

#include <algorithm>
#include <cmath>

#include "yarnlab/util.hpp"

namespace yarnlab::decode {

namespace {

double prob_of(const NextTokenDistribution& dist, TokenId id) {
  if (dist.is_dense()) return dist.probs().at(id);
  for (const auto& e : dist.entries()) {
    if (e.id == id) return std::exp(e.logprob);
  }
  return 0.0;
}

TokenId sample_top_k(const NextTokenDistribution& dist, const DecodeConfig& config, Rng& rng) {
  const auto candidates = top_k(dist, static_cast<std::size_t>(std::max(1, config.sample_top_k)));
  std::vector<double> weights;
  weights.reserve(candidates.ids.size());
  double sum = 0.0;
  for (TokenId id : candidates.ids) {
    const double p = prob_of(dist, id);
    const double w = p > 0.0 ? std::pow(p, 1.0 / config.temperature) : 0.0;
    weights.push_back(w);
    sum += w;
  }
  if (sum <= 0.0) return candidates.ids.front();
  double r = rng.uniform_real() * sum;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    r -= weights[i];
    if (r <= 0.0) return candidates.ids[i];
  }
  return candidates.ids.back();
}

// Token ids of the prior: each prior text must map into the vocabulary.
TokenSeq bind_prior(lm::LmProvider& provider, const priors::PriorTokens& prior) {
  TokenSeq ids;
  ids.vocab_fingerprint = provider.vocab_fingerprint();
  const auto& vocab = provider.vocabulary();
  for (const auto& text : prior.texts) {
    for (const auto& word : split_whitespace(text)) {
      auto id = vocab.id_of(word);
      if (!id)
        throw TokenizationMismatchError("prior token outside provider vocabulary: " + word);
      ids.ids.push_back(*id);
    }
  }
  return ids;
}

// Longest suffix (in tokens) whose detokenization ends with any stop
// sequence; returns the number of trailing tokens to drop, 0 for no match.
std::size_t stop_match_tokens(lm::LmProvider& provider, const TokenSeq& tokens,
                              const std::vector<std::string>& stops) {
  if (stops.empty() || tokens.ids.empty()) return 0;
  const std::string text = provider.detokenize(tokens);
  for (const auto& stop : stops) {
    if (stop.empty() || stop.size() > text.size()) continue;
    if (text.compare(text.size() - stop.size(), stop.size(), stop) != 0) continue;
    // drop whole tokens overlapping the matched suffix
    const std::size_t match_begin = text.size() - stop.size();
    TokenSeq kept;
    kept.vocab_fingerprint = tokens.vocab_fingerprint;
    std::size_t drop = tokens.ids.size();
    for (std::size_t keep = tokens.ids.size(); keep-- > 0;) {
      kept.ids.assign(tokens.ids.begin(), tokens.ids.begin() + static_cast<std::ptrdiff_t>(keep));
      const std::string prefix_text = provider.detokenize(kept);
      if (prefix_text.size() <= match_begin) {
        drop = tokens.ids.size() - keep;
        break;
      }
    }
    return drop;
  }
  return 0;
}

}  // namespace

Hypothesis decode_with_prior(lm::LmProvider& provider, const std::string& instruction,
                             const priors::PriorTokens& prior, const DecodeConfig& config) {
  if (config.max_new_tokens < 1) throw Error("max_new_tokens must be >= 1");
  if (config.strategy == Strategy::TopKSample && config.temperature <= 0.0)
    throw Error("sampling temperature must be > 0");

  Hypothesis hyp;
  hyp.prior = prior;
  hyp.continuation.vocab_fingerprint = provider.vocab_fingerprint();

  TokenSeq context = provider.tokenize(instruction);
  const TokenSeq prior_ids = bind_prior(provider, prior);
  hyp.prior.ids = prior_ids;

  // Forced prior steps: record the probability the model assigned to each
  // forced token before appending it.
  for (TokenId id : prior_ids.ids) {
    const auto dist = provider.next_distribution(context);
    hyp.step_probs.push_back(prob_of(dist, id));
    context.ids.push_back(id);
  }

  const auto eos = provider.eos_id();
  Rng rng(config.seed);
  TokenSeq emitted = prior_ids;  // prior + continuation, for stop matching
  bool stopped = false;
  for (int step = 0; step < config.max_new_tokens && !stopped; ++step) {
    const auto dist = provider.next_distribution(context);
    const TokenId next = config.strategy == Strategy::Greedy
                             ? argmax(dist)
                             : sample_top_k(dist, config, rng);
    if (eos && next == *eos) break;
    hyp.step_probs.push_back(prob_of(dist, next));
    hyp.continuation.ids.push_back(next);
    context.ids.push_back(next);
    emitted.ids.push_back(next);

    const std::size_t drop = stop_match_tokens(provider, emitted, config.stop_sequences);
    if (drop > 0) {
      const std::size_t keep_cont = hyp.continuation.ids.size() >= drop
                                        ? hyp.continuation.ids.size() - drop
                                        : 0;
      hyp.continuation.ids.resize(keep_cont);
      hyp.step_probs.resize(prior_ids.ids.size() + keep_cont);
      emitted.ids.resize(prior_ids.ids.size() + keep_cont);
      stopped = true;
    }
  }

  hyp.full_text = provider.detokenize(emitted);
  return hyp;
}

Hypothesis decode_plain(lm::LmProvider& provider, const std::string& instruction,
                        const DecodeConfig& config) {
  priors::PriorTokens none;
  none.source_tag = "none";
  return decode_with_prior(provider, instruction, none, config);
}

}  // namespace yarnlab::decode
