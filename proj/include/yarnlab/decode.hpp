#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "yarnlab/lm.hpp"
#include "yarnlab/priors.hpp"

namespace yarnlab::decode {

enum class Strategy { Greedy, TopKSample };

struct DecodeConfig {
  Strategy strategy = Strategy::Greedy;
  int sample_top_k = 40;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_new_tokens = 16;
  std::vector<std::string> stop_sequences;
};

struct Hypothesis {
  priors::PriorTokens prior;
  TokenSeq continuation;
  std::string full_text;  // detokenized prior + continuation
  // Model probability of each kept token (forced prior tokens first, then
  // generated tokens), as reported by the provider at that step.
  std::vector<double> step_probs;
};

// Appends the prior to the tokenized instruction and resumes generation from
// the provider. Stops at end-of-sequence, a stop sequence, or max_new_tokens.
// Prior token strings outside the provider vocabulary raise
// TokenizationMismatchError.
Hypothesis decode_with_prior(lm::LmProvider& provider, const std::string& instruction,
                             const priors::PriorTokens& prior, const DecodeConfig& config);

// decode_with_prior with an empty prior.
Hypothesis decode_plain(lm::LmProvider& provider, const std::string& instruction,
                        const DecodeConfig& config);

}  // namespace yarnlab::decode
