#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "yarnlab/lm.hpp"

namespace yarnlab::analysis {

struct AgreementRecord {
  std::size_t prefix_id = 0;
  TokenId y_sft = 0;
  // 1-based rank of y_sft in the foundation model's distribution; 0 when the
  // rank is unknown (sparse support did not contain the token).
  std::size_t rank = 0;
};

struct AgreementReport {
  std::string setup;  // "without_prior" | "with_prior"
  std::vector<std::size_t> ks;
  std::map<std::size_t, double> agreement;  // K -> fraction in [0,1]
  std::size_t length = 0;
  std::vector<AgreementRecord> records;
};

struct Divergence {
  double kl = 0.0;
  double js = 0.0;
  double ce = 0.0;
};

struct DivergenceReport {
  std::vector<Divergence> per_example;
  Divergence mean;
  double epsilon = 0.0;
};

// Fraction of prefixes whose SFT argmax token lies in the foundation model's
// top-K candidates, for each K. When inject_sft_first_token is set, every
// prefix is first extended by the SFT model's greedy first token.
AgreementReport agreement_at_k(lm::LmProvider& pt_provider, lm::LmProvider& sft_provider,
                               const std::vector<TokenSeq>& prefixes,
                               const std::vector<std::size_t>& ks, bool inject_sft_first_token,
                               const std::string& setup_tag);

// KL(P_SFT || P_PT), JS, and cross-entropy in nats, computed after both
// distributions are clamp-normalized with eps.
Divergence divergence(const std::vector<double>& p_sft, const std::vector<double>& p_pt,
                      double eps);

DivergenceReport dataset_divergence(lm::LmProvider& pt_provider, lm::LmProvider& sft_provider,
                                    const std::vector<TokenSeq>& prefixes,
                                    bool inject_sft_first_token, double eps);

// Probability mass the provider assigns to its own argmax token, per prefix.
std::vector<double> chosen_prob_trace(lm::LmProvider& provider,
                                      const std::vector<TokenSeq>& prefixes);

double entropy(const std::vector<double>& probs);

}  // namespace yarnlab::analysis
