#include "yarnlab/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace yarnlab::analysis {

namespace {

void require_shared_vocab(lm::LmProvider& pt, lm::LmProvider& sft) {
  const std::string pt_fp = pt.vocab_fingerprint();
  const std::string sft_fp = sft.vocab_fingerprint();
  if (pt_fp != sft_fp) throw VocabMismatchError(sft_fp, pt_fp);
}

TokenSeq maybe_inject(lm::LmProvider& sft, const TokenSeq& prefix, bool inject) {
  if (!inject) return prefix;
  TokenSeq extended = prefix;
  extended.ids.push_back(argmax(sft.next_distribution(prefix)));
  return extended;
}

}  // namespace

AgreementReport agreement_at_k(lm::LmProvider& pt_provider, lm::LmProvider& sft_provider,
                               const std::vector<TokenSeq>& prefixes,
                               const std::vector<std::size_t>& ks, bool inject_sft_first_token,
                               const std::string& setup_tag) {
  if (prefixes.empty()) throw EmptyInputError("agreement requires at least one prefix");
  if (ks.empty()) throw Error("agreement requires at least one K");
  if (!std::is_sorted(ks.begin(), ks.end()))
    throw Error("agreement Ks must be ascending");
  require_shared_vocab(pt_provider, sft_provider);

  AgreementReport report;
  report.setup = setup_tag;
  report.ks = ks;
  report.length = prefixes.size();
  report.records.reserve(prefixes.size());
  std::map<std::size_t, std::size_t> hits;
  for (auto k : ks) hits[k] = 0;

  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    TokenSeq prefix = maybe_inject(sft_provider, prefixes[i], inject_sft_first_token);
    const TokenId y_sft = argmax(sft_provider.next_distribution(prefix));
    const auto pt_dist = pt_provider.next_distribution(prefix);
    if (!pt_dist.is_dense() && !pt_dist.complete() && ks.back() > pt_dist.support_size())
      throw UnsupportedError("sparse support smaller than the largest requested K");
    const auto rank = rank_of(pt_dist, y_sft);
    for (auto k : ks) {
      if (rank && *rank <= k) hits[k] += 1;
    }
    report.records.push_back({i, y_sft, rank.value_or(0)});
  }
  double previous = 0.0;
  for (auto k : ks) {
    report.agreement[k] = static_cast<double>(hits[k]) / static_cast<double>(prefixes.size());
    // follows from the top-K prefix chain; checked on every report
    if (report.agreement[k] < previous)
      throw Error("agreement is not monotone in K");
    previous = report.agreement[k];
  }
  return report;
}

Divergence divergence(const std::vector<double>& p_sft, const std::vector<double>& p_pt,
                      double eps) {
  if (p_sft.size() != p_pt.size())
    throw DimensionMismatchError("distributions have different dimensions");
  if (p_sft.empty()) throw EmptyDistributionError();
  const std::vector<double> p = clamp_normalize(p_sft, eps);
  const std::vector<double> q = clamp_normalize(p_pt, eps);

  Divergence d;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d.kl += p[i] * std::log(p[i] / q[i]);
    d.ce -= p[i] * std::log(q[i]);
    const double m = 0.5 * (p[i] + q[i]);
    d.js += 0.5 * p[i] * std::log(p[i] / m) + 0.5 * q[i] * std::log(q[i] / m);
  }
  return d;
}

DivergenceReport dataset_divergence(lm::LmProvider& pt_provider, lm::LmProvider& sft_provider,
                                    const std::vector<TokenSeq>& prefixes,
                                    bool inject_sft_first_token, double eps) {
  if (prefixes.empty()) throw EmptyInputError("divergence requires at least one prefix");
  require_shared_vocab(pt_provider, sft_provider);
  const std::size_t vsize = pt_provider.vocab_size();

  DivergenceReport report;
  report.epsilon = eps;
  report.per_example.reserve(prefixes.size());
  for (const auto& raw_prefix : prefixes) {
    TokenSeq prefix = maybe_inject(sft_provider, raw_prefix, inject_sft_first_token);
    const auto sft_dense = sft_provider.next_distribution(prefix).to_dense(vsize);
    const auto pt_dense = pt_provider.next_distribution(prefix).to_dense(vsize);
    report.per_example.push_back(divergence(sft_dense, pt_dense, eps));
  }
  for (const auto& d : report.per_example) {
    report.mean.kl += d.kl;
    report.mean.js += d.js;
    report.mean.ce += d.ce;
  }
  const double n = static_cast<double>(report.per_example.size());
  report.mean.kl /= n;
  report.mean.js /= n;
  report.mean.ce /= n;
  return report;
}

std::vector<double> chosen_prob_trace(lm::LmProvider& provider,
                                      const std::vector<TokenSeq>& prefixes) {
  if (prefixes.empty()) throw EmptyInputError("trace requires at least one prefix");
  std::vector<double> trace;
  trace.reserve(prefixes.size());
  for (const auto& prefix : prefixes) {
    const auto dist = provider.next_distribution(prefix);
    const TokenId chosen = argmax(dist);
    if (dist.is_dense()) {
      trace.push_back(dist.probs()[chosen]);
    } else {
      trace.push_back(std::exp(dist.entries().front().logprob));
    }
  }
  return trace;
}

double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace yarnlab::analysis
