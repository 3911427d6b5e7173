#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "yarnlab/analysis.hpp"
#include "yarnlab/lm.hpp"
#include "yarnlab/util.hpp"

namespace yarnlab::toylab {

// Instruction template shared by the SFT corpus and every toy experiment.
inline constexpr const char* kInstructionTemplate = "translate : {source} =>";

struct WorldConfig {
  std::uint64_t seed = 42;
  int lexicon_size = 40;
  double parallel_fraction = 0.05;
  int min_sentence_len = 3;
  int max_sentence_len = 8;
  // Probability that a sentence continues with a word's preferred follower
  // rather than a uniform draw. Gives sentences the continuation structure
  // n-gram models can pick up.
  double follow_prob = 0.7;
};

// A miniature bilingual world: a source lexicon, a bijective target lexicon
// (suffixed forms), and a successor permutation that shapes word order.
// Construction and sampling are pure functions of the seed.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(WorldConfig config);

  const WorldConfig& config() const { return config_; }
  const std::vector<std::string>& source_lexicon() const { return source_words_; }
  const std::vector<std::string>& target_lexicon() const { return target_words_; }
  bool is_target_token(const std::string& token) const { return target_set_.count(token) > 0; }

  std::vector<std::string> sample_sentence(Rng& rng) const;
  // Word-by-word translation; every source word is covered.
  std::vector<std::string> translate(const std::vector<std::string>& source) const;

 private:
  WorldConfig config_;
  std::vector<std::string> source_words_;
  std::vector<std::string> target_words_;
  std::unordered_map<std::string, std::size_t> source_index_;
  std::unordered_set<std::string> target_set_;
  std::vector<std::size_t> successor_;
};

// (1 - parallel_fraction) source continuation sentences plus parallel
// "X means Y" lines, deterministically interleaved. The parallel line count
// equals round(parallel_fraction * size).
std::vector<std::vector<std::string>> gen_pretrain_corpus(const SyntheticWorld& world, int size);

// Instruction-response lines: "translate : <source> => <translation>".
std::vector<std::vector<std::string>> gen_sft_corpus(const SyntheticWorld& world, int size);

struct ToyPairConfig {
  int pretrain_size = 5000;
  int sft_size = 500;
  int sft_weight = 20;  // SFT corpus is repeated this many times for the SFT model
  lm::NGramOptions ngram;
};

struct ToyPair {
  std::shared_ptr<lm::NGramLm> base;
  std::shared_ptr<lm::NGramLm> sft;
};

// base = n-gram over the pretrain corpus; sft = n-gram over pretrain plus
// sft_weight copies of the SFT corpus; both share one vocabulary.
ToyPair build_toy_pair(const SyntheticWorld& world, const ToyPairConfig& config);

struct TranslationExample {
  std::string id;
  std::string source;
  std::string reference;
};

// Held-out evaluation examples drawn from the same world.
std::vector<TranslationExample> make_translation_dataset(const SyntheticWorld& world, int count);

// Dictionary TSV content covering the full lexicon (source<TAB>target).
std::string dictionary_tsv(const SyntheticWorld& world);

struct PhenomenonReport {
  analysis::AgreementReport agreement_without;
  analysis::AgreementReport agreement_with;
  analysis::DivergenceReport divergence_without;
  analysis::DivergenceReport divergence_with;
  std::vector<double> trace_base_without;
  std::vector<double> trace_sft_without;
  std::vector<double> trace_base_with;
  std::vector<double> trace_sft_with;
  // Fraction of prompts whose first generated token is a target-lexicon word.
  double plain_target_fraction = 0.0;
  double injected_target_fraction = 0.0;
};

// Runs the base-vs-SFT diagnostics on translation prompts, with and without
// one injected SFT prior token, plus greedy-decoding language-switch rates.
PhenomenonReport run_phenomenon_experiment(const SyntheticWorld& world, const ToyPair& pair,
                                           const std::vector<std::string>& prompts,
                                           const std::vector<std::size_t>& ks, double eps);

}  // namespace yarnlab::toylab
