#include "yarnlab/toylab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "yarnlab/core.hpp"
#include "yarnlab/decode.hpp"
#include "yarnlab/priors.hpp"

namespace yarnlab::toylab {

namespace {

constexpr std::uint64_t kLexiconStream = 1;
constexpr std::uint64_t kPretrainStream = 2;
constexpr std::uint64_t kSftStream = 3;
constexpr std::uint64_t kDatasetStream = 4;

const char* kConsonants = "bdfgklmnprstvz";
const char* kVowels = "aeiou";

std::string make_syllable_word(Rng& rng, int syllables) {
  std::string word;
  for (int s = 0; s < syllables; ++s) {
    word.push_back(kConsonants[rng.uniform(14)]);
    word.push_back(kVowels[rng.uniform(5)]);
  }
  return word;
}

}  // namespace

SyntheticWorld::SyntheticWorld(WorldConfig config) : config_(config) {
  if (config_.lexicon_size < 1) throw Error("lexicon size must be >= 1");
  if (config_.parallel_fraction < 0.0 || config_.parallel_fraction > 1.0)
    throw Error("parallel fraction must lie in [0,1]");
  if (config_.min_sentence_len < 1 || config_.max_sentence_len < config_.min_sentence_len)
    throw Error("invalid sentence length range");

  Rng rng(Rng::mix(config_.seed, kLexiconStream));
  std::unordered_set<std::string> used;
  while (static_cast<int>(source_words_.size()) < config_.lexicon_size) {
    std::string word = make_syllable_word(rng, 2 + static_cast<int>(rng.uniform(2)));
    if (used.insert(word).second) source_words_.push_back(std::move(word));
  }
  target_words_.reserve(source_words_.size());
  for (std::size_t i = 0; i < source_words_.size(); ++i) {
    // source words alternate consonant/vowel, so the trailing "u" suffix can
    // never collide with a source word
    target_words_.push_back(source_words_[i] + "u");
    source_index_.emplace(source_words_[i], i);
    target_set_.insert(target_words_[i]);
  }
  successor_.resize(source_words_.size());
  for (std::size_t i = 0; i < successor_.size(); ++i) successor_[i] = i;
  rng.shuffle(successor_);
}

std::vector<std::string> SyntheticWorld::sample_sentence(Rng& rng) const {
  const int len = config_.min_sentence_len +
                  static_cast<int>(rng.uniform(
                      static_cast<std::uint64_t>(config_.max_sentence_len - config_.min_sentence_len + 1)));
  std::vector<std::string> sentence;
  sentence.reserve(static_cast<std::size_t>(len));
  std::size_t word = rng.uniform(source_words_.size());
  sentence.push_back(source_words_[word]);
  for (int i = 1; i < len; ++i) {
    if (rng.uniform_real() < config_.follow_prob) {
      word = successor_[word];
    } else {
      word = rng.uniform(source_words_.size());
    }
    sentence.push_back(source_words_[word]);
  }
  return sentence;
}

std::vector<std::string> SyntheticWorld::translate(const std::vector<std::string>& source) const {
  std::vector<std::string> target;
  target.reserve(source.size());
  for (const auto& word : source) {
    auto it = source_index_.find(word);
    if (it == source_index_.end()) throw Error("word outside source lexicon: " + word);
    target.push_back(target_words_[it->second]);
  }
  return target;
}

std::vector<std::vector<std::string>> gen_pretrain_corpus(const SyntheticWorld& world, int size) {
  if (size < 1) throw Error("corpus size must be >= 1");
  Rng rng(Rng::mix(world.config().seed, kPretrainStream));
  const int parallel_count = static_cast<int>(
      std::llround(world.config().parallel_fraction * static_cast<double>(size)));
  std::vector<char> is_parallel(static_cast<std::size_t>(size), 0);
  std::fill(is_parallel.begin(),
            is_parallel.begin() + std::min<std::ptrdiff_t>(parallel_count, size), 1);
  rng.shuffle(is_parallel);

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(static_cast<std::size_t>(size));
  for (char parallel : is_parallel) {
    auto sentence = world.sample_sentence(rng);
    if (parallel) {
      std::vector<std::string> line = sentence;
      line.push_back("means");
      auto translated = world.translate(sentence);
      line.insert(line.end(), translated.begin(), translated.end());
      corpus.push_back(std::move(line));
    } else {
      corpus.push_back(std::move(sentence));
    }
  }
  return corpus;
}

std::vector<std::vector<std::string>> gen_sft_corpus(const SyntheticWorld& world, int size) {
  if (size < 1) throw Error("corpus size must be >= 1");
  Rng rng(Rng::mix(world.config().seed, kSftStream));
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    auto sentence = world.sample_sentence(rng);
    std::vector<std::string> line = {"translate", ":"};
    line.insert(line.end(), sentence.begin(), sentence.end());
    line.push_back("=>");
    auto translated = world.translate(sentence);
    line.insert(line.end(), translated.begin(), translated.end());
    corpus.push_back(std::move(line));
  }
  return corpus;
}

ToyPair build_toy_pair(const SyntheticWorld& world, const ToyPairConfig& config) {
  if (config.sft_weight < 1) throw Error("sft_weight must be >= 1");
  const auto pretrain = gen_pretrain_corpus(world, config.pretrain_size);
  const auto sft_corpus = gen_sft_corpus(world, config.sft_size);

  auto vocab = lm::collect_vocabulary({&pretrain, &sft_corpus});

  std::vector<std::vector<std::string>> sft_train = pretrain;
  sft_train.reserve(pretrain.size() + sft_corpus.size() * static_cast<std::size_t>(config.sft_weight));
  for (int copy = 0; copy < config.sft_weight; ++copy) {
    sft_train.insert(sft_train.end(), sft_corpus.begin(), sft_corpus.end());
  }

  ToyPair pair;
  pair.base = std::make_shared<lm::NGramLm>(lm::build_ngram(pretrain, config.ngram, vocab));
  pair.sft = std::make_shared<lm::NGramLm>(lm::build_ngram(sft_train, config.ngram, vocab));
  return pair;
}

std::vector<TranslationExample> make_translation_dataset(const SyntheticWorld& world, int count) {
  if (count < 1) throw Error("dataset size must be >= 1");
  Rng rng(Rng::mix(world.config().seed, kDatasetStream));
  std::vector<TranslationExample> examples;
  examples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto sentence = world.sample_sentence(rng);
    TranslationExample ex;
    char id[16];
    std::snprintf(id, sizeof(id), "ex%04d", i);
    ex.id = id;
    ex.source = join_tokens(sentence);
    ex.reference = join_tokens(world.translate(sentence));
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::string dictionary_tsv(const SyntheticWorld& world) {
  std::string out;
  for (std::size_t i = 0; i < world.source_lexicon().size(); ++i) {
    out += world.source_lexicon()[i];
    out.push_back('\t');
    out += world.target_lexicon()[i];
    out.push_back('\n');
  }
  return out;
}

PhenomenonReport run_phenomenon_experiment(const SyntheticWorld& world, const ToyPair& pair,
                                           const std::vector<std::string>& prompts,
                                           const std::vector<std::size_t>& ks, double eps) {
  if (prompts.empty()) throw EmptyInputError("phenomenon experiment requires prompts");
  if (pair.base->vocab_fingerprint() != pair.sft->vocab_fingerprint())
    throw VocabMismatchError(pair.sft->vocab_fingerprint(), pair.base->vocab_fingerprint());

  std::vector<TokenSeq> prefixes;
  prefixes.reserve(prompts.size());
  for (const auto& prompt : prompts) prefixes.push_back(pair.base->tokenize(prompt));

  std::vector<TokenSeq> extended = prefixes;
  for (auto& prefix : extended) {
    prefix.ids.push_back(argmax(pair.sft->next_distribution(prefix)));
  }

  PhenomenonReport report;
  report.agreement_without =
      analysis::agreement_at_k(*pair.base, *pair.sft, prefixes, ks, false, "without_prior");
  report.agreement_with =
      analysis::agreement_at_k(*pair.base, *pair.sft, prefixes, ks, true, "with_prior");
  report.divergence_without = analysis::dataset_divergence(*pair.base, *pair.sft, prefixes, false, eps);
  report.divergence_with = analysis::dataset_divergence(*pair.base, *pair.sft, prefixes, true, eps);
  report.trace_base_without = analysis::chosen_prob_trace(*pair.base, prefixes);
  report.trace_sft_without = analysis::chosen_prob_trace(*pair.sft, prefixes);
  report.trace_base_with = analysis::chosen_prob_trace(*pair.base, extended);
  report.trace_sft_with = analysis::chosen_prob_trace(*pair.sft, extended);

  // Greedy language-switch rates: does the base model's first generated token
  // land in the target lexicon, with and without one SFT prior token?
  decode::DecodeConfig decode_config;
  decode_config.max_new_tokens = 1;
  std::size_t plain_hits = 0;
  std::size_t injected_hits = 0;
  for (const auto& prompt : prompts) {
    const auto plain = decode::decode_plain(*pair.base, prompt, decode_config);
    if (!plain.continuation.ids.empty() &&
        world.is_target_token(pair.base->vocabulary().token(plain.continuation.ids.front())))
      ++plain_hits;
    try {
      const auto prior = priors::build_sft_prior(*pair.sft, prompt, 1);
      const auto injected = decode::decode_with_prior(*pair.base, prompt, prior, decode_config);
      if (!injected.continuation.ids.empty() &&
          world.is_target_token(pair.base->vocabulary().token(injected.continuation.ids.front())))
        ++injected_hits;
    } catch (const EmptyGenerationError&) {
      // no prior available: counts as a miss
    }
  }
  report.plain_target_fraction = static_cast<double>(plain_hits) / static_cast<double>(prompts.size());
  report.injected_target_fraction =
      static_cast<double>(injected_hits) / static_cast<double>(prompts.size());
  return report;
}

}  // namespace yarnlab::toylab
