#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "yarnlab/lm.hpp"

namespace yarnlab::priors {

// Word normalization used for dictionary keys and stopwords: case-fold plus
// leading/trailing punctuation strip. Input text is assumed to already be in
// composed (NFC) form.
std::string normalize_word(std::string_view word);

struct SftPrior {
  int k = 2;
};
struct RefinedPrior {
  std::string hypotheses_path;
  int k = 2;
};
struct PseudoPrior {
  std::string dictionary_path;
  bool keyword_mode = false;
  std::string stopwords_path;  // keyword mode only
};
struct RandomPrior {
  std::string lexicon_path;
  std::string category;
  std::uint64_t seed = 0;
};
struct NoPrior {};

using PriorSpec = std::variant<SftPrior, RefinedPrior, PseudoPrior, RandomPrior, NoPrior>;

std::string prior_tag(const PriorSpec& spec);

struct PriorDiagnostics {
  std::optional<std::size_t> backoff_position;  // index of the dictionary hit token
  std::optional<std::string> hit_word;          // normalized source word that hit
  bool short_prior = false;                     // fewer tokens than requested k
};

struct PriorTokens {
  std::vector<std::string> texts;  // token strings, always populated
  TokenSeq ids;                    // ids in the generating provider's vocabulary (may be empty)
  std::string source_tag;
  PriorDiagnostics diagnostics;

  bool empty() const { return texts.empty(); }
};

// Normalized source word -> target expressions, in file order. Duplicate
// sources keep all targets; the first-listed one is preferred at lookup.
class BilingualDictionary {
 public:
  explicit BilingualDictionary(std::map<std::string, std::vector<std::string>> entries);

  const std::vector<std::string>* lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

// UTF-8 TSV, one `source<TAB>target` per line; '#' lines are comments.
BilingualDictionary load_dictionary(const std::string& path);

using TextTokenizer = std::function<std::vector<std::string>(std::string_view)>;
TextTokenizer whitespace_text_tokenizer();

// First k greedy tokens from the SFT provider conditioned on the rendered
// instruction. Tokens are returned verbatim; punctuation and digits are not
// filtered.
PriorTokens build_sft_prior(lm::LmProvider& sft_provider, const std::string& instruction, int k);

// First k tokens of a stored hypothesis, tokenized with the target tokenizer.
PriorTokens build_refined_prior(const std::string& hypotheses_path, const std::string& example_id,
                                int k, const TextTokenizer& target_tokenizer);

// Back-off scan: the first source token with a dictionary entry supplies the
// prior; only the first token of its first-listed translation is used.
PriorTokens build_pseudo_prior(const std::string& source_text, const BilingualDictionary& dictionary,
                               const TextTokenizer& source_tokenizer,
                               const TextTokenizer& target_tokenizer);

// Keyword variant: source tokens ranked by term frequency (ties by first
// occurrence), stopwords excluded; highest-ranked covered token wins.
PriorTokens build_pseudo_keyword_prior(const std::string& document,
                                       const BilingualDictionary& dictionary,
                                       const std::unordered_set<std::string>& stopwords,
                                       const TextTokenizer& source_tokenizer,
                                       const TextTokenizer& target_tokenizer);

// Uniform pick from a `word<TAB>category` lexicon under the given seed.
PriorTokens build_random_prior(const std::string& lexicon_path, const std::string& category,
                               std::uint64_t seed);

std::unordered_set<std::string> load_stopwords(const std::string& path);

// Fraction of examples whose first prior token equals the gold first label.
double prior_accuracy(const std::vector<PriorTokens>& priors,
                      const std::vector<std::string>& gold_firsts);

}  // namespace yarnlab::priors
