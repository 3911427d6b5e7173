#include "yarnlab/priors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "yarnlab/util.hpp"

namespace yarnlab::priors {

using nlohmann::json;

std::string normalize_word(std::string_view word) {
  return ascii_fold(strip_outer_punct(word));
}

std::string prior_tag(const PriorSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SftPrior>) return "sft";
        else if constexpr (std::is_same_v<T, RefinedPrior>) return "refined";
        else if constexpr (std::is_same_v<T, PseudoPrior>)
          return s.keyword_mode ? "pseudo_keyword" : "pseudo";
        else if constexpr (std::is_same_v<T, RandomPrior>) return "random";
        else return "none";
      },
      spec);
}

BilingualDictionary::BilingualDictionary(std::map<std::string, std::vector<std::string>> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error("dictionary must have at least one entry");
}

const std::vector<std::string>* BilingualDictionary::lookup(std::string_view word) const {
  auto it = entries_.find(normalize_word(word));
  if (it == entries_.end()) return nullptr;
  return &it->second;
}

BilingualDictionary load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary: " + path);
  std::map<std::string, std::vector<std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto first_tab = line.find('\t');
    if (first_tab == std::string::npos || line.find('\t', first_tab + 1) != std::string::npos)
      throw MalformedError("expected exactly one tab", lineno);
    std::string source = normalize_word(line.substr(0, first_tab));
    std::string target = line.substr(first_tab + 1);
    if (source.empty() || target.empty())
      throw MalformedError("empty source or target", lineno);
    entries[std::move(source)].push_back(std::move(target));
  }
  if (entries.empty()) throw MalformedError("dictionary has no entries: " + path);
  return BilingualDictionary(std::move(entries));
}

TextTokenizer whitespace_text_tokenizer() {
  return [](std::string_view text) { return split_whitespace(text); };
}

PriorTokens build_sft_prior(lm::LmProvider& sft_provider, const std::string& instruction, int k) {
  if (k < 1) throw Error("sft prior requires k >= 1");
  const TokenSeq context = sft_provider.tokenize(instruction);
  const TokenSeq generated = lm::greedy_continue(sft_provider, context, k);
  if (generated.ids.empty()) throw EmptyGenerationError();

  PriorTokens prior;
  prior.source_tag = "sft";
  prior.ids = generated;
  for (TokenId id : generated.ids) prior.texts.push_back(sft_provider.vocabulary().token(id));
  prior.diagnostics.short_prior = static_cast<int>(prior.texts.size()) < k;
  return prior;
}

PriorTokens build_refined_prior(const std::string& hypotheses_path, const std::string& example_id,
                                int k, const TextTokenizer& target_tokenizer) {
  if (k < 1) throw Error("refined prior requires k >= 1");
  std::ifstream in(hypotheses_path);
  if (!in) throw IoError("cannot open hypotheses: " + hypotheses_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
        !record.contains("text") || !record["id"].is_string() || !record["text"].is_string())
      throw MalformedError("expected JSONL records with string id and text fields", lineno);
    if (record["id"].get<std::string>() != example_id) continue;

    auto tokens = target_tokenizer(record["text"].get<std::string>());
    PriorTokens prior;
    prior.source_tag = "refined";
    const std::size_t take = std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(k));
    prior.texts.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(take));
    prior.diagnostics.short_prior = take < static_cast<std::size_t>(k);
    return prior;
  }
  throw MissingExampleError(example_id);
}

PriorTokens build_pseudo_prior(const std::string& source_text, const BilingualDictionary& dictionary,
                               const TextTokenizer& source_tokenizer,
                               const TextTokenizer& target_tokenizer) {
  if (source_text.empty()) throw EmptyInputError("pseudo prior requires non-empty source text");
  const auto tokens = source_tokenizer(source_text);
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const auto* targets = dictionary.lookup(tokens[pos]);
    if (!targets) continue;
    auto target_tokens = target_tokenizer(targets->front());
    if (target_tokens.empty()) continue;
    PriorTokens prior;
    prior.source_tag = "pseudo";
    prior.texts = {target_tokens.front()};
    prior.diagnostics.backoff_position = pos;
    prior.diagnostics.hit_word = normalize_word(tokens[pos]);
    return prior;
  }
  throw NoDictionaryHitError();
}

PriorTokens build_pseudo_keyword_prior(const std::string& document,
                                       const BilingualDictionary& dictionary,
                                       const std::unordered_set<std::string>& stopwords,
                                       const TextTokenizer& source_tokenizer,
                                       const TextTokenizer& target_tokenizer) {
  if (document.empty()) throw EmptyInputError("keyword prior requires a non-empty document");
  const auto tokens = source_tokenizer(document);

  struct Candidate {
    std::string word;
    std::size_t count = 0;
    std::size_t first_pos = 0;
  };
  std::map<std::string, Candidate> by_word;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    std::string norm = normalize_word(tokens[pos]);
    if (norm.empty() || stopwords.count(norm)) continue;
    auto [it, inserted] = by_word.try_emplace(norm, Candidate{norm, 0, pos});
    it->second.count += 1;
  }
  std::vector<Candidate> ranked;
  ranked.reserve(by_word.size());
  for (auto& [_, c] : by_word) ranked.push_back(c);
  std::sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.first_pos < b.first_pos;
  });

  for (const auto& candidate : ranked) {
    const auto* targets = dictionary.lookup(candidate.word);
    if (!targets) continue;
    auto target_tokens = target_tokenizer(targets->front());
    if (target_tokens.empty()) continue;
    PriorTokens prior;
    prior.source_tag = "pseudo_keyword";
    prior.texts = {target_tokens.front()};
    prior.diagnostics.backoff_position = candidate.first_pos;
    prior.diagnostics.hit_word = candidate.word;
    return prior;
  }
  throw NoDictionaryHitError();
}

PriorTokens build_random_prior(const std::string& lexicon_path, const std::string& category,
                               std::uint64_t seed) {
  std::ifstream in(lexicon_path);
  if (!in) throw IoError("cannot open lexicon: " + lexicon_path);
  std::vector<std::string> words;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw MalformedError("expected word<TAB>category", lineno);
    if (line.substr(tab + 1) == category) words.push_back(line.substr(0, tab));
  }
  if (words.empty()) throw UnknownCategoryError(category);

  Rng rng(seed);
  PriorTokens prior;
  prior.source_tag = "random";
  prior.texts = {words[static_cast<std::size_t>(rng.uniform(words.size()))]};
  return prior;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopwords: " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string norm = normalize_word(line);
    if (!norm.empty()) words.insert(norm);
  }
  return words;
}

double prior_accuracy(const std::vector<PriorTokens>& priors,
                      const std::vector<std::string>& gold_firsts) {
  if (priors.empty()) throw EmptyInputError("prior accuracy requires at least one example");
  if (priors.size() != gold_firsts.size())
    throw LengthMismatchError("priors and gold labels differ in length");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (!priors[i].texts.empty() && priors[i].texts.front() == gold_firsts[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(priors.size());
}

}  // namespace yarnlab::priors
