#include "yarnlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "yarnlab/util.hpp"

namespace yarnlab::eval {

using nlohmann::json;

std::vector<std::string> metric_tokenize(const std::string& text, MetricTokenizer tokenizer) {
  return tokenizer == MetricTokenizer::Whitespace ? split_whitespace(text) : utf8_codepoints(text);
}

namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NGramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::vector<std::string> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                  tokens.begin() + static_cast<std::ptrdiff_t>(i) + n);
    counts[std::move(gram)] += 1;
  }
  return counts;
}

}  // namespace

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            MetricTokenizer tokenizer, int max_n) {
  if (hypotheses.empty() || references.empty()) throw EmptyInputError("bleu requires non-empty corpora");
  if (hypotheses.size() != references.size())
    throw LengthMismatchError("hypothesis and reference counts differ");
  if (max_n < 1) throw Error("bleu requires max_n >= 1");

  std::vector<std::size_t> matched(static_cast<std::size_t>(max_n), 0);
  std::vector<std::size_t> total(static_cast<std::size_t>(max_n), 0);
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = metric_tokenize(hypotheses[i], tokenizer);
    const auto ref = metric_tokenize(references[i], tokenizer);
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (int n = 1; n <= max_n; ++n) {
      const auto hyp_counts = count_ngrams(hyp, n);
      const auto ref_counts = count_ngrams(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        total[static_cast<std::size_t>(n - 1)] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end())
          matched[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_sum = 0.0;
  int orders_used = 0;
  for (int n = 1; n <= max_n; ++n) {
    const std::size_t denom = total[static_cast<std::size_t>(n - 1)];
    if (denom == 0) continue;  // hypothesis corpus has no n-grams at this order
    const std::size_t num = matched[static_cast<std::size_t>(n - 1)];
    if (num == 0) return 0.0;
    log_sum += std::log(static_cast<double>(num) / static_cast<double>(denom));
    ++orders_used;
  }
  if (orders_used == 0) return 0.0;
  const double geo_mean = std::exp(log_sum / orders_used);
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
  return 100.0 * geo_mean * bp;
}

namespace {

PrfScore prf_from_counts(double overlap, double hyp_total, double ref_total) {
  PrfScore score;
  score.precision = hyp_total > 0.0 ? overlap / hyp_total : 0.0;
  score.recall = ref_total > 0.0 ? overlap / ref_total : 0.0;
  score.f1 = (score.precision + score.recall) > 0.0
                 ? 2.0 * score.precision * score.recall / (score.precision + score.recall)
                 : 0.0;
  return score;
}

}  // namespace

PrfScore rouge_n(const std::string& hypothesis, const std::string& reference, int n,
                 MetricTokenizer tokenizer) {
  if (n < 1) throw Error("rouge_n requires n >= 1");
  const auto hyp_counts = count_ngrams(metric_tokenize(hypothesis, tokenizer), n);
  const auto ref_counts = count_ngrams(metric_tokenize(reference, tokenizer), n);
  double overlap = 0.0;
  double hyp_total = 0.0;
  double ref_total = 0.0;
  for (const auto& [gram, count] : hyp_counts) {
    hyp_total += static_cast<double>(count);
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) overlap += static_cast<double>(std::min(count, it->second));
  }
  for (const auto& [gram, count] : ref_counts) ref_total += static_cast<double>(count);
  return prf_from_counts(overlap, hyp_total, ref_total);
}

PrfScore rouge_l(const std::string& hypothesis, const std::string& reference,
                 MetricTokenizer tokenizer) {
  const auto hyp = metric_tokenize(hypothesis, tokenizer);
  const auto ref = metric_tokenize(reference, tokenizer);
  if (hyp.empty() || ref.empty()) return {};

  std::vector<std::vector<std::size_t>> lcs(hyp.size() + 1,
                                            std::vector<std::size_t>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      lcs[i][j] = hyp[i - 1] == ref[j - 1] ? lcs[i - 1][j - 1] + 1
                                           : std::max(lcs[i - 1][j], lcs[i][j - 1]);
    }
  }
  const double common = static_cast<double>(lcs[hyp.size()][ref.size()]);
  return prf_from_counts(common, static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
}

ParsedTags parse_pos_output(const std::string& model_text) {
  // Balanced-bracket scan (string- and escape-aware), first parsable array wins.
  for (std::size_t start = 0; start < model_text.size(); ++start) {
    if (model_text[start] != '[') continue;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < model_text.size(); ++i) {
      const char c = model_text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '[' || c == '{') ++depth;
      else if (c == ']' || c == '}') {
        --depth;
        if (depth == 0) {
          json parsed = json::parse(model_text.substr(start, i - start + 1), nullptr, false);
          if (parsed.is_array()) {
            ParsedTags result;
            for (const auto& element : parsed) {
              if (element.is_object() && element.size() == 1 &&
                  element.begin().value().is_string()) {
                result.tags.push_back({element.begin().key(),
                                       element.begin().value().get<std::string>()});
              } else {
                result.skipped_elements += 1;
              }
            }
            return result;
          }
          break;  // balanced span was not a valid array; try the next '['
        }
      }
    }
  }
  throw NoParsableArrayError();
}

std::string serialize_tags(const TagSequence& tags) {
  json array = json::array();
  for (const auto& [word, tag] : tags) {
    json pair;
    pair[word] = tag;
    array.push_back(std::move(pair));
  }
  return array.dump();
}

PrfScore pos_scores(const std::vector<TagSequence>& predicted,
                    const std::vector<TagSequence>& gold) {
  if (predicted.size() != gold.size())
    throw LengthMismatchError("predicted and gold sentence counts differ");
  double correct = 0.0;
  double pred_total = 0.0;
  double gold_total = 0.0;
  for (std::size_t s = 0; s < predicted.size(); ++s) {
    pred_total += static_cast<double>(predicted[s].size());
    gold_total += static_cast<double>(gold[s].size());
    const std::size_t overlap = std::min(predicted[s].size(), gold[s].size());
    for (std::size_t i = 0; i < overlap; ++i) {
      if (predicted[s][i].word == gold[s][i].word && predicted[s][i].tag == gold[s][i].tag)
        correct += 1.0;
    }
  }
  return prf_from_counts(correct, pred_total, gold_total);
}

PercentOfSft percent_of_sft(const std::map<std::string, double>& system_scores,
                            const std::map<std::string, double>& sft_scores) {
  if (system_scores.size() != sft_scores.size())
    throw LengthMismatchError("metric key sets differ");
  PercentOfSft result;
  double sum = 0.0;
  for (const auto& [metric, value] : system_scores) {
    auto it = sft_scores.find(metric);
    if (it == sft_scores.end()) throw LengthMismatchError("metric key sets differ: " + metric);
    if (it->second == 0.0) throw DivisionByZeroError(metric);
    const double pct = value / it->second * 100.0;
    result.per_metric[metric] = pct;
    sum += pct;
  }
  result.all = sum / static_cast<double>(system_scores.size());
  return result;
}

std::vector<TagSequence> load_conll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CoNLL file: " + path);
  std::vector<TagSequence> sentences;
  TagSequence current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!current.empty()) sentences.push_back(std::move(current));
      current.clear();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw MalformedError("expected word<TAB>tag", lineno);
    current.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

}  // namespace yarnlab::eval
