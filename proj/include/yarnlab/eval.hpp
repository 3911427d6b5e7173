#pragma once

#include <map>
#include <string>
#include <vector>

#include "yarnlab/errors.hpp"

namespace yarnlab::eval {

enum class MetricTokenizer { Whitespace, Character };

std::vector<std::string> metric_tokenize(const std::string& text, MetricTokenizer tokenizer);

// Corpus-level BLEU in [0,100]: geometric mean of clipped n-gram precisions
// (orders whose hypothesis n-gram total is zero are excluded) times the
// brevity penalty exp(min(0, 1 - ref_len/hyp_len)). Zero when any included
// precision is zero. Single reference, no smoothing.
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            MetricTokenizer tokenizer = MetricTokenizer::Whitespace, int max_n = 4);

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PrfScore rouge_n(const std::string& hypothesis, const std::string& reference, int n,
                 MetricTokenizer tokenizer = MetricTokenizer::Whitespace);

PrfScore rouge_l(const std::string& hypothesis, const std::string& reference,
                 MetricTokenizer tokenizer = MetricTokenizer::Whitespace);

struct TagPair {
  std::string word;
  std::string tag;
};
using TagSequence = std::vector<TagPair>;

struct ParsedTags {
  TagSequence tags;
  std::size_t skipped_elements = 0;  // array elements that failed the {word: tag} shape
};

// Extracts the first well-formed JSON array from free-form model output.
// Each single-pair object contributes (word, tag); other elements are
// skipped and counted. Raises NoParsableArrayError when no array parses.
ParsedTags parse_pos_output(const std::string& model_text);

std::string serialize_tags(const TagSequence& tags);

// Token-level micro-averaged scores; a prediction is correct when word and
// tag both match the gold sequence at the same position.
PrfScore pos_scores(const std::vector<TagSequence>& predicted,
                    const std::vector<TagSequence>& gold);

struct PercentOfSft {
  std::map<std::string, double> per_metric;  // ratio x100
  double all = 0.0;                          // arithmetic mean of the per-metric ratios x100
};

PercentOfSft percent_of_sft(const std::map<std::string, double>& system_scores,
                            const std::map<std::string, double>& sft_scores);

// CoNLL-style `word<TAB>tag` lines with blank-line sentence separators.
std::vector<TagSequence> load_conll(const std::string& path);

}  // namespace yarnlab::eval
