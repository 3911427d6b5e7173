#include "yarnlab/lm.hpp"

#include <cmath>

#include "yarnlab/util.hpp"

namespace yarnlab::lm {

namespace {

std::vector<double> resolve_lambdas(const NGramOptions& options) {
  const int n = options.order;
  if (n < 1) throw Error("n-gram order must be >= 1");
  if (options.alpha <= 0.0) throw Error("smoothing alpha must be > 0");
  if (options.lambdas.empty()) {
    return std::vector<double>(static_cast<std::size_t>(n), 1.0 / n);
  }
  if (static_cast<int>(options.lambdas.size()) != n)
    throw BadLambdaError("lambda count differs from order");
  double sum = 0.0;
  for (double l : options.lambdas) {
    if (l < 0.0) throw BadLambdaError("negative lambda weight");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadLambdaError("lambda weights must sum to 1");
  return options.lambdas;
}

}  // namespace

std::shared_ptr<const Vocabulary> collect_vocabulary(
    const std::vector<const std::vector<std::vector<std::string>>*>& corpora) {
  std::vector<std::string> tokens = {kBosToken, kEosToken, kUnkToken};
  std::unordered_map<std::string, bool> seen;
  for (const auto& t : tokens) seen.emplace(t, true);
  for (const auto* corpus : corpora) {
    for (const auto& line : *corpus) {
      for (const auto& tok : line) {
        if (seen.emplace(tok, true).second) tokens.push_back(tok);
      }
    }
  }
  return std::make_shared<Vocabulary>(std::move(tokens));
}

NGramLm build_ngram(const std::vector<std::vector<std::string>>& corpus,
                    const NGramOptions& options, std::shared_ptr<const Vocabulary> shared_vocab) {
  if (corpus.empty()) throw EmptyCorpusError();
  NGramLm model;
  model.options_ = options;
  model.lambdas_ = resolve_lambdas(options);

  model.vocab_ = shared_vocab ? std::move(shared_vocab) : collect_vocabulary({&corpus});
  auto require = [&](const char* tok) {
    auto id = model.vocab_->id_of(tok);
    if (!id) throw InvalidVocabularyError(std::string("vocabulary lacks reserved token ") + tok);
    return *id;
  };
  model.bos_id_ = require(kBosToken);
  model.eos_id_ = require(kEosToken);
  model.unk_id_ = require(kUnkToken);

  const int n = options.order;
  model.tables_.resize(static_cast<std::size_t>(n));

  std::vector<TokenId> ids;
  for (const auto& line : corpus) {
    ids.clear();
    ids.reserve(line.size() + 1);
    for (const auto& tok : line) {
      auto id = model.vocab_->id_of(tok);
      ids.push_back(id ? *id : model.unk_id_);
    }
    ids.push_back(model.eos_id_);
    // position i predicts ids[i]; contexts are BOS-padded on the left
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (int m = 1; m <= n; ++m) {
        std::vector<TokenId> ctx;
        ctx.reserve(static_cast<std::size_t>(m - 1));
        for (int back = m - 1; back >= 1; --back) {
          std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(i) - back;
          ctx.push_back(pos < 0 ? model.bos_id_ : ids[static_cast<std::size_t>(pos)]);
        }
        auto& row = model.tables_[static_cast<std::size_t>(m - 1)][ctx];
        row.counts[ids[i]] += 1;
        row.total += 1;
      }
    }
  }
  return model;
}

NGramLm build_ngram_from_lines(const std::vector<std::string>& lines, const NGramOptions& options) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(lines.size());
  for (const auto& line : lines) corpus.push_back(split_whitespace(line));
  return build_ngram(corpus, options);
}

TokenSeq NGramLm::tokenize(const std::string& text) {
  TokenSeq seq;
  seq.vocab_fingerprint = vocab_->fingerprint();
  for (const auto& word : split_whitespace(text)) {
    auto id = vocab_->id_of(word);
    seq.ids.push_back(id ? *id : unk_id_);
  }
  return seq;
}

std::string NGramLm::detokenize(const TokenSeq& seq) {
  std::vector<std::string> words;
  words.reserve(seq.ids.size());
  for (TokenId id : seq.ids) {
    if (id >= vocab_->size()) throw TokenizationMismatchError("token id beyond vocabulary size");
    words.push_back(vocab_->token(id));
  }
  return join_tokens(words);
}

NextTokenDistribution NGramLm::next_distribution(const TokenSeq& context) {
  if (!context.vocab_fingerprint.empty() && context.vocab_fingerprint != vocab_->fingerprint())
    throw VocabMismatchError(vocab_->fingerprint(), context.vocab_fingerprint);
  for (TokenId id : context.ids) {
    if (id >= vocab_->size()) throw TokenizationMismatchError("context id beyond vocabulary size");
  }

  const std::size_t vsize = vocab_->size();
  const double alpha = options_.alpha;
  std::vector<double> probs(vsize, 0.0);
  std::vector<TokenId> ctx;
  for (int m = 1; m <= options_.order; ++m) {
    ctx.clear();
    for (int back = m - 1; back >= 1; --back) {
      std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(context.ids.size()) - back;
      ctx.push_back(pos < 0 ? bos_id_ : context.ids[static_cast<std::size_t>(pos)]);
    }
    const auto& table = tables_[static_cast<std::size_t>(m - 1)];
    auto it = table.find(ctx);
    const ContextRow* row = it == table.end() ? nullptr : &it->second;
    const double denom = (row ? static_cast<double>(row->total) : 0.0) +
                         alpha * static_cast<double>(vsize);
    const double lambda = lambdas_[static_cast<std::size_t>(m - 1)];
    for (TokenId y = 0; y < vsize; ++y) {
      double count = 0.0;
      if (row) {
        auto cit = row->counts.find(y);
        if (cit != row->counts.end()) count = static_cast<double>(cit->second);
      }
      probs[y] += lambda * (count + alpha) / denom;
    }
  }
  return NextTokenDistribution::dense(vocab_->fingerprint(), std::move(probs));
}

TokenSeq greedy_continue(LmProvider& provider, const TokenSeq& context, int steps) {
  if (steps < 1) throw Error("greedy_continue requires steps >= 1");
  TokenSeq continuation;
  continuation.vocab_fingerprint = provider.vocab_fingerprint();
  auto eos = provider.eos_id();
  if (eos && !context.ids.empty() && context.ids.back() == *eos) return continuation;

  TokenSeq ctx = context;
  if (ctx.vocab_fingerprint.empty()) ctx.vocab_fingerprint = continuation.vocab_fingerprint;
  for (int step = 0; step < steps; ++step) {
    TokenId next = argmax(provider.next_distribution(ctx));
    if (eos && next == *eos) break;
    continuation.ids.push_back(next);
    ctx.ids.push_back(next);
  }
  return continuation;
}

}  // namespace yarnlab::lm
