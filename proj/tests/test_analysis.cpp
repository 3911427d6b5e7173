#include <doctest.h>

#include <cmath>
#include <memory>

#include "yarnlab/analysis.hpp"
#include "yarnlab/util.hpp"

using namespace yarnlab;
using namespace yarnlab::analysis;

namespace {

// Minimal provider with scripted dense distributions: the distribution for a
// context is looked up by the context's last token id (or 0 when empty).
class FixedProvider final : public lm::LmProvider {
 public:
  FixedProvider(std::shared_ptr<const Vocabulary> vocab,
                std::vector<std::vector<double>> dists)
      : vocab_(std::move(vocab)), dists_(std::move(dists)) {}

  std::string vocab_fingerprint() override { return vocab_->fingerprint(); }
  std::size_t vocab_size() override { return vocab_->size(); }
  const Vocabulary& vocabulary() override { return *vocab_; }
  TokenSeq tokenize(const std::string& text) override {
    TokenSeq seq;
    seq.vocab_fingerprint = vocab_->fingerprint();
    for (const auto& word : split_whitespace(text)) {
      auto id = vocab_->id_of(word);
      REQUIRE(id);
      seq.ids.push_back(*id);
    }
    return seq;
  }
  std::string detokenize(const TokenSeq& seq) override {
    std::vector<std::string> words;
    for (auto id : seq.ids) words.push_back(vocab_->token(id));
    return join_tokens(words);
  }
  NextTokenDistribution next_distribution(const TokenSeq& context) override {
    const std::size_t key = context.ids.empty() ? 0 : context.ids.back() % dists_.size();
    return NextTokenDistribution::dense(vocab_->fingerprint(), dists_[key]);
  }
  std::optional<TokenId> eos_id() override { return std::nullopt; }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<std::vector<double>> dists_;
};

std::shared_ptr<const Vocabulary> abc_vocab() {
  return std::make_shared<Vocabulary>(std::vector<std::string>{"a", "b", "c"});
}

std::vector<TokenSeq> prefixes_of(const std::shared_ptr<const Vocabulary>& vocab,
                                  std::vector<std::vector<TokenId>> idss) {
  std::vector<TokenSeq> out;
  for (auto& ids : idss) {
    TokenSeq seq;
    seq.ids = std::move(ids);
    seq.vocab_fingerprint = vocab->fingerprint();
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

TEST_CASE("identical providers agree at every K") {
  auto vocab = abc_vocab();
  FixedProvider p(vocab, {{0.2, 0.5, 0.3}});
  FixedProvider q(vocab, {{0.2, 0.5, 0.3}});
  const auto report =
      agreement_at_k(p, q, prefixes_of(vocab, {{0}, {1}, {2}}), {1, 2, 3}, false, "without_prior");
  for (auto k : report.ks) CHECK(report.agreement.at(k) == doctest::Approx(1.0));
  CHECK(report.length == 3);
}

TEST_CASE("agreement with SFT argmax at PT rank 2") {
  auto vocab = abc_vocab();
  // PT ranks: b (0.5) first, c (0.3) second; SFT argmax = c
  FixedProvider pt(vocab, {{0.2, 0.5, 0.3}});
  FixedProvider sft(vocab, {{0.1, 0.2, 0.7}});
  const auto report =
      agreement_at_k(pt, sft, prefixes_of(vocab, {{0}}), {1, 2}, false, "without_prior");
  CHECK(report.agreement.at(1) == doctest::Approx(0.0));
  CHECK(report.agreement.at(2) == doctest::Approx(1.0));
  CHECK(report.records[0].rank == 2);
}

TEST_CASE("agreement requires matching vocabularies and valid Ks") {
  auto vocab = abc_vocab();
  auto other = std::make_shared<Vocabulary>(std::vector<std::string>{"x", "y", "z"});
  FixedProvider p(vocab, {{0.2, 0.5, 0.3}});
  FixedProvider q(other, {{0.2, 0.5, 0.3}});
  CHECK_THROWS_AS(
      agreement_at_k(p, q, prefixes_of(vocab, {{0}}), {1}, false, "without_prior"),
      VocabMismatchError);
  FixedProvider r(vocab, {{0.2, 0.5, 0.3}});
  CHECK_THROWS_AS(agreement_at_k(p, r, {}, {1}, false, "x"), EmptyInputError);
  CHECK_THROWS_AS(
      agreement_at_k(p, r, prefixes_of(vocab, {{0}}), {3, 1}, false, "x"), Error);
}

TEST_CASE("divergence of a distribution with itself is (0, 0, H)") {
  const std::vector<double> p = {0.1, 0.2, 0.3, 0.4};
  const auto d = divergence(p, p, 1e-12);
  CHECK(d.kl == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.js == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.ce == doctest::Approx(entropy(p)).epsilon(1e-9));
}

TEST_CASE("divergence hand cases") {
  // KL((1,0) || (0.5,0.5)) = ln 2; direct-summation oracle for JS:
  //   M = (0.75, 0.25)
  //   JS = 0.5*ln(4/3) + 0.5*(0.5*ln(2/3) + 0.5*ln 2) = 0.215761...
  const double ln2 = std::log(2.0);
  const auto d = divergence({1.0, 0.0}, {0.5, 0.5}, 1e-15);
  CHECK(d.kl == doctest::Approx(ln2).epsilon(1e-6));
  const double js_oracle =
      0.5 * (1.0 * std::log(1.0 / 0.75)) +
      0.5 * (0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25));
  CHECK(d.js == doctest::Approx(js_oracle).epsilon(1e-6));
  CHECK(d.js == doctest::Approx(0.2157616).epsilon(1e-3));

  const auto disjoint = divergence({1.0, 0.0}, {0.0, 1.0}, 1e-15);
  CHECK(disjoint.js == doctest::Approx(ln2).epsilon(1e-4));

  CHECK_THROWS_AS(divergence({1.0}, {0.5, 0.5}, 1e-12), DimensionMismatchError);
}

TEST_CASE("divergence properties over random pairs") {
  Rng rng(17);
  const double ln2 = std::log(2.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 2 + rng.uniform(30);
    auto sample = [&] {
      std::vector<double> v(dim);
      double sum = 0.0;
      for (auto& x : v) {
        x = rng.uniform_real() < 0.2 ? 0.0 : rng.uniform_real();
        sum += x;
      }
      if (sum == 0.0) {
        v[0] = 1.0;
        sum = 1.0;
      }
      for (auto& x : v) x /= sum;
      return v;
    };
    const auto p = sample();
    const auto q = sample();
    const auto d = divergence(p, q, 1e-12);
    CHECK(d.kl >= -1e-12);
    CHECK(d.js >= -1e-12);
    CHECK(d.js <= ln2 + 1e-9);
    // Gibbs: CE(p, q) >= H(p) over the clamped pair
    const auto cp = clamp_normalize(p, 1e-12);
    CHECK(d.ce + 1e-9 >= entropy(cp));
  }
}

TEST_CASE("dataset divergence of identical providers is zero with mean entropy CE") {
  auto vocab = abc_vocab();
  FixedProvider p(vocab, {{0.2, 0.5, 0.3}, {0.6, 0.2, 0.2}});
  FixedProvider q(vocab, {{0.2, 0.5, 0.3}, {0.6, 0.2, 0.2}});
  const auto report =
      dataset_divergence(p, q, prefixes_of(vocab, {{0}, {1}}), false, 1e-12);
  CHECK(report.mean.kl == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.mean.js == doctest::Approx(0.0).epsilon(1e-12));
  const double expected_ce =
      0.5 * (entropy({0.2, 0.5, 0.3}) + entropy({0.6, 0.2, 0.2}));
  CHECK(report.mean.ce == doctest::Approx(expected_ce).epsilon(1e-6));
}

TEST_CASE("chosen probability trace reports the argmax mass") {
  auto vocab = abc_vocab();
  FixedProvider p(vocab, {{1.0, 0.0, 0.0}, {0.25, 0.25, 0.5}});
  const auto trace = chosen_prob_trace(p, prefixes_of(vocab, {{0}, {1}}));
  CHECK(trace[0] == doctest::Approx(1.0));
  CHECK(trace[1] == doctest::Approx(0.5));
}

TEST_CASE("uniform four-way distribution traces 0.25") {
  auto vocab = std::make_shared<Vocabulary>(std::vector<std::string>{"a", "b", "c", "d"});
  FixedProvider p(vocab, {{0.25, 0.25, 0.25, 0.25}});
  const auto trace = chosen_prob_trace(p, prefixes_of(vocab, {{0}}));
  CHECK(trace[0] == doctest::Approx(0.25));
}
