#include <doctest.h>

#include <cmath>

#include "yarnlab/core.hpp"
#include "yarnlab/util.hpp"

using namespace yarnlab;

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("vocabulary fingerprint is the SHA-256 of NUL-joined tokens") {
  Vocabulary vocab({"a", "b"});
  CHECK(vocab.fingerprint() == "59b271ae1bbcb1d31d41929817f4b16fb439eb4f31520b5ad1d5ce98920a7138");
  Vocabulary again({"a", "b"});
  CHECK(vocab.fingerprint() == again.fingerprint());
  Vocabulary reordered({"b", "a"});
  CHECK(vocab.fingerprint() != reordered.fingerprint());
}

TEST_CASE("vocabulary rejects duplicates and resolves ids") {
  CHECK_THROWS_AS(Vocabulary({"a", "a"}), InvalidVocabularyError);
  Vocabulary vocab({"x", "y", "z"});
  CHECK(vocab.size() == 3);
  CHECK(*vocab.id_of("y") == 1);
  CHECK(!vocab.id_of("missing"));
  CHECK(vocab.token(2) == "z");
}

TEST_CASE("render_instruction substitutes placeholders verbatim") {
  CHECK(render_instruction("Translate from {s} to {t}. {x}",
                           {{"s", "En"}, {"t", "Zh"}, {"x", "Hi."}}) ==
        "Translate from En to Zh. Hi.");
  CHECK(render_instruction("{x}", {{"x", ""}}) == "");
  CHECK_THROWS_AS(render_instruction("{x} {y}", {{"x", "a"}}), MissingFieldError);
  try {
    render_instruction("{x} {y}", {{"x", "a"}});
  } catch (const MissingFieldError& e) {
    CHECK(e.field() == "y");
  }
}

TEST_CASE("InstructionInput renders at construction") {
  const auto input = InstructionInput::make("translate : {source} =>", {{"source", "a b"}});
  CHECK(input.rendered == "translate : a b =>");
  CHECK(input.template_text == "translate : {source} =>");
  const auto again = InstructionInput::make("translate : {source} =>", {{"source", "a b"}});
  CHECK(input.rendered == again.rendered);
  CHECK_THROWS_AS(InstructionInput::make("{a}", {}), MissingFieldError);
}

TEST_CASE("argmax picks maximal probability with lowest-id ties") {
  CHECK(argmax(NextTokenDistribution::dense("fp", {0.1, 0.7, 0.2})) == 1);
  CHECK(argmax(NextTokenDistribution::dense("fp", {0.5, 0.5})) == 0);
  CHECK(argmax(NextTokenDistribution::sparse_top_k("fp", {{7, -0.1}, {2, -2.3}}, false)) == 7);
  CHECK_THROWS_AS(argmax(NextTokenDistribution::dense("fp", {})), EmptyDistributionError);
}

TEST_CASE("top_k orders by probability then lowest id") {
  const auto r1 = top_k(NextTokenDistribution::dense("fp", {0.1, 0.7, 0.2}), 2);
  CHECK(r1.ids == std::vector<TokenId>{1, 2});
  CHECK(!r1.truncated);

  const auto r2 = top_k(NextTokenDistribution::dense("fp", {0.25, 0.25, 0.5}), 2);
  CHECK(r2.ids == std::vector<TokenId>{2, 0});

  const auto r3 = top_k(
      NextTokenDistribution::sparse_top_k("fp", {{4, -0.5}, {1, -1.0}, {9, -2.0}}, false), 5);
  CHECK(r3.ids.size() == 3);
  CHECK(r3.truncated);
}

TEST_CASE("top_k is a prefix chain and contains argmax") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 2 + rng.uniform(12);
    std::vector<double> probs(dim);
    double sum = 0.0;
    for (auto& p : probs) {
      p = rng.uniform_real() + 1e-9;
      sum += p;
    }
    for (auto& p : probs) p /= sum;
    const auto dist = NextTokenDistribution::dense("fp", probs);
    const TokenId best = argmax(dist);
    std::vector<TokenId> previous;
    for (std::size_t k = 1; k <= dim; ++k) {
      const auto result = top_k(dist, k);
      CHECK(result.ids.size() == k);
      CHECK(std::find(result.ids.begin(), result.ids.end(), best) != result.ids.end());
      CHECK(std::equal(previous.begin(), previous.end(), result.ids.begin()));
      previous = result.ids;
    }
  }
}

TEST_CASE("clamp_normalize floors then renormalizes") {
  const auto a = clamp_normalize({1.0, 0.0}, 1e-12);
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(a[1] == doctest::Approx(1e-12).epsilon(1e-3));

  const auto b = clamp_normalize({0.5, 0.5}, 1e-12);
  CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(0.5).epsilon(1e-12));

  // floor-then-renormalize oracle: max(p, eps) / sum
  const auto c = clamp_normalize({0.0, 0.0, 1.0}, 0.25);
  CHECK(c[0] == doctest::Approx(0.25 / 1.5).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(0.25 / 1.5).epsilon(1e-12));
  CHECK(c[2] == doctest::Approx(1.0 / 1.5).epsilon(1e-12));
}

TEST_CASE("clamp_normalize output is a valid distribution and idempotent above eps") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.uniform(20);
    std::vector<double> probs(dim, 0.0);
    for (auto& p : probs) p = rng.uniform_real() < 0.3 ? 0.0 : rng.uniform_real();
    const double eps = 1e-9;
    const auto once = clamp_normalize(probs, eps);
    double sum = 0.0;
    for (double p : once) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    bool all_above = true;
    for (double p : once) all_above = all_above && p >= eps;
    if (all_above) {
      const auto twice = clamp_normalize(once, eps);
      for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rank_of matches the top_k ordering") {
  const auto dist = NextTokenDistribution::dense("fp", {0.25, 0.25, 0.5});
  CHECK(*rank_of(dist, 2) == 1);
  CHECK(*rank_of(dist, 0) == 2);
  CHECK(*rank_of(dist, 1) == 3);

  const auto sparse = NextTokenDistribution::sparse_top_k("fp", {{4, -0.5}, {1, -1.0}}, false);
  CHECK(*rank_of(sparse, 4) == 1);
  CHECK(!rank_of(sparse, 9));
}
