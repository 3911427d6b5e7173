#include <doctest.h>

#include <algorithm>

#include "yarnlab/priors.hpp"
#include "yarnlab/toylab.hpp"
#include "yarnlab/util.hpp"
#include "test_util.hpp"

using namespace yarnlab;
using namespace yarnlab::priors;

namespace {

BilingualDictionary dict_from(const std::string& tsv) {
  TempDir tmp("dict");
  return load_dictionary(tmp.write("d.tsv", tsv));
}

}  // namespace

TEST_CASE("load_dictionary folds case and preserves duplicate order") {
  const auto dict = dict_from("hello\tbonjour\n");
  REQUIRE(dict.lookup("Hello"));
  CHECK(*dict.lookup("Hello") == std::vector<std::string>{"bonjour"});

  const auto multi = dict_from("a\tx\na\ty\n");
  CHECK(*multi.lookup("a") == std::vector<std::string>{"x", "y"});

  TempDir tmp("dict_bad");
  const auto bad = tmp.write("bad.tsv", "noTab\n");
  try {
    load_dictionary(bad);
    FAIL("expected MalformedError");
  } catch (const MalformedError& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("dictionary lookup is normalization idempotent") {
  const auto dict = dict_from("hello\tbonjour\nWorld\tmonde\n");
  for (const char* word : {"hello", "HELLO!", "\"Hello,\"", "world", "WORLD", "unseen"}) {
    CHECK(dict.lookup(word) == dict.lookup(normalize_word(word)));
  }
  CHECK(dict.lookup("HELLO!") != nullptr);
  CHECK(dict.lookup("World") != nullptr);
}

TEST_CASE("comment lines are skipped") {
  const auto dict = dict_from("# source\thidden\nreal\tvrai\n");
  CHECK(dict.lookup("real") != nullptr);
  CHECK(dict.lookup("# source") == nullptr);
}

TEST_CASE("build_sft_prior takes the first greedy tokens verbatim") {
  toylab::WorldConfig world_config;
  world_config.seed = 5;
  world_config.lexicon_size = 10;
  toylab::SyntheticWorld world(world_config);
  toylab::ToyPairConfig pair_config;
  pair_config.pretrain_size = 500;
  pair_config.sft_size = 100;
  pair_config.sft_weight = 10;
  const auto pair = toylab::build_toy_pair(world, pair_config);

  const std::string prompt = render_instruction(
      toylab::kInstructionTemplate, {{"source", join_tokens({world.source_lexicon()[0],
                                                             world.source_lexicon()[1]})}});
  // oracle: enumerate the model's distributions step by step
  std::vector<TokenId> chain;
  TokenSeq ctx = pair.sft->tokenize(prompt);
  for (int step = 0; step < 2; ++step) {
    const auto probs = pair.sft->next_distribution(ctx).probs();
    TokenId best = 0;
    for (TokenId y = 1; y < probs.size(); ++y)
      if (probs[y] > probs[best]) best = y;
    chain.push_back(best);
    ctx.ids.push_back(best);
  }
  REQUIRE(chain.size() == 2);
  REQUIRE(chain[0] != *pair.sft->eos_id());
  REQUIRE(chain[1] != *pair.sft->eos_id());

  const auto prior2 = build_sft_prior(*pair.sft, prompt, 2);
  CHECK(prior2.texts.size() == 2);
  CHECK(prior2.texts[0] == pair.sft->vocabulary().token(chain[0]));
  CHECK(prior2.texts[1] == pair.sft->vocabulary().token(chain[1]));
  CHECK(!prior2.diagnostics.short_prior);

  const auto prior1 = build_sft_prior(*pair.sft, prompt, 1);
  CHECK(prior1.texts == std::vector<std::string>{prior2.texts[0]});
}

TEST_CASE("build_sft_prior raises EmptyGeneration on an immediate EOS") {
  // model trained on a single one-word line: after that word EOS dominates
  lm::NGramOptions options;
  options.order = 2;
  options.lambdas = {0.0, 1.0};
  auto model = std::make_shared<lm::NGramLm>(lm::build_ngram_from_lines({"solo"}, options));
  CHECK_THROWS_AS(build_sft_prior(*model, "solo", 2), EmptyGenerationError);
}

TEST_CASE("build_refined_prior reads stored hypotheses") {
  TempDir tmp("refined");
  const auto path = tmp.write("h.jsonl",
                              "{\"id\":\"1\",\"text\":\"bonjour le monde\"}\n"
                              "{\"id\":\"2\",\"text\":\"salut\"}\n");
  const auto tokenizer = whitespace_text_tokenizer();

  const auto prior = build_refined_prior(path, "1", 2, tokenizer);
  CHECK(prior.texts == std::vector<std::string>{"bonjour", "le"});
  CHECK(!prior.diagnostics.short_prior);

  const auto short_prior = build_refined_prior(path, "2", 3, tokenizer);
  CHECK(short_prior.texts == std::vector<std::string>{"salut"});
  CHECK(short_prior.diagnostics.short_prior);

  CHECK_THROWS_AS(build_refined_prior(path, "missing", 1, tokenizer), MissingExampleError);
}

TEST_CASE("build_pseudo_prior scans left to right with back-off") {
  const auto dict = dict_from("hello\tbonjour\n");
  const auto tokenizer = whitespace_text_tokenizer();

  const auto first = build_pseudo_prior("Hello world", dict, tokenizer, tokenizer);
  CHECK(first.texts == std::vector<std::string>{"bonjour"});
  CHECK(*first.diagnostics.backoff_position == 0);

  const auto backed_off = build_pseudo_prior("The hello", dict, tokenizer, tokenizer);
  CHECK(backed_off.texts == std::vector<std::string>{"bonjour"});
  CHECK(*backed_off.diagnostics.backoff_position == 1);

  CHECK_THROWS_AS(build_pseudo_prior("xyz qqq", dict, tokenizer, tokenizer),
                  NoDictionaryHitError);
}

TEST_CASE("pseudo priors are single tokens even for multi-word translations") {
  const auto dict = dict_from("cat\tle chat noir\n");
  const auto tokenizer = whitespace_text_tokenizer();
  const auto prior = build_pseudo_prior("cat", dict, tokenizer, tokenizer);
  CHECK(prior.texts.size() == 1);
  CHECK(prior.texts[0] == "le");
}

TEST_CASE("pseudo prior back-off is position monotone over random inputs") {
  Rng rng(99);
  const std::vector<std::string> words = {"wa", "wb", "wc", "wd", "we", "wf", "wg", "wh"};
  const auto tokenizer = whitespace_text_tokenizer();
  for (int trial = 0; trial < 60; ++trial) {
    // random dictionary over a random subset of the lexicon
    std::string tsv;
    std::vector<std::string> covered;
    for (const auto& w : words) {
      if (rng.uniform_real() < 0.4) {
        tsv += w + "\t" + w + "_t\n";
        covered.push_back(w);
      }
    }
    if (covered.empty()) continue;
    TempDir tmp("mono");
    const auto dict = load_dictionary(tmp.write("d.tsv", tsv));

    std::vector<std::string> sentence;
    const std::size_t len = 1 + rng.uniform(8);
    for (std::size_t i = 0; i < len; ++i)
      sentence.push_back(words[rng.uniform(words.size())]);
    const std::string text = join_tokens(sentence);

    try {
      const auto prior = build_pseudo_prior(text, dict, tokenizer, tokenizer);
      const std::size_t hit = *prior.diagnostics.backoff_position;
      for (std::size_t j = 0; j < hit; ++j) {
        CHECK(dict.lookup(sentence[j]) == nullptr);  // re-scan: nothing earlier was covered
      }
      CHECK(dict.lookup(sentence[hit]) != nullptr);
    } catch (const NoDictionaryHitError&) {
      for (const auto& w : sentence) CHECK(dict.lookup(w) == nullptr);
    }
  }
}

TEST_CASE("keyword priors rank by frequency with stopword exclusion") {
  const auto dict = dict_from("cat\tchat\ndog\tchien\n");
  const auto tokenizer = whitespace_text_tokenizer();

  const auto freq = build_pseudo_keyword_prior("cat cat dog", dict, {}, tokenizer, tokenizer);
  CHECK(freq.texts == std::vector<std::string>{"chat"});  // hand count: cat 2, dog 1

  const auto stopped =
      build_pseudo_keyword_prior("the the cat", dict, {"the"}, tokenizer, tokenizer);
  CHECK(stopped.texts == std::vector<std::string>{"chat"});

  CHECK_THROWS_AS(build_pseudo_keyword_prior("zebra zebra", dict, {}, tokenizer, tokenizer),
                  NoDictionaryHitError);
}

TEST_CASE("keyword priors break frequency ties by first occurrence") {
  const auto dict = dict_from("dog\tchien\nowl\thibou\n");
  const auto tokenizer = whitespace_text_tokenizer();
  const auto prior = build_pseudo_keyword_prior("owl dog owl dog", dict, {}, tokenizer, tokenizer);
  CHECK(prior.texts == std::vector<std::string>{"hibou"});
}

TEST_CASE("build_random_prior is seeded and validates the category") {
  TempDir tmp("lexicon");
  const auto path = tmp.write("lex.tsv", "might\tmodal\ncould\tmodal\nquickly\tadverb\n");

  const auto a = build_random_prior(path, "modal", 11);
  const auto b = build_random_prior(path, "modal", 11);
  CHECK(a.texts == b.texts);
  CHECK((a.texts[0] == "might" || a.texts[0] == "could"));

  const auto single = tmp.write("single.tsv", "might\tmodal\n");
  CHECK(build_random_prior(single, "modal", 3).texts == std::vector<std::string>{"might"});

  CHECK_THROWS_AS(build_random_prior(path, "noun", 1), UnknownCategoryError);
}

TEST_CASE("prior_accuracy counts exact first-token matches") {
  auto mk = [](std::vector<std::string> texts) {
    PriorTokens p;
    p.texts = std::move(texts);
    return p;
  };
  const std::vector<PriorTokens> all = {mk({"a"}), mk({"b"})};
  CHECK(prior_accuracy(all, {"a", "b"}) == doctest::Approx(1.0));
  CHECK(prior_accuracy(all, {"x", "y"}) == doctest::Approx(0.0));

  const std::vector<PriorTokens> half = {mk({"a"}), mk({"b"}), mk({"c"}), mk({"d"})};
  CHECK(prior_accuracy(half, {"a", "b", "x", "y"}) == doctest::Approx(0.5));

  CHECK_THROWS_AS(prior_accuracy(all, {"a"}), LengthMismatchError);
}
