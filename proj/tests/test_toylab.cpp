#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "yarnlab/core.hpp"
#include "yarnlab/toylab.hpp"

using namespace yarnlab;
using namespace yarnlab::toylab;

namespace {

WorldConfig small_world_config() {
  WorldConfig config;
  config.seed = 7;
  config.lexicon_size = 12;
  config.parallel_fraction = 0.1;
  return config;
}

bool contains_target_token(const SyntheticWorld& world,
                           const std::vector<std::vector<std::string>>& corpus) {
  for (const auto& line : corpus) {
    for (const auto& token : line) {
      if (world.is_target_token(token)) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("lexicons are bijective and disjoint") {
  SyntheticWorld world(small_world_config());
  CHECK(world.source_lexicon().size() == 12);
  CHECK(world.target_lexicon().size() == 12);
  for (std::size_t i = 0; i < world.source_lexicon().size(); ++i) {
    CHECK(world.is_target_token(world.target_lexicon()[i]));
    CHECK(!world.is_target_token(world.source_lexicon()[i]));
  }
}

TEST_CASE("pretrain corpus respects the parallel fraction") {
  auto config = small_world_config();

  config.parallel_fraction = 0.0;
  CHECK(!contains_target_token(SyntheticWorld(config),
                               gen_pretrain_corpus(SyntheticWorld(config), 200)));

  config.parallel_fraction = 1.0;
  {
    SyntheticWorld world(config);
    const auto corpus = gen_pretrain_corpus(world, 50);
    for (const auto& line : corpus)
      CHECK(std::find(line.begin(), line.end(), "means") != line.end());
  }

  config.parallel_fraction = 0.1;
  {
    SyntheticWorld world(config);
    const int size = 500;
    const auto corpus = gen_pretrain_corpus(world, size);
    int parallel = 0;
    for (const auto& line : corpus)
      if (std::find(line.begin(), line.end(), "means") != line.end()) ++parallel;
    CHECK(std::abs(parallel - static_cast<int>(std::llround(0.1 * size))) <= 2);
  }
}

TEST_CASE("corpus generation is a pure function of the seed") {
  SyntheticWorld world(small_world_config());
  CHECK(gen_pretrain_corpus(world, 100) == gen_pretrain_corpus(world, 100));
  CHECK(gen_sft_corpus(world, 50) == gen_sft_corpus(world, 50));
  CHECK(gen_pretrain_corpus(world, 100) != gen_sft_corpus(world, 100));
}

TEST_CASE("sft corpus lines carry the separator and target-only responses") {
  SyntheticWorld world(small_world_config());
  for (const auto& line : gen_sft_corpus(world, 80)) {
    const auto sep = std::find(line.begin(), line.end(), "=>");
    REQUIRE(sep != line.end());
    CHECK(line.front() == "translate");
    bool all_target = true;
    for (auto it = sep + 1; it != line.end(); ++it)
      all_target = all_target && world.is_target_token(*it);
    CHECK(all_target);
    CHECK(sep + 1 != line.end());
  }
}

TEST_CASE("toy pair shares one vocabulary and rejects w = 0") {
  SyntheticWorld world(small_world_config());
  ToyPairConfig config;
  config.pretrain_size = 400;
  config.sft_size = 80;
  config.sft_weight = 10;
  const auto pair = build_toy_pair(world, config);
  CHECK(pair.base->vocab_fingerprint() == pair.sft->vocab_fingerprint());

  config.sft_weight = 0;
  CHECK_THROWS_AS(build_toy_pair(world, config), Error);
}

TEST_CASE("sft argmax switches language while the base argmax does not") {
  SyntheticWorld world(small_world_config());
  ToyPairConfig config;
  config.pretrain_size = 1000;
  config.sft_size = 150;
  config.sft_weight = 10;
  const auto pair = build_toy_pair(world, config);

  const std::string prompt = render_instruction(
      kInstructionTemplate, {{"source", world.source_lexicon().front()}});
  const auto sft_argmax = argmax(pair.sft->next_distribution(pair.sft->tokenize(prompt)));
  const auto base_argmax = argmax(pair.base->next_distribution(pair.base->tokenize(prompt)));
  CHECK(world.is_target_token(pair.sft->vocabulary().token(sft_argmax)));
  CHECK(!world.is_target_token(pair.base->vocabulary().token(base_argmax)));
}

TEST_CASE("translation dataset is deterministic with covered references") {
  SyntheticWorld world(small_world_config());
  const auto a = make_translation_dataset(world, 25);
  const auto b = make_translation_dataset(world, 25);
  REQUIRE(a.size() == 25);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].source == b[i].source);
    CHECK(a[i].reference == b[i].reference);
    CHECK(!a[i].reference.empty());
  }
}

TEST_CASE("phenomenon experiment reports monotone agreement per setup") {
  SyntheticWorld world(small_world_config());
  ToyPairConfig config;
  config.pretrain_size = 800;
  config.sft_size = 120;
  config.sft_weight = 10;
  const auto pair = build_toy_pair(world, config);

  std::vector<std::string> prompts;
  for (const auto& ex : make_translation_dataset(world, 30))
    prompts.push_back(render_instruction(kInstructionTemplate, {{"source", ex.source}}));

  const auto report = run_phenomenon_experiment(world, pair, prompts, {1, 3, 10, 20}, 1e-12);
  double prev = 0.0;
  for (auto k : report.agreement_without.ks) {
    CHECK(report.agreement_without.agreement.at(k) >= prev);
    prev = report.agreement_without.agreement.at(k);
  }
  prev = 0.0;
  for (auto k : report.agreement_with.ks) {
    CHECK(report.agreement_with.agreement.at(k) >= prev);
    prev = report.agreement_with.agreement.at(k);
  }
  for (auto k : report.agreement_with.ks) {
    CHECK(report.agreement_with.agreement.at(k) >=
          report.agreement_without.agreement.at(k));
  }
  CHECK(report.trace_base_without.size() == prompts.size());
  CHECK(report.trace_sft_with.size() == prompts.size());
}

TEST_CASE("default world golden run (seed 42)") {
  // frozen from the first run of the built system at the default parameters
  const SyntheticWorld world(WorldConfig{});
  const auto pair = build_toy_pair(world, ToyPairConfig{});
  std::vector<std::string> prompts;
  for (const auto& ex : make_translation_dataset(world, 200))
    prompts.push_back(render_instruction(kInstructionTemplate, {{"source", ex.source}}));
  const auto report = run_phenomenon_experiment(world, pair, prompts, {1, 3, 10, 20}, 1e-12);

  CHECK(report.agreement_without.agreement.at(20) == doctest::Approx(0.0));
  CHECK(report.agreement_with.agreement.at(1) == doctest::Approx(0.96));
  CHECK(report.agreement_with.agreement.at(3) == doctest::Approx(1.0));
  CHECK(report.agreement_with.agreement.at(20) == doctest::Approx(1.0));
  CHECK(report.divergence_without.mean.kl == doctest::Approx(0.7118736207764945).epsilon(1e-6));
  CHECK(report.divergence_with.mean.kl == doctest::Approx(0.4757373625637956).epsilon(1e-6));
  CHECK(report.divergence_without.mean.js == doctest::Approx(0.15620872873762387).epsilon(1e-6));
  CHECK(report.divergence_with.mean.js == doctest::Approx(0.10909731892738632).epsilon(1e-6));
  CHECK(report.divergence_without.mean.ce == doctest::Approx(4.689692603051838).epsilon(1e-6));
  CHECK(report.divergence_with.mean.ce == doctest::Approx(3.340991217610046).epsilon(1e-6));
  CHECK(report.plain_target_fraction == doctest::Approx(0.0));
  CHECK(report.injected_target_fraction == doctest::Approx(0.96));

  auto mean = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
  };
  CHECK(mean(report.trace_base_without) == doctest::Approx(0.05645455464725408).epsilon(1e-6));
  CHECK(mean(report.trace_sft_without) == doctest::Approx(0.07354193168823164).epsilon(1e-6));
  CHECK(mean(report.trace_base_with) == doctest::Approx(0.18803653277468765).epsilon(1e-6));
  CHECK(mean(report.trace_sft_with) == doctest::Approx(0.43225014670836154).epsilon(1e-6));
}

TEST_CASE("identical providers agree everywhere") {
  SyntheticWorld world(small_world_config());
  ToyPairConfig config;
  config.pretrain_size = 300;
  config.sft_size = 50;
  config.sft_weight = 2;
  const auto pair = build_toy_pair(world, config);

  ToyPair same{pair.sft, pair.sft};
  std::vector<std::string> prompts;
  for (const auto& ex : make_translation_dataset(world, 10))
    prompts.push_back(render_instruction(kInstructionTemplate, {{"source", ex.source}}));
  const auto report = run_phenomenon_experiment(world, same, prompts, {1, 3}, 1e-12);
  for (auto k : report.agreement_without.ks) {
    CHECK(report.agreement_without.agreement.at(k) == doctest::Approx(1.0));
    CHECK(report.agreement_with.agreement.at(k) == doctest::Approx(1.0));
  }
  CHECK(report.divergence_without.mean.kl == doctest::Approx(0.0).epsilon(1e-9));
}
