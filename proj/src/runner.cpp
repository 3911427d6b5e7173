#include "yarnlab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "yarnlab/util.hpp"
#include "yarnlab/version.hpp"

namespace yarnlab::runner {

namespace fs = std::filesystem;
using nlohmann::json;

std::string task_name(Task task) {
  switch (task) {
    case Task::Translation: return "translation";
    case Task::Summarization: return "summarization";
    case Task::PosTagging: return "pos";
  }
  return "unknown";
}

namespace {

Task parse_task(const std::string& name) {
  if (name == "translation") return Task::Translation;
  if (name == "summarization") return Task::Summarization;
  if (name == "pos") return Task::PosTagging;
  throw ConfigError("unknown task: " + name);
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, dump_json(j));
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

void require_exists(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

// Runs fn(0..count-1) on a bounded worker pool. The abort flag stops workers
// from pulling new indices; the first exception is rethrown after join.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      if (!fn(i)) break;
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          if (!fn(i)) stop.store(true);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Example {
  std::string id;
  std::string source;
  std::string reference;
};

std::vector<Example> load_jsonl_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<Example> examples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
        !record.contains("reference") || !record["id"].is_string() ||
        !record["reference"].is_string())
      throw MalformedError("dataset records need string id and reference fields", lineno);
    Example ex;
    ex.id = record["id"].get<std::string>();
    ex.reference = record["reference"].get<std::string>();
    if (record.contains("source")) {
      if (!record["source"].is_string()) throw MalformedError("source must be a string", lineno);
      ex.source = record["source"].get<std::string>();
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw MalformedError("dataset is empty: " + path);
  return examples;
}

struct Providers {
  std::shared_ptr<lm::LmProvider> base;
  std::shared_ptr<lm::LmProvider> sft;  // may be null for remote decode-only runs
  std::optional<toylab::SyntheticWorld> world;
};

Providers build_providers(const ExperimentConfig& config) {
  Providers providers;
  if (config.provider.kind == ProviderConfig::Kind::ToyPair) {
    providers.world.emplace(config.provider.world);
    auto pair = toylab::build_toy_pair(*providers.world, config.provider.pair);
    providers.base = pair.base;
    providers.sft = pair.sft;
  } else {
    lm::RemoteLmOptions base_opts;
    base_opts.base_url = config.provider.base_url;
    base_opts.timeout_ms = config.provider.timeout_ms;
    base_opts.max_in_flight = config.provider.max_in_flight;
    base_opts.default_top_k = config.provider.top_k;
    providers.base = std::make_shared<lm::RemoteLm>(base_opts);
    if (!config.provider.sft_url.empty()) {
      lm::RemoteLmOptions sft_opts = base_opts;
      sft_opts.base_url = config.provider.sft_url;
      providers.sft = std::make_shared<lm::RemoteLm>(sft_opts);
    }
  }
  return providers;
}

std::vector<Example> resolve_examples(const ExperimentConfig& config, const Providers& providers) {
  if (!config.dataset_path.empty()) return load_jsonl_dataset(config.dataset_path);
  if (!providers.world)
    throw ConfigError("a dataset path is required unless the provider is a toy pair");
  std::vector<Example> examples;
  for (auto& ex : toylab::make_translation_dataset(*providers.world, config.dataset_count)) {
    examples.push_back({ex.id, ex.source, ex.reference});
  }
  return examples;
}

std::string render_for_example(const ExperimentConfig& config, const Example& ex) {
  return render_instruction(config.instruction_template, {{"source", ex.source}});
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

void check_keys(const json& object, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, _] : object.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

toylab::WorldConfig parse_world(const json& j) {
  toylab::WorldConfig world;
  if (j.is_null()) return world;
  check_keys(j, {"seed", "lexicon_size", "parallel_fraction", "min_sentence_len",
                 "max_sentence_len", "follow_prob"},
             "provider.world");
  if (j.contains("seed")) world.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("lexicon_size")) world.lexicon_size = j["lexicon_size"].get<int>();
  if (j.contains("parallel_fraction")) world.parallel_fraction = j["parallel_fraction"].get<double>();
  if (j.contains("min_sentence_len")) world.min_sentence_len = j["min_sentence_len"].get<int>();
  if (j.contains("max_sentence_len")) world.max_sentence_len = j["max_sentence_len"].get<int>();
  if (j.contains("follow_prob")) world.follow_prob = j["follow_prob"].get<double>();
  return world;
}

ProviderConfig parse_provider(const json& j) {
  ProviderConfig provider;
  if (j.is_null()) return provider;
  const std::string kind = j.value("kind", "toy-pair");
  if (kind == "toy-pair") {
    provider.kind = ProviderConfig::Kind::ToyPair;
    check_keys(j, {"kind", "world", "pretrain_size", "sft_size", "sft_weight", "ngram"},
               "provider");
    if (j.contains("world")) provider.world = parse_world(j["world"]);
    if (j.contains("pretrain_size")) provider.pair.pretrain_size = j["pretrain_size"].get<int>();
    if (j.contains("sft_size")) provider.pair.sft_size = j["sft_size"].get<int>();
    if (j.contains("sft_weight")) provider.pair.sft_weight = j["sft_weight"].get<int>();
    if (j.contains("ngram")) {
      const auto& n = j["ngram"];
      check_keys(n, {"order", "alpha", "lambdas"}, "provider.ngram");
      if (n.contains("order")) provider.pair.ngram.order = n["order"].get<int>();
      if (n.contains("alpha")) provider.pair.ngram.alpha = n["alpha"].get<double>();
      if (n.contains("lambdas")) provider.pair.ngram.lambdas = n["lambdas"].get<std::vector<double>>();
    }
  } else if (kind == "remote") {
    provider.kind = ProviderConfig::Kind::Remote;
    check_keys(j, {"kind", "base_url", "sft_url", "timeout_ms", "max_in_flight", "top_k"},
               "provider");
    if (!j.contains("base_url")) throw ConfigError("remote provider requires base_url");
    provider.base_url = j["base_url"].get<std::string>();
    if (j.contains("sft_url")) provider.sft_url = j["sft_url"].get<std::string>();
    if (j.contains("timeout_ms")) provider.timeout_ms = j["timeout_ms"].get<int>();
    if (j.contains("max_in_flight")) provider.max_in_flight = j["max_in_flight"].get<int>();
    if (j.contains("top_k")) provider.top_k = j["top_k"].get<int>();
  } else {
    throw ConfigError("unknown provider kind: " + kind);
  }
  return provider;
}

priors::PriorSpec parse_prior(const json& j, const std::string& base_dir) {
  if (j.is_null()) return priors::NoPrior{};
  const std::string variant = j.value("variant", "none");
  if (variant == "none") {
    check_keys(j, {"variant"}, "prior");
    return priors::NoPrior{};
  }
  if (variant == "sft") {
    check_keys(j, {"variant", "k"}, "prior");
    priors::SftPrior spec;
    spec.k = j.value("k", 2);
    if (spec.k < 1) throw ConfigError("prior k must be >= 1");
    return spec;
  }
  if (variant == "refined") {
    check_keys(j, {"variant", "hypotheses", "k"}, "prior");
    priors::RefinedPrior spec;
    if (!j.contains("hypotheses")) throw ConfigError("refined prior requires hypotheses path");
    spec.hypotheses_path = resolve_path(base_dir, j["hypotheses"].get<std::string>());
    require_exists(spec.hypotheses_path, "hypotheses file");
    spec.k = j.value("k", 2);
    if (spec.k < 1) throw ConfigError("prior k must be >= 1");
    return spec;
  }
  if (variant == "pseudo") {
    check_keys(j, {"variant", "dictionary", "mode", "stopwords"}, "prior");
    priors::PseudoPrior spec;
    if (!j.contains("dictionary")) throw ConfigError("pseudo prior requires dictionary path");
    spec.dictionary_path = resolve_path(base_dir, j["dictionary"].get<std::string>());
    require_exists(spec.dictionary_path, "dictionary file");
    const std::string mode = j.value("mode", "first_hit");
    if (mode == "keyword") {
      spec.keyword_mode = true;
      if (j.contains("stopwords")) {
        spec.stopwords_path = resolve_path(base_dir, j["stopwords"].get<std::string>());
        require_exists(spec.stopwords_path, "stopwords file");
      }
    } else if (mode != "first_hit") {
      throw ConfigError("pseudo prior mode must be first_hit or keyword");
    }
    return spec;
  }
  if (variant == "random") {
    check_keys(j, {"variant", "lexicon", "category", "seed"}, "prior");
    priors::RandomPrior spec;
    if (!j.contains("lexicon") || !j.contains("category"))
      throw ConfigError("random prior requires lexicon and category");
    spec.lexicon_path = resolve_path(base_dir, j["lexicon"].get<std::string>());
    require_exists(spec.lexicon_path, "lexicon file");
    spec.category = j["category"].get<std::string>();
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
  }
  throw ConfigError("unknown prior variant: " + variant);
}

decode::DecodeConfig parse_decode(const json& j) {
  decode::DecodeConfig config;
  if (j.is_null()) return config;
  check_keys(j, {"strategy", "max_new_tokens", "stop_sequences", "sample_top_k", "temperature",
                 "seed"},
             "decode");
  const std::string strategy = j.value("strategy", "greedy");
  if (strategy == "greedy") config.strategy = decode::Strategy::Greedy;
  else if (strategy == "top_k_sample") config.strategy = decode::Strategy::TopKSample;
  else throw ConfigError("unknown decode strategy: " + strategy);
  if (j.contains("max_new_tokens")) config.max_new_tokens = j["max_new_tokens"].get<int>();
  if (config.max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
  if (j.contains("stop_sequences"))
    config.stop_sequences = j["stop_sequences"].get<std::vector<std::string>>();
  if (j.contains("sample_top_k")) config.sample_top_k = j["sample_top_k"].get<int>();
  if (j.contains("temperature")) config.temperature = j["temperature"].get<double>();
  if (config.strategy == decode::Strategy::TopKSample && config.temperature <= 0.0)
    throw ConfigError("sampling temperature must be > 0");
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  return config;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) try {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
  check_keys(j, {"task", "seed", "out_dir", "workers", "provider", "dataset",
                 "instruction_template", "prior", "decode", "analysis", "sweep", "eval"},
             "config");

  ExperimentConfig config;
  if (j.contains("task")) config.task = parse_task(j["task"].get<std::string>());
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out_dir")) config.out_dir = resolve_path(base_dir, j["out_dir"].get<std::string>());
  if (j.contains("workers")) config.workers = j["workers"].get<int>();
  if (j.contains("provider")) config.provider = parse_provider(j["provider"]);
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, {"path", "count", "gold_path"}, "dataset");
    if (d.contains("path")) {
      config.dataset_path = resolve_path(base_dir, d["path"].get<std::string>());
      require_exists(config.dataset_path, "dataset file");
    }
    if (d.contains("count")) config.dataset_count = d["count"].get<int>();
    if (d.contains("gold_path")) {
      config.gold_path = resolve_path(base_dir, d["gold_path"].get<std::string>());
      require_exists(config.gold_path, "gold file");
    }
  }
  if (j.contains("instruction_template"))
    config.instruction_template = j["instruction_template"].get<std::string>();
  if (j.contains("prior")) config.prior = parse_prior(j["prior"], base_dir);
  if (j.contains("decode")) config.decode = parse_decode(j["decode"]);
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    check_keys(a, {"ks", "epsilon", "inject_prior", "prompt_count"}, "analysis");
    if (a.contains("ks")) config.analysis.ks = a["ks"].get<std::vector<std::size_t>>();
    if (config.analysis.ks.empty() || !std::is_sorted(config.analysis.ks.begin(),
                                                      config.analysis.ks.end()))
      throw ConfigError("analysis.ks must be a non-empty ascending list");
    if (a.contains("epsilon")) config.analysis.epsilon = a["epsilon"].get<double>();
    if (config.analysis.epsilon <= 0.0) throw ConfigError("analysis.epsilon must be > 0");
    if (a.contains("inject_prior")) config.analysis.inject_prior = a["inject_prior"].get<bool>();
    if (a.contains("prompt_count")) config.analysis.prompt_count = a["prompt_count"].get<int>();
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, {"k_min", "k_max", "k_limit"}, "sweep");
    if (s.contains("k_min")) config.sweep.k_min = s["k_min"].get<int>();
    if (s.contains("k_max")) config.sweep.k_max = s["k_max"].get<int>();
    if (s.contains("k_limit")) config.sweep.k_limit = s["k_limit"].get<int>();
  }
  if (config.sweep.k_min < 1 || config.sweep.k_max < config.sweep.k_min ||
      config.sweep.k_max > config.sweep.k_limit)
    throw ConfigError("sweep range must satisfy 1 <= k_min <= k_max <= k_limit");
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, {"tokenizer", "bleu_max_n"}, "eval");
    const std::string tok = e.value("tokenizer", "whitespace");
    if (tok == "whitespace") config.eval.tokenizer = eval::MetricTokenizer::Whitespace;
    else if (tok == "character") config.eval.tokenizer = eval::MetricTokenizer::Character;
    else throw ConfigError("eval.tokenizer must be whitespace or character");
    if (e.contains("bleu_max_n")) config.eval.bleu_max_n = e["bleu_max_n"].get<int>();
  }
  return config;
} catch (const json::exception& e) {
  throw ConfigError(std::string("config field has the wrong type: ") + e.what());
}

ExperimentConfig load_config(const std::string& path) {
  require_exists(path, "config file");
  const std::string text = read_text_file(path);
  return parse_config(text, fs::path(path).parent_path().string());
}

std::string config_to_json(const ExperimentConfig& config) {
  json j;
  j["task"] = task_name(config.task);
  j["seed"] = config.seed;
  j["out_dir"] = config.out_dir;
  j["workers"] = config.workers;
  json provider;
  if (config.provider.kind == ProviderConfig::Kind::ToyPair) {
    provider["kind"] = "toy-pair";
    provider["world"] = {{"seed", config.provider.world.seed},
                         {"lexicon_size", config.provider.world.lexicon_size},
                         {"parallel_fraction", config.provider.world.parallel_fraction},
                         {"min_sentence_len", config.provider.world.min_sentence_len},
                         {"max_sentence_len", config.provider.world.max_sentence_len},
                         {"follow_prob", config.provider.world.follow_prob}};
    provider["pretrain_size"] = config.provider.pair.pretrain_size;
    provider["sft_size"] = config.provider.pair.sft_size;
    provider["sft_weight"] = config.provider.pair.sft_weight;
    provider["ngram"] = {{"order", config.provider.pair.ngram.order},
                         {"alpha", config.provider.pair.ngram.alpha},
                         {"lambdas", config.provider.pair.ngram.lambdas}};
  } else {
    provider["kind"] = "remote";
    provider["base_url"] = config.provider.base_url;
    provider["sft_url"] = config.provider.sft_url;
    provider["timeout_ms"] = config.provider.timeout_ms;
    provider["max_in_flight"] = config.provider.max_in_flight;
    if (config.provider.top_k) provider["top_k"] = *config.provider.top_k;
  }
  j["provider"] = std::move(provider);
  j["dataset"] = {{"count", config.dataset_count}};
  if (!config.dataset_path.empty()) j["dataset"]["path"] = config.dataset_path;
  if (!config.gold_path.empty()) j["dataset"]["gold_path"] = config.gold_path;
  j["instruction_template"] = config.instruction_template;

  json prior;
  prior["variant"] = priors::prior_tag(config.prior);
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, priors::SftPrior>) {
          prior["k"] = spec.k;
        } else if constexpr (std::is_same_v<T, priors::RefinedPrior>) {
          prior["hypotheses"] = spec.hypotheses_path;
          prior["k"] = spec.k;
        } else if constexpr (std::is_same_v<T, priors::PseudoPrior>) {
          prior["variant"] = "pseudo";
          prior["dictionary"] = spec.dictionary_path;
          prior["mode"] = spec.keyword_mode ? "keyword" : "first_hit";
          if (!spec.stopwords_path.empty()) prior["stopwords"] = spec.stopwords_path;
        } else if constexpr (std::is_same_v<T, priors::RandomPrior>) {
          prior["lexicon"] = spec.lexicon_path;
          prior["category"] = spec.category;
          prior["seed"] = spec.seed;
        }
      },
      config.prior);
  j["prior"] = std::move(prior);

  j["decode"] = {{"strategy",
                  config.decode.strategy == decode::Strategy::Greedy ? "greedy" : "top_k_sample"},
                 {"max_new_tokens", config.decode.max_new_tokens},
                 {"stop_sequences", config.decode.stop_sequences},
                 {"sample_top_k", config.decode.sample_top_k},
                 {"temperature", config.decode.temperature},
                 {"seed", config.decode.seed}};
  j["analysis"] = {{"ks", config.analysis.ks},
                   {"epsilon", config.analysis.epsilon},
                   {"inject_prior", config.analysis.inject_prior},
                   {"prompt_count", config.analysis.prompt_count}};
  j["sweep"] = {{"k_min", config.sweep.k_min},
                {"k_max", config.sweep.k_max},
                {"k_limit", config.sweep.k_limit}};
  j["eval"] = {{"tokenizer", config.eval.tokenizer == eval::MetricTokenizer::Whitespace
                                 ? "whitespace"
                                 : "character"},
               {"bleu_max_n", config.eval.bleu_max_n}};
  return dump_json(j);
}

namespace {

// ---------------------------------------------------------------------------
// Shared run-directory plumbing
// ---------------------------------------------------------------------------

struct RunContext {
  std::string dir;
  std::string config_json;
  std::string created_at;
};

RunContext open_run_dir(const ExperimentConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("out_dir is required");
  RunContext ctx;
  ctx.dir = config.out_dir;
  ensure_dir(ctx.dir);
  // the run directory is where the file lives; embedding it would make
  // otherwise-identical runs differ byte-wise
  ExperimentConfig resolved = config;
  resolved.out_dir.clear();
  ctx.config_json = config_to_json(resolved);
  ctx.created_at = iso8601_now();
  write_text_file(ctx.dir + "/config.json", ctx.config_json);
  return ctx;
}

void write_manifest(const RunContext& ctx, bool incomplete) {
  json manifest;
  manifest["tool"] = "yarnlab";
  manifest["version"] = kVersion;
  manifest["config_hash"] = sha256_hex(ctx.config_json);
  manifest["created_at"] = ctx.created_at;
  manifest["finished_at"] = iso8601_now();
  manifest["incomplete"] = incomplete;
  write_json_file(ctx.dir + "/manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// Prior construction for one example
// ---------------------------------------------------------------------------

struct BuiltPrior {
  priors::PriorTokens prior;
  bool fallback = false;
};

struct PriorResources {
  std::optional<priors::BilingualDictionary> dictionary;
  std::unordered_set<std::string> stopwords;
};

PriorResources load_prior_resources(const priors::PriorSpec& spec) {
  PriorResources resources;
  if (const auto* pseudo = std::get_if<priors::PseudoPrior>(&spec)) {
    resources.dictionary.emplace(priors::load_dictionary(pseudo->dictionary_path));
    if (pseudo->keyword_mode && !pseudo->stopwords_path.empty())
      resources.stopwords = priors::load_stopwords(pseudo->stopwords_path);
  }
  return resources;
}

BuiltPrior build_prior_for_example(const priors::PriorSpec& spec, const PriorResources& resources,
                                   const Example& ex, const std::string& instruction,
                                   lm::LmProvider* sft_provider, int k_override = 0) {
  const auto tokenizer = priors::whitespace_text_tokenizer();
  BuiltPrior built;
  try {
    if (const auto* sft = std::get_if<priors::SftPrior>(&spec)) {
      if (!sft_provider) throw ConfigError("sft prior requires an SFT provider");
      built.prior = priors::build_sft_prior(*sft_provider, instruction,
                                            k_override > 0 ? k_override : sft->k);
    } else if (const auto* refined = std::get_if<priors::RefinedPrior>(&spec)) {
      built.prior = priors::build_refined_prior(refined->hypotheses_path, ex.id,
                                                k_override > 0 ? k_override : refined->k,
                                                tokenizer);
    } else if (const auto* pseudo = std::get_if<priors::PseudoPrior>(&spec)) {
      if (pseudo->keyword_mode) {
        built.prior = priors::build_pseudo_keyword_prior(ex.source, *resources.dictionary,
                                                         resources.stopwords, tokenizer, tokenizer);
      } else {
        built.prior = priors::build_pseudo_prior(ex.source, *resources.dictionary, tokenizer,
                                                 tokenizer);
      }
    } else if (const auto* random = std::get_if<priors::RandomPrior>(&spec)) {
      built.prior = priors::build_random_prior(random->lexicon_path, random->category, random->seed);
    } else {
      built.prior.source_tag = "none";
    }
  } catch (const NoDictionaryHitError&) {
    built.prior = priors::PriorTokens{};
    built.prior.source_tag = "none";
    built.fallback = true;
  }
  return built;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

std::map<std::string, double> corpus_metrics(Task task, const std::vector<std::string>& hyps,
                                             const std::vector<std::string>& refs,
                                             const EvalOptions& options) {
  std::map<std::string, double> metrics;
  if (task == Task::Translation) {
    metrics["bleu"] = eval::bleu(hyps, refs, options.tokenizer, options.bleu_max_n);
  } else if (task == Task::Summarization) {
    double r2 = 0.0;
    double rl = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      r2 += eval::rouge_n(hyps[i], refs[i], 2, options.tokenizer).f1;
      rl += eval::rouge_l(hyps[i], refs[i], options.tokenizer).f1;
    }
    metrics["rouge2_f1"] = r2 / static_cast<double>(hyps.size());
    metrics["rougeL_f1"] = rl / static_cast<double>(hyps.size());
  } else {
    throw ConfigError("corpus metrics are defined for translation and summarization tasks");
  }
  return metrics;
}

json per_example_metrics(Task task, const Example& ex, const std::string& hyp,
                         const EvalOptions& options) {
  json scores;
  if (task == Task::Translation) {
    scores["bleu"] = eval::bleu({hyp}, {ex.reference}, options.tokenizer, options.bleu_max_n);
  } else {
    scores["rouge2_f1"] = eval::rouge_n(hyp, ex.reference, 2, options.tokenizer).f1;
    scores["rougeL_f1"] = eval::rouge_l(hyp, ex.reference, options.tokenizer).f1;
  }
  return scores;
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::string tables_markdown(const std::vector<std::pair<std::string, std::map<std::string, double>>>&
                                systems,
                            const std::map<std::string, double>& sft_scores) {
  std::ostringstream out;
  std::vector<std::string> metric_names;
  for (const auto& [metric, _] : sft_scores) metric_names.push_back(metric);

  out << "| System |";
  for (const auto& m : metric_names) out << " " << m << " |";
  out << " %SFT |\n";
  out << "|---|";
  for (std::size_t i = 0; i < metric_names.size(); ++i) out << "---|";
  out << "---|\n";
  for (const auto& [name, scores] : systems) {
    out << "| " << name << " |";
    for (const auto& m : metric_names) out << " " << format_score(scores.at(m)) << " |";
    const auto pct = eval::percent_of_sft(scores, sft_scores);
    out << " " << format_score(pct.all) << " |\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Decode pass over a dataset (one system)
// ---------------------------------------------------------------------------

struct DecodedExample {
  Example example;
  BuiltPrior prior;
  decode::Hypothesis hypothesis;
  bool done = false;
  std::string error;
};

struct DecodePass {
  std::vector<DecodedExample> rows;
  bool incomplete = false;
  std::string first_error;
  std::exception_ptr first_exception;
  std::size_t decoded = 0;
};

DecodePass decode_dataset(const ExperimentConfig& config, const std::vector<Example>& examples,
                          lm::LmProvider& generator, lm::LmProvider* sft_provider,
                          const priors::PriorSpec& spec, const PriorResources& resources,
                          int k_override = 0) {
  DecodePass pass;
  pass.rows.resize(examples.size());
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  parallel_for(examples.size(), config.workers, [&](std::size_t i) {
    auto& row = pass.rows[i];
    row.example = examples[i];
    const std::string instruction = render_for_example(config, examples[i]);
    try {
      row.prior = build_prior_for_example(spec, resources, examples[i], instruction, sft_provider,
                                          k_override);
      decode::DecodeConfig dc = config.decode;
      dc.seed = Rng::mix(config.seed ^ config.decode.seed, 1000 + i);
      row.hypothesis = decode::decode_with_prior(generator, instruction, row.prior.prior, dc);
      row.done = true;
    } catch (const Error& e) {
      row.error = e.what();
      std::lock_guard lock(error_mutex);
      if (!pass.first_exception) pass.first_exception = std::current_exception();
      failed.store(true);
      return false;  // abort: stop pulling new examples
    }
    return true;
  });
  for (const auto& row : pass.rows) {
    if (row.done) ++pass.decoded;
    if (pass.first_error.empty() && !row.error.empty()) pass.first_error = row.error;
  }
  pass.incomplete = failed.load();
  return pass;
}

json hypothesis_record(const DecodedExample& row) {
  json record;
  record["id"] = row.example.id;
  record["source"] = row.example.source;
  record["reference"] = row.example.reference;
  record["prior_tag"] = row.prior.prior.source_tag;
  record["prior_tokens"] = row.prior.prior.texts;
  record["fallback"] = row.prior.fallback;
  record["short_prior"] = row.prior.prior.diagnostics.short_prior;
  if (row.prior.prior.diagnostics.backoff_position)
    record["backoff_position"] = *row.prior.prior.diagnostics.backoff_position;
  record["hypothesis"] = row.hypothesis.full_text;
  record["continuation"] = row.hypothesis.continuation.ids;
  return record;
}

struct SystemScores {
  std::map<std::string, double> metrics;
  json per_example = json::array();
};

SystemScores score_pass(const ExperimentConfig& config, const DecodePass& pass) {
  std::vector<std::string> hyps;
  std::vector<std::string> refs;
  SystemScores scores;
  for (const auto& row : pass.rows) {
    if (!row.done) continue;
    hyps.push_back(row.hypothesis.full_text);
    refs.push_back(row.example.reference);
  }
  if (hyps.empty()) throw PartialRunError("no examples decoded");
  scores.metrics = corpus_metrics(config.task, hyps, refs, config.eval);
  for (const auto& row : pass.rows) {
    if (!row.done) continue;
    json item;
    item["id"] = row.example.id;
    item["scores"] = per_example_metrics(config.task, row.example, row.hypothesis.full_text,
                                         config.eval);
    scores.per_example.push_back(std::move(item));
  }
  return scores;
}

void write_hypotheses(const std::string& path, const DecodePass& pass) {
  std::string out;
  for (const auto& row : pass.rows) {
    if (!row.done) continue;
    out += hypothesis_record(row).dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

json diagnostics_json(const DecodePass& pass) {
  std::size_t fallback = 0;
  std::size_t short_prior = 0;
  std::size_t done = 0;
  json errors = json::array();
  for (const auto& row : pass.rows) {
    if (row.done) ++done;
    if (row.prior.fallback) ++fallback;
    if (row.prior.prior.diagnostics.short_prior) ++short_prior;
    if (!row.error.empty()) errors.push_back(row.error);
  }
  json diag;
  diag["examples"] = pass.rows.size();
  diag["decoded"] = done;
  diag["fallback_count"] = fallback;
  diag["short_prior_count"] = short_prior;
  diag["errors"] = std::move(errors);
  diag["incomplete"] = pass.incomplete;
  return diag;
}

// ---------------------------------------------------------------------------
// Agreement/divergence report serialization
// ---------------------------------------------------------------------------

json agreement_json(const analysis::AgreementReport& report) {
  json j;
  j["setup"] = report.setup;
  j["ks"] = report.ks;
  json agreement;
  for (const auto& [k, value] : report.agreement) agreement[std::to_string(k)] = value;
  j["agreement"] = std::move(agreement);
  j["length"] = report.length;
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"prefix_id", r.prefix_id}, {"y_sft", r.y_sft}, {"rank", r.rank}});
  }
  j["records"] = std::move(records);
  return j;
}

json divergence_json(const analysis::DivergenceReport& report) {
  json j;
  j["epsilon"] = report.epsilon;
  j["mean"] = {{"kl", report.mean.kl}, {"js", report.mean.js}, {"ce", report.mean.ce}};
  json rows = json::array();
  for (const auto& d : report.per_example)
    rows.push_back({{"kl", d.kl}, {"js", d.js}, {"ce", d.ce}});
  j["per_example"] = std::move(rows);
  return j;
}

std::string agreement_records_csv(const analysis::AgreementReport& report) {
  std::ostringstream out;
  out << "prefix_id,K,hit,rank\n";
  for (const auto& record : report.records) {
    for (auto k : report.ks) {
      const bool hit = record.rank > 0 && record.rank <= k;
      out << record.prefix_id << "," << k << "," << (hit ? 1 : 0) << "," << record.rank << "\n";
    }
  }
  return out.str();
}

std::string agreement_curve_csv(const analysis::AgreementReport& without,
                                const analysis::AgreementReport& with) {
  std::ostringstream out;
  out << "setup,K,agreement\n";
  for (const auto& [k, value] : without.agreement)
    out << "without_prior," << k << "," << value << "\n";
  for (const auto& [k, value] : with.agreement) out << "with_prior," << k << "," << value << "\n";
  return out.str();
}

std::string divergence_csv(const analysis::DivergenceReport& without,
                           const analysis::DivergenceReport& with) {
  std::ostringstream out;
  out << "setup,prefix_id,kl,js,ce\n";
  for (std::size_t i = 0; i < without.per_example.size(); ++i) {
    const auto& d = without.per_example[i];
    out << "without_prior," << i << "," << d.kl << "," << d.js << "," << d.ce << "\n";
  }
  for (std::size_t i = 0; i < with.per_example.size(); ++i) {
    const auto& d = with.per_example[i];
    out << "with_prior," << i << "," << d.kl << "," << d.js << "," << d.ce << "\n";
  }
  return out.str();
}

std::string traces_csv(const toylab::PhenomenonReport& report) {
  std::ostringstream out;
  out << "prefix_id,base_without,sft_without,base_with,sft_with\n";
  for (std::size_t i = 0; i < report.trace_base_without.size(); ++i) {
    out << i << "," << report.trace_base_without[i] << "," << report.trace_sft_without[i] << ","
        << report.trace_base_with[i] << "," << report.trace_sft_with[i] << "\n";
  }
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

RunResult run_decode_experiment(const ExperimentConfig& config) {
  if (config.task == Task::PosTagging)
    throw ConfigError("the decode experiment supports translation and summarization tasks");
  RunContext ctx = open_run_dir(config);
  Providers providers = build_providers(config);
  const std::vector<Example> examples = resolve_examples(config, providers);
  const PriorResources resources = load_prior_resources(config.prior);
  const bool has_prior = !std::holds_alternative<priors::NoPrior>(config.prior);

  const DecodePass system_pass = decode_dataset(config, examples, *providers.base,
                                                providers.sft.get(), config.prior, resources);
  write_hypotheses(ctx.dir + "/hypotheses.jsonl", system_pass);
  write_json_file(ctx.dir + "/diagnostics.json", diagnostics_json(system_pass));

  if (system_pass.incomplete) {
    write_manifest(ctx, true);
    // nothing decoded: surface the provider error itself rather than a partial run
    if (system_pass.decoded == 0 && system_pass.first_exception)
      std::rethrow_exception(system_pass.first_exception);
    throw PartialRunError("decode run incomplete: " + system_pass.first_error);
  }

  // Reference pass: the SFT model decoding plainly, scored with the same metrics.
  json report;
  report["task"] = task_name(config.task);
  const SystemScores system_scores = score_pass(config, system_pass);
  report["system"] = {{"name", has_prior ? "base_with_prior_" + priors::prior_tag(config.prior)
                                         : "base_plain"},
                      {"metrics", system_scores.metrics},
                      {"per_example", system_scores.per_example}};

  std::vector<std::pair<std::string, std::map<std::string, double>>> table_rows;
  if (providers.sft) {
    const DecodePass sft_pass = decode_dataset(config, examples, *providers.sft, nullptr,
                                               priors::NoPrior{}, PriorResources{});
    if (!sft_pass.incomplete) {
      const SystemScores sft_scores = score_pass(config, sft_pass);
      report["sft_reference"] = {{"metrics", sft_scores.metrics}};
      const auto pct = eval::percent_of_sft(system_scores.metrics, sft_scores.metrics);
      report["percent_sft"] = {{"per_metric", pct.per_metric}, {"all", pct.all}};
      table_rows.emplace_back("sft_reference", sft_scores.metrics);
      if (has_prior) {
        const DecodePass plain_pass = decode_dataset(config, examples, *providers.base, nullptr,
                                                     priors::NoPrior{}, PriorResources{});
        if (!plain_pass.incomplete) {
          const SystemScores plain_scores = score_pass(config, plain_pass);
          report["base_plain"] = {{"metrics", plain_scores.metrics}};
          table_rows.emplace_back("base_plain", plain_scores.metrics);
        }
      }
      table_rows.emplace_back(report["system"]["name"].get<std::string>(), system_scores.metrics);
      write_text_file(ctx.dir + "/tables.md", tables_markdown(table_rows, sft_scores.metrics));
    }
  }
  write_json_file(ctx.dir + "/eval_report.json", report);
  write_manifest(ctx, false);
  return {ctx.dir, false};
}

RunResult run_agreement_experiment(const ExperimentConfig& config) {
  RunContext ctx = open_run_dir(config);
  Providers providers = build_providers(config);
  if (!providers.sft)
    throw ConfigError("the agreement experiment requires both a base and an SFT provider");

  std::vector<std::string> prompts;
  if (!config.dataset_path.empty()) {
    for (const auto& ex : load_jsonl_dataset(config.dataset_path))
      prompts.push_back(render_for_example(config, ex));
  } else {
    if (!providers.world) throw ConfigError("prompt generation requires a toy-pair provider");
    for (const auto& ex :
         toylab::make_translation_dataset(*providers.world, config.analysis.prompt_count))
      prompts.push_back(render_instruction(config.instruction_template, {{"source", ex.source}}));
  }

  std::vector<TokenSeq> prefixes;
  prefixes.reserve(prompts.size());
  for (const auto& prompt : prompts) prefixes.push_back(providers.base->tokenize(prompt));

  const auto& ks = config.analysis.ks;
  const double eps = config.analysis.epsilon;
  const auto agreement_without =
      analysis::agreement_at_k(*providers.base, *providers.sft, prefixes, ks, false, "without_prior");
  const auto agreement_with =
      analysis::agreement_at_k(*providers.base, *providers.sft, prefixes, ks, true, "with_prior");
  const auto divergence_without =
      analysis::dataset_divergence(*providers.base, *providers.sft, prefixes, false, eps);
  const auto divergence_with =
      analysis::dataset_divergence(*providers.base, *providers.sft, prefixes, true, eps);

  json report;
  report["prompts"] = prompts.size();
  report["agreement"] = {{"without_prior", agreement_json(agreement_without)},
                         {"with_prior", agreement_json(agreement_with)}};
  report["divergence"] = {{"without_prior", divergence_json(divergence_without)},
                          {"with_prior", divergence_json(divergence_with)}};
  write_json_file(ctx.dir + "/report.json", report);
  write_text_file(ctx.dir + "/agreement_records_without_prior.csv",
                  agreement_records_csv(agreement_without));
  write_text_file(ctx.dir + "/agreement_records_with_prior.csv",
                  agreement_records_csv(agreement_with));
  write_text_file(ctx.dir + "/agreement_curve.csv",
                  agreement_curve_csv(agreement_without, agreement_with));
  write_text_file(ctx.dir + "/divergence.csv", divergence_csv(divergence_without, divergence_with));
  write_manifest(ctx, false);
  return {ctx.dir, false};
}

RunResult run_prefix_sweep(const ExperimentConfig& config) {
  const bool sweepable = std::holds_alternative<priors::SftPrior>(config.prior) ||
                         std::holds_alternative<priors::RefinedPrior>(config.prior);
  if (!sweepable) throw ConfigError("the prefix sweep requires an sft or refined prior");
  if (config.task == Task::PosTagging)
    throw ConfigError("the prefix sweep supports translation and summarization tasks");

  RunContext ctx = open_run_dir(config);
  Providers providers = build_providers(config);
  if (!providers.sft) throw ConfigError("the prefix sweep requires an SFT provider");
  const std::vector<Example> examples = resolve_examples(config, providers);
  const PriorResources resources = load_prior_resources(config.prior);

  const DecodePass sft_pass = decode_dataset(config, examples, *providers.sft, nullptr,
                                             priors::NoPrior{}, PriorResources{});
  if (sft_pass.incomplete) {
    write_manifest(ctx, true);
    throw PartialRunError("sft reference pass incomplete: " + sft_pass.first_error);
  }
  const SystemScores sft_scores = score_pass(config, sft_pass);

  json report;
  report["task"] = task_name(config.task);
  report["provenance"] = {{"config_hash", sha256_hex(ctx.config_json)}, {"seed", config.seed}};
  report["sft_reference"] = {{"metrics", sft_scores.metrics}};
  json by_k = json::object();
  std::ostringstream csv;
  csv << "k,metric,value,percent_sft\n";
  for (int k = config.sweep.k_min; k <= config.sweep.k_max; ++k) {
    const DecodePass pass = decode_dataset(config, examples, *providers.base, providers.sft.get(),
                                           config.prior, resources, k);
    if (pass.incomplete) {
      write_manifest(ctx, true);
      throw PartialRunError("sweep pass k=" + std::to_string(k) +
                            " incomplete: " + pass.first_error);
    }
    write_hypotheses(ctx.dir + "/hypotheses_k" + std::to_string(k) + ".jsonl", pass);
    const SystemScores scores = score_pass(config, pass);
    const auto pct = eval::percent_of_sft(scores.metrics, sft_scores.metrics);
    by_k[std::to_string(k)] = {{"metrics", scores.metrics},
                               {"percent_sft", {{"per_metric", pct.per_metric}, {"all", pct.all}}}};
    for (const auto& [metric, value] : scores.metrics) {
      csv << k << "," << metric << "," << value << "," << pct.per_metric.at(metric) << "\n";
    }
  }
  report["by_k"] = std::move(by_k);
  write_json_file(ctx.dir + "/report.json", report);
  write_text_file(ctx.dir + "/sweep.csv", csv.str());
  write_manifest(ctx, false);
  return {ctx.dir, false};
}

RunResult run_toy_lab(const ExperimentConfig& config) {
  ExperimentConfig resolved = config;
  resolved.provider.kind = ProviderConfig::Kind::ToyPair;
  resolved.provider.world.seed = config.seed;
  RunContext ctx = open_run_dir(resolved);

  const toylab::SyntheticWorld world(resolved.provider.world);
  const toylab::ToyPair pair = toylab::build_toy_pair(world, resolved.provider.pair);
  const auto dataset = toylab::make_translation_dataset(world, resolved.analysis.prompt_count);
  std::vector<std::string> prompts;
  prompts.reserve(dataset.size());
  for (const auto& ex : dataset)
    prompts.push_back(render_instruction(resolved.instruction_template, {{"source", ex.source}}));

  const auto phenomenon = toylab::run_phenomenon_experiment(world, pair, prompts,
                                                            resolved.analysis.ks,
                                                            resolved.analysis.epsilon);

  json report;
  report["world"] = {{"seed", resolved.provider.world.seed},
                     {"lexicon_size", resolved.provider.world.lexicon_size},
                     {"parallel_fraction", resolved.provider.world.parallel_fraction},
                     {"min_sentence_len", resolved.provider.world.min_sentence_len},
                     {"max_sentence_len", resolved.provider.world.max_sentence_len},
                     {"follow_prob", resolved.provider.world.follow_prob}};
  report["prompts"] = prompts.size();
  report["agreement"] = {{"without_prior", agreement_json(phenomenon.agreement_without)},
                         {"with_prior", agreement_json(phenomenon.agreement_with)}};
  report["divergence"] = {{"without_prior", divergence_json(phenomenon.divergence_without)},
                          {"with_prior", divergence_json(phenomenon.divergence_with)}};
  report["traces"] = {{"base_without", phenomenon.trace_base_without},
                      {"sft_without", phenomenon.trace_sft_without},
                      {"base_with", phenomenon.trace_base_with},
                      {"sft_with", phenomenon.trace_sft_with}};
  report["decode_fractions"] = {{"plain_target_fraction", phenomenon.plain_target_fraction},
                                {"injected_target_fraction", phenomenon.injected_target_fraction}};
  write_json_file(ctx.dir + "/report.json", report);
  write_text_file(ctx.dir + "/agreement_records_without_prior.csv",
                  agreement_records_csv(phenomenon.agreement_without));
  write_text_file(ctx.dir + "/agreement_records_with_prior.csv",
                  agreement_records_csv(phenomenon.agreement_with));
  write_text_file(ctx.dir + "/agreement_curve.csv",
                  agreement_curve_csv(phenomenon.agreement_without, phenomenon.agreement_with));
  write_text_file(ctx.dir + "/divergence.csv",
                  divergence_csv(phenomenon.divergence_without, phenomenon.divergence_with));
  write_text_file(ctx.dir + "/traces.csv", traces_csv(phenomenon));

  // World data for downstream decode/sweep configs.
  const std::string data_dir = ctx.dir + "/world_data";
  ensure_dir(data_dir);
  std::string pretrain_text;
  for (const auto& line : toylab::gen_pretrain_corpus(world, resolved.provider.pair.pretrain_size))
    pretrain_text += join_tokens(line) + "\n";
  write_text_file(data_dir + "/pretrain.txt", pretrain_text);
  std::string sft_text;
  for (const auto& line : toylab::gen_sft_corpus(world, resolved.provider.pair.sft_size))
    sft_text += join_tokens(line) + "\n";
  write_text_file(data_dir + "/sft.txt", sft_text);
  std::string dataset_jsonl;
  std::string gold_jsonl;
  for (const auto& ex : dataset) {
    json record = {{"id", ex.id}, {"source", ex.source}, {"reference", ex.reference}};
    dataset_jsonl += record.dump() + "\n";
    json gold = {{"id", ex.id}, {"text", ex.reference}};
    gold_jsonl += gold.dump() + "\n";
  }
  write_text_file(data_dir + "/dataset.jsonl", dataset_jsonl);
  write_text_file(data_dir + "/hypotheses_gold.jsonl", gold_jsonl);
  write_text_file(data_dir + "/dictionary.tsv", toylab::dictionary_tsv(world));

  write_manifest(ctx, false);
  return {ctx.dir, false};
}

RunResult run_prior_experiment(const ExperimentConfig& config) {
  RunContext ctx = open_run_dir(config);

  std::vector<Example> examples;
  std::vector<std::string> gold_firsts;
  if (config.task == Task::PosTagging) {
    if (config.gold_path.empty()) throw ConfigError("pos prior runs require dataset.gold_path");
    const auto sentences = eval::load_conll(config.gold_path);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      Example ex;
      char id[16];
      std::snprintf(id, sizeof(id), "s%04zu", i);
      ex.id = id;
      std::vector<std::string> words;
      for (const auto& pair : sentences[i]) words.push_back(pair.word);
      ex.source = join_tokens(words);
      ex.reference = sentences[i].empty() ? "" : sentences[i].front().tag;
      examples.push_back(std::move(ex));
      gold_firsts.push_back(sentences[i].empty() ? "" : sentences[i].front().tag);
    }
  } else {
    Providers providers;  // dataset may be toy-generated
    if (config.dataset_path.empty()) providers = build_providers(config);
    examples = resolve_examples(config, providers);
    for (const auto& ex : examples) {
      const auto words = split_whitespace(ex.reference);
      gold_firsts.push_back(words.empty() ? "" : words.front());
    }
  }

  const PriorResources resources = load_prior_resources(config.prior);
  std::shared_ptr<lm::LmProvider> sft;
  if (std::holds_alternative<priors::SftPrior>(config.prior)) {
    Providers providers = build_providers(config);
    sft = providers.sft;
    if (!sft) throw ConfigError("sft prior requires an SFT provider");
  }

  std::vector<priors::PriorTokens> built;
  built.reserve(examples.size());
  std::size_t fallback_count = 0;
  std::string jsonl;
  for (const auto& ex : examples) {
    const std::string instruction = render_for_example(config, ex);
    const BuiltPrior prior =
        build_prior_for_example(config.prior, resources, ex, instruction, sft.get());
    if (prior.fallback) ++fallback_count;
    json record;
    record["id"] = ex.id;
    record["tag"] = prior.prior.source_tag;
    record["tokens"] = prior.prior.texts;
    record["fallback"] = prior.fallback;
    record["short_prior"] = prior.prior.diagnostics.short_prior;
    if (prior.prior.diagnostics.backoff_position)
      record["backoff_position"] = *prior.prior.diagnostics.backoff_position;
    if (prior.prior.diagnostics.hit_word) record["hit_word"] = *prior.prior.diagnostics.hit_word;
    jsonl += record.dump() + "\n";
    built.push_back(prior.prior);
  }
  write_text_file(ctx.dir + "/priors.jsonl", jsonl);

  json report;
  report["count"] = examples.size();
  report["fallback_count"] = fallback_count;
  report["prior"] = priors::prior_tag(config.prior);
  report["accuracy"] = priors::prior_accuracy(built, gold_firsts);
  write_json_file(ctx.dir + "/prior_report.json", report);
  write_manifest(ctx, false);
  return {ctx.dir, false};
}

RunResult run_eval_files(const EvalFilesRequest& request) {
  if (request.out_dir.empty()) throw ConfigError("out_dir is required");
  ensure_dir(request.out_dir);

  json resolved;
  resolved["task"] = task_name(request.task);
  if (!request.scored_path.empty()) resolved["scored_path"] = request.scored_path;
  if (!request.pred_path.empty()) resolved["pred_path"] = request.pred_path;
  if (!request.gold_path.empty()) resolved["gold_path"] = request.gold_path;
  resolved["eval"] = {{"tokenizer", request.options.tokenizer == eval::MetricTokenizer::Whitespace
                                        ? "whitespace"
                                        : "character"},
                      {"bleu_max_n", request.options.bleu_max_n}};
  RunContext ctx;
  ctx.dir = request.out_dir;
  ctx.config_json = dump_json(resolved);
  ctx.created_at = iso8601_now();
  write_text_file(ctx.dir + "/config.json", ctx.config_json);

  json report;
  if (request.task == Task::PosTagging) {
    require_exists(request.pred_path, "predictions file");
    require_exists(request.gold_path, "gold file");
    const auto gold = eval::load_conll(request.gold_path);

    std::ifstream in(request.pred_path);
    if (!in) throw IoError("cannot open predictions: " + request.pred_path);
    std::vector<eval::TagSequence> predicted;
    std::size_t parse_failures = 0;
    std::size_t skipped_elements = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json record = json::parse(line, nullptr, false);
      if (record.is_discarded() || !record.contains("hypothesis"))
        throw MalformedError("prediction records need a hypothesis field", lineno);
      try {
        auto parsed = eval::parse_pos_output(record["hypothesis"].get<std::string>());
        skipped_elements += parsed.skipped_elements;
        predicted.push_back(std::move(parsed.tags));
      } catch (const NoParsableArrayError&) {
        ++parse_failures;
        predicted.push_back({});
      }
    }
    if (predicted.size() != gold.size())
      throw LengthMismatchError("prediction and gold sentence counts differ");
    const auto scores = eval::pos_scores(predicted, gold);
    report["task"] = "pos";
    report["metrics"] = {{"precision", scores.precision},
                         {"recall", scores.recall},
                         {"f1", scores.f1}};
    report["parse_failures"] = parse_failures;
    report["skipped_elements"] = skipped_elements;
  } else {
    require_exists(request.scored_path, "scored file");
    std::ifstream in(request.scored_path);
    if (!in) throw IoError("cannot open scored file: " + request.scored_path);
    std::vector<std::string> hyps;
    std::vector<std::string> refs;
    json per_example = json::array();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json record = json::parse(line, nullptr, false);
      if (record.is_discarded() || !record.contains("reference") || !record.contains("hypothesis"))
        throw MalformedError("scored records need reference and hypothesis", lineno);
      hyps.push_back(record["hypothesis"].get<std::string>());
      refs.push_back(record["reference"].get<std::string>());
      Example ex;
      ex.id = record.value("id", std::to_string(lineno));
      ex.reference = refs.back();
      json item;
      item["id"] = ex.id;
      item["scores"] = per_example_metrics(request.task, ex, hyps.back(), request.options);
      per_example.push_back(std::move(item));
    }
    if (hyps.empty()) throw EmptyInputError("scored file has no records");
    report["task"] = task_name(request.task);
    report["metrics"] = corpus_metrics(request.task, hyps, refs, request.options);
    report["per_example"] = std::move(per_example);
  }
  write_json_file(request.out_dir + "/eval_report.json", report);
  write_manifest(ctx, false);
  return {request.out_dir, false};
}

}  // namespace yarnlab::runner
