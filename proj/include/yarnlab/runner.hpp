#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "yarnlab/decode.hpp"
#include "yarnlab/eval.hpp"
#include "yarnlab/priors.hpp"
#include "yarnlab/remote.hpp"
#include "yarnlab/toylab.hpp"

namespace yarnlab::runner {

enum class Task { Translation, Summarization, PosTagging };

std::string task_name(Task task);

struct ProviderConfig {
  enum class Kind { ToyPair, Remote } kind = Kind::ToyPair;
  // toy pair
  toylab::WorldConfig world;
  toylab::ToyPairConfig pair;
  // remote
  std::string base_url;     // foundation model endpoint
  std::string sft_url;      // SFT model endpoint (optional for decode-only runs)
  int timeout_ms = 5000;
  int max_in_flight = 4;
  std::optional<int> top_k;
};

struct AnalysisOptions {
  std::vector<std::size_t> ks = {1, 3, 10, 20};
  double epsilon = 1e-12;
  bool inject_prior = true;
  int prompt_count = 200;
};

struct SweepOptions {
  int k_min = 1;
  int k_max = 5;
  int k_limit = 5;  // sweep range must stay within [1, k_limit]
};

struct EvalOptions {
  eval::MetricTokenizer tokenizer = eval::MetricTokenizer::Whitespace;
  int bleu_max_n = 4;
};

struct ExperimentConfig {
  Task task = Task::Translation;
  std::uint64_t seed = 42;
  std::string out_dir;
  int workers = 0;  // 0 = available parallelism
  ProviderConfig provider;
  std::string dataset_path;  // empty for toy-generated data
  int dataset_count = 200;   // toy-generated examples when dataset_path is empty
  std::string gold_path;     // CoNLL gold for POS runs
  std::string instruction_template = toylab::kInstructionTemplate;
  priors::PriorSpec prior = priors::NoPrior{};
  decode::DecodeConfig decode;
  AnalysisOptions analysis;
  SweepOptions sweep;
  EvalOptions eval;
};

// Parses and validates a config JSON document; referenced paths must exist.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir);

// Canonical resolved-config JSON (also the config-hash input).
std::string config_to_json(const ExperimentConfig& config);

struct RunResult {
  std::string run_dir;
  bool incomplete = false;
};

// Prior construction + prefix-injected decoding + task metrics over a
// dataset. Artifacts: config.json, manifest.json, hypotheses.jsonl,
// eval_report.json, tables.md, diagnostics.json.
RunResult run_decode_experiment(const ExperimentConfig& config);

// Agreement@K and divergence diagnostics for both prefix setups, plus
// chosen-probability traces and CSV plot data.
RunResult run_agreement_experiment(const ExperimentConfig& config);

// run_decode_experiment for each k in the sweep range; emits sweep.csv
// (k, metric, value, percent_sft) and per-k hypotheses.
RunResult run_prefix_sweep(const ExperimentConfig& config);

// Deterministic toy-lab phenomenon run; also emits the generated world data
// (corpora, dataset, dictionary, gold hypotheses) for downstream configs.
RunResult run_toy_lab(const ExperimentConfig& config);

// Standalone prior construction over a dataset, with accuracy against gold
// first labels when available.
RunResult run_prior_experiment(const ExperimentConfig& config);

// File-based scoring without providers.
struct EvalFilesRequest {
  Task task = Task::Translation;
  std::string scored_path;  // JSONL {"id", "reference", "hypothesis"} for text tasks
  std::string pred_path;    // POS: JSONL {"id", "hypothesis"}
  std::string gold_path;    // POS: CoNLL gold
  EvalOptions options;
  std::string out_dir;
};
RunResult run_eval_files(const EvalFilesRequest& request);

}  // namespace yarnlab::runner
