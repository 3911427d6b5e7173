#include <chrono>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "yarnlab/runner.hpp"
#include "yarnlab/stub_server.hpp"
#include "yarnlab/version.hpp"

namespace fs = std::filesystem;
using namespace yarnlab;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::int64_t seed = -1;
  int workers = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* config = cmd->add_option("--config", args.config_path, "Experiment config JSON");
  if (config_required) config->required();
  cmd->add_option("--out", args.out, "Output directory");
  cmd->add_option("--seed", args.seed, "Global seed override");
  cmd->add_option("--workers", args.workers, "Worker pool size (0 = available parallelism)");
}

runner::ExperimentConfig resolve_config(const CommonArgs& args) {
  runner::ExperimentConfig config;
  if (!args.config_path.empty()) config = runner::load_config(args.config_path);
  if (!args.out.empty()) config.out_dir = args.out;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.workers >= 0) config.workers = args.workers;
  return config;
}

// `--out report.json` is accepted as shorthand: the run directory is the
// parent and the main report lands under the requested name.
std::string split_report_name(std::string& out_dir) {
  fs::path out(out_dir);
  if (out.extension() == ".json") {
    std::string name = out.filename().string();
    out_dir = out.parent_path().empty() ? "." : out.parent_path().string();
    return name;
  }
  return "";
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const TimeoutError*>(&e) ||
      dynamic_cast<const VocabMismatchError*>(&e))
    return 3;
  if (dynamic_cast<const PartialRunError*>(&e)) return 4;
  return 1;
}

int run_stub_server(const CommonArgs& args, const std::string& host, int port, int inject_500,
                    const std::string& model_role) {
  runner::ExperimentConfig config = resolve_config(args);
  config.provider.world.seed = config.seed;
  toylab::SyntheticWorld world(config.provider.world);
  toylab::ToyPair pair = toylab::build_toy_pair(world, config.provider.pair);
  auto model = model_role == "sft" ? pair.sft : pair.base;

  lm::StubServerOptions options;
  options.host = host;
  options.port = port;
  options.inject_500 = inject_500;
  lm::StubServer server(std::move(model), options);
  server.start();
  std::cout << "stub server listening on " << server.url() << "\n"
            << "model: " << model_role << ", vocab fingerprint: "
            << (model_role == "sft" ? pair.sft : pair.base)->vocab_fingerprint() << "\n";
  while (true) std::this_thread::sleep_for(std::chrono::seconds(1));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"yarnlab: prior-token construction, prefix-injected decoding, and "
               "base-vs-SFT decision-space analysis"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonArgs toy_args, decode_args, agree_args, sweep_args, prior_args;
  auto* toy_cmd = app.add_subcommand("toy-lab", "Deterministic toy-world phenomenon run");
  add_common(toy_cmd, toy_args, false);

  auto* decode_cmd = app.add_subcommand("decode", "Prior construction + decoding + metrics");
  add_common(decode_cmd, decode_args, true);

  auto* agree_cmd = app.add_subcommand("agree", "Agreement@K and divergence diagnostics");
  add_common(agree_cmd, agree_args, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "Prefix-length sweep over prior k");
  add_common(sweep_cmd, sweep_args, true);

  auto* prior_cmd = app.add_subcommand("prior", "Standalone prior construction + accuracy");
  add_common(prior_cmd, prior_args, true);

  auto* eval_cmd = app.add_subcommand("eval", "Score hypothesis files without providers");
  std::string eval_task = "translation", eval_in, eval_pred, eval_gold, eval_out,
              eval_tokenizer = "whitespace";
  int eval_max_n = 4;
  eval_cmd->add_option("--task", eval_task, "translation | summarization | pos");
  eval_cmd->add_option("--in", eval_in, "Scored JSONL with id/reference/hypothesis");
  eval_cmd->add_option("--pred", eval_pred, "POS predictions JSONL with id/hypothesis");
  eval_cmd->add_option("--gold", eval_gold, "POS gold CoNLL file");
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  eval_cmd->add_option("--tokenizer", eval_tokenizer, "whitespace | character");
  eval_cmd->add_option("--max-n", eval_max_n, "BLEU maximum n-gram order");

  auto* stub_cmd = app.add_subcommand("stub-server", "Serve a toy model over the wire protocol");
  CommonArgs stub_args;
  add_common(stub_cmd, stub_args, false);
  std::string stub_host = "127.0.0.1", stub_model = "base";
  int stub_port = 8080, stub_inject = 0;
  stub_cmd->add_option("--host", stub_host, "Bind address");
  stub_cmd->add_option("--port", stub_port, "Port (0 = any free port)");
  stub_cmd->add_option("--model", stub_model, "base | sft");
  stub_cmd->add_option("--inject-500", stub_inject, "Fail the first N distribution requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (toy_cmd->parsed()) {
      runner::ExperimentConfig config = resolve_config(toy_args);
      if (config.out_dir.empty()) config.out_dir = "runs/toy-lab";
      const std::string report_name = split_report_name(config.out_dir);
      const auto result = runner::run_toy_lab(config);
      if (!report_name.empty() && report_name != "report.json") {
        fs::copy_file(fs::path(result.run_dir) / "report.json",
                      fs::path(result.run_dir) / report_name,
                      fs::copy_options::overwrite_existing);
      }
      std::cout << "toy-lab run written to " << result.run_dir << "\n";
    } else if (decode_cmd->parsed()) {
      const auto result = runner::run_decode_experiment(resolve_config(decode_args));
      std::cout << "decode run written to " << result.run_dir << "\n";
    } else if (agree_cmd->parsed()) {
      const auto result = runner::run_agreement_experiment(resolve_config(agree_args));
      std::cout << "agreement run written to " << result.run_dir << "\n";
    } else if (sweep_cmd->parsed()) {
      const auto result = runner::run_prefix_sweep(resolve_config(sweep_args));
      std::cout << "sweep run written to " << result.run_dir << "\n";
    } else if (prior_cmd->parsed()) {
      const auto result = runner::run_prior_experiment(resolve_config(prior_args));
      std::cout << "prior run written to " << result.run_dir << "\n";
    } else if (eval_cmd->parsed()) {
      runner::EvalFilesRequest request;
      if (eval_task == "translation") request.task = runner::Task::Translation;
      else if (eval_task == "summarization") request.task = runner::Task::Summarization;
      else if (eval_task == "pos") request.task = runner::Task::PosTagging;
      else throw ConfigError("unknown task: " + eval_task);
      request.scored_path = eval_in;
      request.pred_path = eval_pred;
      request.gold_path = eval_gold;
      request.out_dir = eval_out;
      if (eval_tokenizer == "character")
        request.options.tokenizer = eval::MetricTokenizer::Character;
      else if (eval_tokenizer != "whitespace")
        throw ConfigError("tokenizer must be whitespace or character");
      request.options.bleu_max_n = eval_max_n;
      const auto result = runner::run_eval_files(request);
      std::cout << "eval report written to " << result.run_dir << "\n";
    } else if (stub_cmd->parsed()) {
      if (stub_model != "base" && stub_model != "sft")
        throw ConfigError("stub-server model must be base or sft");
      return run_stub_server(stub_args, stub_host, stub_port, stub_inject, stub_model);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
