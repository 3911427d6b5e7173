#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "yarnlab/analysis.hpp"
#include "yarnlab/core.hpp"
#include "yarnlab/decode.hpp"
#include "yarnlab/eval.hpp"
#include "yarnlab/lm.hpp"
#include "yarnlab/priors.hpp"
#include "yarnlab/toylab.hpp"
#include "yarnlab/version.hpp"

namespace py = pybind11;
using namespace yarnlab;

namespace {

NextTokenDistribution dense_dist(const std::vector<double>& probs) {
  return NextTokenDistribution::dense("", probs);
}

eval::MetricTokenizer tokenizer_from(const std::string& name) {
  if (name == "whitespace") return eval::MetricTokenizer::Whitespace;
  if (name == "character") return eval::MetricTokenizer::Character;
  throw Error("tokenizer must be whitespace or character");
}

py::dict prf_dict(const eval::PrfScore& score) {
  py::dict d;
  d["precision"] = score.precision;
  d["recall"] = score.recall;
  d["f1"] = score.f1;
  return d;
}

py::dict agreement_dict(const analysis::AgreementReport& report) {
  py::dict d;
  d["setup"] = report.setup;
  d["length"] = report.length;
  py::dict agreement;
  for (const auto& [k, v] : report.agreement) agreement[py::int_(k)] = v;
  d["agreement"] = agreement;
  py::list records;
  for (const auto& r : report.records) {
    py::dict rec;
    rec["prefix_id"] = r.prefix_id;
    rec["y_sft"] = r.y_sft;
    rec["rank"] = r.rank;
    records.append(rec);
  }
  d["records"] = records;
  return d;
}

py::dict divergence_mean_dict(const analysis::DivergenceReport& report) {
  py::dict d;
  d["kl"] = report.mean.kl;
  d["js"] = report.mean.js;
  d["ce"] = report.mean.ce;
  return d;
}

}  // namespace

PYBIND11_MODULE(_yarnlab, m) {
  m.doc() = "Prior-token construction, prefix-injected decoding, and base-vs-SFT analysis";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "YarnlabError");

  m.def("render_instruction",
        [](const std::string& tmpl, const std::map<std::string, std::string>& fields) {
          return render_instruction(tmpl, fields);
        },
        py::arg("template"), py::arg("fields"));

  m.def("vocabulary_fingerprint",
        [](const std::vector<std::string>& tokens) { return Vocabulary(tokens).fingerprint(); },
        py::arg("tokens"));

  m.def("argmax", [](const std::vector<double>& probs) { return argmax(dense_dist(probs)); },
        py::arg("probs"));

  m.def("top_k",
        [](const std::vector<double>& probs, std::size_t k) {
          const auto result = top_k(dense_dist(probs), k);
          return py::make_tuple(result.ids, result.truncated);
        },
        py::arg("probs"), py::arg("k"));

  m.def("clamp_normalize",
        [](const std::vector<double>& probs, double eps) { return clamp_normalize(probs, eps); },
        py::arg("probs"), py::arg("eps") = 1e-12);

  m.def("divergence",
        [](const std::vector<double>& p_sft, const std::vector<double>& p_pt, double eps) {
          const auto d = analysis::divergence(p_sft, p_pt, eps);
          py::dict result;
          result["kl"] = d.kl;
          result["js"] = d.js;
          result["ce"] = d.ce;
          return result;
        },
        py::arg("p_sft"), py::arg("p_pt"), py::arg("eps") = 1e-12);

  // --- metrics -------------------------------------------------------------
  m.def("bleu",
        [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
           const std::string& tokenizer, int max_n) {
          return eval::bleu(hyps, refs, tokenizer_from(tokenizer), max_n);
        },
        py::arg("hypotheses"), py::arg("references"), py::arg("tokenizer") = "whitespace",
        py::arg("max_n") = 4);

  m.def("rouge_n",
        [](const std::string& hyp, const std::string& ref, int n, const std::string& tokenizer) {
          return prf_dict(eval::rouge_n(hyp, ref, n, tokenizer_from(tokenizer)));
        },
        py::arg("hypothesis"), py::arg("reference"), py::arg("n") = 2,
        py::arg("tokenizer") = "whitespace");

  m.def("rouge_l",
        [](const std::string& hyp, const std::string& ref, const std::string& tokenizer) {
          return prf_dict(eval::rouge_l(hyp, ref, tokenizer_from(tokenizer)));
        },
        py::arg("hypothesis"), py::arg("reference"), py::arg("tokenizer") = "whitespace");

  m.def("parse_pos_output",
        [](const std::string& text) {
          const auto parsed = eval::parse_pos_output(text);
          py::list pairs;
          for (const auto& [word, tag] : parsed.tags) pairs.append(py::make_tuple(word, tag));
          return pairs;
        },
        py::arg("model_text"));

  m.def("pos_scores",
        [](const std::vector<std::vector<std::pair<std::string, std::string>>>& predicted,
           const std::vector<std::vector<std::pair<std::string, std::string>>>& gold) {
          auto convert = [](const auto& sentences) {
            std::vector<eval::TagSequence> out;
            for (const auto& sentence : sentences) {
              eval::TagSequence seq;
              for (const auto& [word, tag] : sentence) seq.push_back({word, tag});
              out.push_back(std::move(seq));
            }
            return out;
          };
          return prf_dict(eval::pos_scores(convert(predicted), convert(gold)));
        },
        py::arg("predicted"), py::arg("gold"));

  m.def("percent_of_sft",
        [](const std::map<std::string, double>& system, const std::map<std::string, double>& sft) {
          const auto pct = eval::percent_of_sft(system, sft);
          py::dict result;
          result["per_metric"] = pct.per_metric;
          result["all"] = pct.all;
          return result;
        },
        py::arg("system_scores"), py::arg("sft_scores"));

  m.def("prior_accuracy",
        [](const std::vector<std::vector<std::string>>& prior_tokens,
           const std::vector<std::string>& gold_firsts) {
          std::vector<priors::PriorTokens> built;
          for (const auto& texts : prior_tokens) {
            priors::PriorTokens p;
            p.texts = texts;
            built.push_back(std::move(p));
          }
          return priors::prior_accuracy(built, gold_firsts);
        },
        py::arg("prior_tokens"), py::arg("gold_firsts"));

  // --- dictionary + pseudo priors -------------------------------------------
  py::class_<priors::BilingualDictionary>(m, "BilingualDictionary")
      .def("lookup", [](const priors::BilingualDictionary& dict, const std::string& word) {
        const auto* targets = dict.lookup(word);
        return targets ? py::cast(*targets) : py::cast(std::vector<std::string>{});
      });

  m.def("load_dictionary", &priors::load_dictionary, py::arg("path"));

  m.def("build_pseudo_prior",
        [](const std::string& source_text, const priors::BilingualDictionary& dictionary) {
          const auto prior = priors::build_pseudo_prior(source_text, dictionary,
                                                        priors::whitespace_text_tokenizer(),
                                                        priors::whitespace_text_tokenizer());
          py::dict result;
          result["tokens"] = prior.texts;
          result["backoff_position"] = *prior.diagnostics.backoff_position;
          result["hit_word"] = *prior.diagnostics.hit_word;
          return result;
        },
        py::arg("source_text"), py::arg("dictionary"));

  // --- models ----------------------------------------------------------------
  py::class_<lm::NGramLm, std::shared_ptr<lm::NGramLm>>(m, "NGramModel")
      .def_property_readonly("fingerprint",
                             [](lm::NGramLm& model) { return model.vocab_fingerprint(); })
      .def_property_readonly("vocab_size", [](lm::NGramLm& model) { return model.vocab_size(); })
      .def("tokenize",
           [](lm::NGramLm& model, const std::string& text) { return model.tokenize(text).ids; })
      .def("detokenize",
           [](lm::NGramLm& model, const std::vector<TokenId>& ids) {
             TokenSeq seq;
             seq.ids = ids;
             seq.vocab_fingerprint = model.vocab_fingerprint();
             return model.detokenize(seq);
           })
      .def("next_distribution",
           [](lm::NGramLm& model, const std::vector<TokenId>& context) {
             TokenSeq seq;
             seq.ids = context;
             seq.vocab_fingerprint = model.vocab_fingerprint();
             return model.next_distribution(seq).probs();
           })
      .def("greedy_continue",
           [](lm::NGramLm& model, const std::string& text, int steps) {
             const auto continuation = lm::greedy_continue(model, model.tokenize(text), steps);
             return model.detokenize(continuation);
           },
           py::arg("text"), py::arg("steps"));

  m.def("build_ngram",
        [](const std::vector<std::string>& lines, int order, double alpha,
           const std::vector<double>& lambdas) {
          lm::NGramOptions options;
          options.order = order;
          options.alpha = alpha;
          options.lambdas = lambdas;
          return std::make_shared<lm::NGramLm>(lm::build_ngram_from_lines(lines, options));
        },
        py::arg("lines"), py::arg("order") = 3, py::arg("alpha") = 0.01,
        py::arg("lambdas") = std::vector<double>{});

  m.def("decode_with_prior",
        [](std::shared_ptr<lm::NGramLm> model, const std::string& instruction,
           const std::vector<std::string>& prior_tokens, int max_new_tokens) {
          priors::PriorTokens prior;
          prior.texts = prior_tokens;
          prior.source_tag = prior_tokens.empty() ? "none" : "external";
          decode::DecodeConfig config;
          config.max_new_tokens = max_new_tokens;
          const auto hyp = decode::decode_with_prior(*model, instruction, prior, config);
          py::dict result;
          result["full_text"] = hyp.full_text;
          result["continuation_ids"] = hyp.continuation.ids;
          result["step_probs"] = hyp.step_probs;
          return result;
        },
        py::arg("model"), py::arg("instruction"), py::arg("prior_tokens"),
        py::arg("max_new_tokens") = 16);

  m.def("agreement_at_k",
        [](std::shared_ptr<lm::NGramLm> base, std::shared_ptr<lm::NGramLm> sft,
           const std::vector<std::string>& prompts, const std::vector<std::size_t>& ks,
           bool inject) {
          std::vector<TokenSeq> prefixes;
          for (const auto& prompt : prompts) prefixes.push_back(base->tokenize(prompt));
          return agreement_dict(analysis::agreement_at_k(*base, *sft, prefixes, ks, inject,
                                                         inject ? "with_prior" : "without_prior"));
        },
        py::arg("base"), py::arg("sft"), py::arg("prompts"), py::arg("ks"),
        py::arg("inject_sft_first_token") = false);

  // --- toy lab ----------------------------------------------------------------
  py::class_<toylab::SyntheticWorld>(m, "ToyWorld")
      .def(py::init([](std::uint64_t seed, int lexicon_size, double parallel_fraction,
                       int min_sentence_len, int max_sentence_len, double follow_prob) {
             toylab::WorldConfig config;
             config.seed = seed;
             config.lexicon_size = lexicon_size;
             config.parallel_fraction = parallel_fraction;
             config.min_sentence_len = min_sentence_len;
             config.max_sentence_len = max_sentence_len;
             config.follow_prob = follow_prob;
             return toylab::SyntheticWorld(config);
           }),
           py::arg("seed") = 42, py::arg("lexicon_size") = 40,
           py::arg("parallel_fraction") = 0.05, py::arg("min_sentence_len") = 3,
           py::arg("max_sentence_len") = 8, py::arg("follow_prob") = 0.7)
      .def_property_readonly("source_lexicon", &toylab::SyntheticWorld::source_lexicon)
      .def_property_readonly("target_lexicon", &toylab::SyntheticWorld::target_lexicon)
      .def("dataset", [](const toylab::SyntheticWorld& world, int count) {
        py::list out;
        for (const auto& ex : toylab::make_translation_dataset(world, count)) {
          py::dict d;
          d["id"] = ex.id;
          d["source"] = ex.source;
          d["reference"] = ex.reference;
          out.append(d);
        }
        return out;
      });

  m.def("build_toy_pair_models",
        [](const toylab::SyntheticWorld& world, int pretrain_size, int sft_size, int sft_weight) {
          toylab::ToyPairConfig config;
          config.pretrain_size = pretrain_size;
          config.sft_size = sft_size;
          config.sft_weight = sft_weight;
          const auto pair = toylab::build_toy_pair(world, config);
          return py::make_tuple(pair.base, pair.sft);
        },
        py::arg("world"), py::arg("pretrain_size") = 5000, py::arg("sft_size") = 500,
        py::arg("sft_weight") = 20);

  m.def("run_phenomenon",
        [](const toylab::SyntheticWorld& world, std::shared_ptr<lm::NGramLm> base,
           std::shared_ptr<lm::NGramLm> sft, const std::vector<std::string>& prompts,
           const std::vector<std::size_t>& ks, double eps) {
          toylab::ToyPair pair{base, sft};
          const auto report = toylab::run_phenomenon_experiment(world, pair, prompts, ks, eps);
          py::dict result;
          result["agreement_without"] = agreement_dict(report.agreement_without);
          result["agreement_with"] = agreement_dict(report.agreement_with);
          result["divergence_without"] = divergence_mean_dict(report.divergence_without);
          result["divergence_with"] = divergence_mean_dict(report.divergence_with);
          result["plain_target_fraction"] = report.plain_target_fraction;
          result["injected_target_fraction"] = report.injected_target_fraction;
          return result;
        },
        py::arg("world"), py::arg("base"), py::arg("sft"), py::arg("prompts"), py::arg("ks"),
        py::arg("eps") = 1e-12);
}
