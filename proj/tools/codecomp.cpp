// codecomp: command-line entry point.
//
//   codecomp prepare      --task T --corpus C --out DIR
//   codecomp annotate     --in ENRICHED --out FILE
//   codecomp validate-kcs --task T --corpus C --gamma G --out DIR
//   codecomp train        --config F [overrides]
//   codecomp evaluate     --config F --model {codecomp,nb,em}
//   codecomp ablate       --config F
//   codecomp sweep        --config F --sizes 100,200
//   codecomp predict      --model-file M --corpus C --out DIR
//
// Flags override values read from --config.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "codecomp/cli/commands.hpp"
#include "codecomp/cli/config.hpp"

namespace {

using codecomp::cli::ExperimentConfig;

struct Overrides {
  std::string config;
  std::optional<std::string> task, corpus, format, out, model, sizes, provider, metric;
  std::optional<int> folds, reps, iters, jobs;
  std::optional<std::size_t> n_labeled, window, dim;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value experiment file");
    app->add_option("--task", task, "built-in preset name or preset file");
    app->add_option("--corpus", corpus, "corpus file");
    app->add_option("--format", format, "corpus format: jsonl or tsv");
    app->add_option("--out", out, "output directory");
    app->add_option("--folds", folds, "number of cross-validation folds");
    app->add_option("--n-labeled", n_labeled, "labeled documents per training split");
    app->add_option("--reps", reps, "repetitions");
    app->add_option("--iters", iters, "co-training iterations");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--model", model, "codecomp, nb or em");
    app->add_option("--sizes", sizes, "comma-separated labeled-set sizes");
    app->add_option("--jobs", jobs, "worker threads");
    app->add_option("--provider", provider, "hashed or precomputed:PATH");
    app->add_option("--window", window, "hashed provider window");
    app->add_option("--dim", dim, "hashed provider dimension");
    app->add_option("--gamma", gamma, "distance threshold for validate-kcs");
    app->add_option("--metric", metric, "euclidean or cosine");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : codecomp::cli::load_config(config);
    auto set = [&](const char* field, const std::optional<std::string>& v) {
      if (v) codecomp::cli::set_config_value(cfg, field, *v);
    };
    auto num = [&](const char* field, const auto& v) {
      if (v) codecomp::cli::set_config_value(cfg, field, std::to_string(*v));
    };
    set("experiment.task", task);
    set("experiment.corpus", corpus);
    set("experiment.format", format);
    set("experiment.out", out);
    set("experiment.model", model);
    set("sweep.sizes", sizes);
    set("validate.metric", metric);
    num("experiment.folds", folds);
    num("experiment.n_labeled", n_labeled);
    num("experiment.repetitions", reps);
    num("cotrain.iterations", iters);
    num("experiment.jobs", jobs);
    num("experiment.seed", seed);
    num("provider.window", window);
    num("provider.dim", dim);
    if (gamma) cfg.gamma = *gamma;
    if (provider) codecomp::cli::apply_provider_flag(cfg, *provider);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-training over key-concept decompositions of short-text classification tasks"};
  app.require_subcommand(1);

  Overrides prepare_o, validate_o, train_o, evaluate_o, ablate_o, sweep_o, predict_o;
  auto* prepare = app.add_subcommand("prepare", "tokenize, extract mentions, write enriched JSONL");
  prepare_o.attach(prepare);

  std::string annotate_in, annotate_out;
  auto* annotate = app.add_subcommand("annotate", "mark the positive human mention per document");
  annotate->add_option("--in", annotate_in, "enriched JSONL from prepare")->required();
  annotate->add_option("--out", annotate_out, "annotated JSONL (appended, resumable)")->required();

  auto* validate = app.add_subcommand("validate-kcs", "check context distances within each set");
  validate_o.attach(validate);
  auto* train = app.add_subcommand("train", "fit a model and write model.json");
  train_o.attach(train);
  auto* evaluate = app.add_subcommand("evaluate", "repeated k-fold evaluation report");
  evaluate_o.attach(evaluate);
  auto* ablate = app.add_subcommand("ablate", "single-view, combined and co-trained rows");
  ablate_o.attach(ablate);
  auto* sweep = app.add_subcommand("sweep", "F1 across labeled-set sizes");
  sweep_o.attach(sweep);
  std::string model_file;
  auto* predict = app.add_subcommand("predict", "label a corpus with a saved model");
  predict_o.attach(predict);
  predict->add_option("--model-file", model_file, "model.json written by train")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      codecomp::cli::cmd_prepare(prepare_o.resolve(), std::cout);
    } else if (annotate->parsed()) {
      const auto stats = codecomp::cli::cmd_annotate(annotate_in, annotate_out, std::cin, std::cout);
      std::cout << "annotated " << stats.annotated << ", already done " << stats.skipped_existing
                << (stats.interrupted ? " (input ended; rerun to resume)" : "") << '\n';
    } else if (validate->parsed()) {
      codecomp::cli::cmd_validate_kcs(validate_o.resolve(), std::cout);
    } else if (train->parsed()) {
      codecomp::cli::cmd_train(train_o.resolve(), std::cout);
    } else if (evaluate->parsed()) {
      codecomp::cli::cmd_evaluate(evaluate_o.resolve(), std::cout);
    } else if (ablate->parsed()) {
      codecomp::cli::cmd_ablate(ablate_o.resolve(), std::cout);
    } else if (sweep->parsed()) {
      codecomp::cli::cmd_sweep(sweep_o.resolve(), std::cout);
    } else if (predict->parsed()) {
      codecomp::cli::cmd_predict(predict_o.resolve(), model_file, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
