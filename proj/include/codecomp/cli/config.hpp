#pragma once

// Experiment configuration: a key = value file with one section per module.
//
//   [experiment]  task, corpus, format, out, model, folds, n_labeled,
//                 repetitions, seed, dev_fold, jobs, lexicon_dir
//   [provider]    kind (hashed|precomputed), window, dim, path
//   [cotrain]     iterations, promotions_per_view, confidence_floor, neutral_prob
//   [learner]     learning_rate, epochs, l2_lambda, convergence_tolerance
//   [nb]          alpha
//   [em]          max_iterations, unlabeled_weight, convergence_tolerance, alpha,
//                 unlabeled_pool
//   [validate]    gamma, pairs, metric
//   [ablation]    iterations (comma list)
//   [sweep]       sizes (comma list)
//
// '#' and ';' start comments. Unknown sections or keys are errors.

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "codecomp/context.hpp"
#include "codecomp/corpus.hpp"
#include "codecomp/eval.hpp"

namespace codecomp::cli {

struct ExperimentConfig {
  std::string task;
  std::string corpus;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  std::string out = "out";
  std::string lexicon_dir;  // empty: default location
  ModelKind model = ModelKind::codecomp;
  ExperimentSpec experiment;
  ProviderSpec provider;
  CoConfig cotrain;
  TrainConfig learner;
  double nb_alpha = 1.0;
  EMConfig em;
  std::optional<double> gamma;
  std::size_t gamma_pairs = 1000;
  DistanceMetric gamma_metric = DistanceMetric::euclidean;
  std::vector<int> ablation_iterations{13, 25, 50, 75};
  std::vector<std::size_t> sweep_sizes{100};

  ModelSpec model_spec() const {
    ModelSpec m;
    m.kind = model;
    m.cotrain = cotrain;
    m.learner = learner;
    m.provider = provider;
    m.nb_alpha = nb_alpha;
    m.em = em;
    return m;
  }

  std::filesystem::path lexicons() const {
    return lexicon_dir.empty() ? default_lexicon_dir() : std::filesystem::path(lexicon_dir);
  }
};

namespace detail {

template <typename T>
std::string join_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename T>
std::optional<std::vector<T>> parse_list(std::string_view text) {
  std::vector<T> out;
  while (!text.empty()) {
    auto comma = text.find(',');
    auto item = trim(text.substr(0, comma));
    auto v = parse_int<T>(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  // Returns an error description, or empty on success.
  std::function<std::string(ExperimentConfig&, std::string_view)> set;
};

template <typename Get, typename Ref>
Field number_field(const char* section, const char* key, Get get, Ref ref) {
  return Field{
      section, key,
      [get](const ExperimentConfig& c) {
        const auto v = get(c);
        if constexpr (std::is_floating_point_v<decltype(v)>) {
          return format_double(v);
        } else {
          return std::to_string(v);
        }
      },
      [ref](ExperimentConfig& c, std::string_view text) -> std::string {
        auto& target = ref(c);
        using T = std::remove_reference_t<decltype(target)>;
        if constexpr (std::is_floating_point_v<T>) {
          auto v = parse_double(text);
          if (!v) return "expected a number, got '" + std::string(text) + "'";
          target = *v;
        } else {
          auto v = parse_int<T>(text);
          if (!v) return "expected an integer, got '" + std::string(text) + "'";
          target = *v;
        }
        return {};
      }};
}

#define CODECOMP_NUM(section, key, expr)                                                   \
  number_field(                                                                            \
      section, key, [](const ExperimentConfig& c) { return c.expr; },                      \
      [](ExperimentConfig& c) -> decltype(auto) { return (c.expr); })

inline Field string_field(const char* section, const char* key, std::string ExperimentConfig::*m) {
  return Field{section, key, [m](const ExperimentConfig& c) { return c.*m; },
               [m](ExperimentConfig& c, std::string_view v) -> std::string {
                 c.*m = std::string(v);
                 return {};
               }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(string_field("experiment", "task", &ExperimentConfig::task));
    f.push_back(string_field("experiment", "corpus", &ExperimentConfig::corpus));
    f.push_back({"experiment", "format",
                 [](const ExperimentConfig& c) {
                   return std::string(c.corpus_format == CorpusFormat::jsonl ? "jsonl" : "tsv");
                 },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   try {
                     c.corpus_format = parse_corpus_format(v);
                   } catch (const Error& e) {
                     return e.what();
                   }
                   return {};
                 }});
    f.push_back(string_field("experiment", "out", &ExperimentConfig::out));
    f.push_back(string_field("experiment", "lexicon_dir", &ExperimentConfig::lexicon_dir));
    f.push_back({"experiment", "model",
                 [](const ExperimentConfig& c) { return std::string(to_string(c.model)); },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   try {
                     c.model = parse_model_kind(v);
                   } catch (const Error& e) {
                     return e.what();
                   }
                   return {};
                 }});
    f.push_back(CODECOMP_NUM("experiment", "folds", experiment.k_folds));
    f.push_back(CODECOMP_NUM("experiment", "n_labeled", experiment.n_labeled));
    f.push_back(CODECOMP_NUM("experiment", "repetitions", experiment.repetitions));
    f.push_back(CODECOMP_NUM("experiment", "seed", experiment.master_seed));
    f.push_back({"experiment", "dev_fold",
                 [](const ExperimentConfig& c) {
                   return c.experiment.dev_fold ? std::to_string(*c.experiment.dev_fold)
                                                : std::string("none");
                 },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   if (v == "none") {
                     c.experiment.dev_fold.reset();
                     return {};
                   }
                   auto n = parse_int<int>(v);
                   if (!n) return "expected an integer or 'none', got '" + std::string(v) + "'";
                   c.experiment.dev_fold = *n;
                   return {};
                 }});
    f.push_back(CODECOMP_NUM("experiment", "jobs", experiment.jobs));

    f.push_back({"provider", "kind",
                 [](const ExperimentConfig& c) {
                   return std::string(c.provider.kind == ProviderSpec::Kind::hashed ? "hashed"
                                                                                    : "precomputed");
                 },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   if (v == "hashed") {
                     c.provider.kind = ProviderSpec::Kind::hashed;
                   } else if (v == "precomputed") {
                     c.provider.kind = ProviderSpec::Kind::precomputed;
                   } else {
                     return "expected 'hashed' or 'precomputed', got '" + std::string(v) + "'";
                   }
                   return {};
                 }});
    f.push_back(CODECOMP_NUM("provider", "window", provider.window));
    f.push_back(CODECOMP_NUM("provider", "dim", provider.dim));
    f.push_back({"provider", "path", [](const ExperimentConfig& c) { return c.provider.path; },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   c.provider.path = std::string(v);
                   return {};
                 }});

    f.push_back(CODECOMP_NUM("cotrain", "iterations", cotrain.iterations));
    f.push_back(CODECOMP_NUM("cotrain", "promotions_per_view", cotrain.promotions_per_view));
    f.push_back(CODECOMP_NUM("cotrain", "confidence_floor", cotrain.confidence_floor));
    f.push_back(CODECOMP_NUM("cotrain", "neutral_prob", cotrain.neutral_prob));

    f.push_back(CODECOMP_NUM("learner", "learning_rate", learner.learning_rate));
    f.push_back(CODECOMP_NUM("learner", "epochs", learner.epochs));
    f.push_back(CODECOMP_NUM("learner", "l2_lambda", learner.l2_lambda));
    f.push_back(CODECOMP_NUM("learner", "convergence_tolerance", learner.convergence_tolerance));

    f.push_back(CODECOMP_NUM("nb", "alpha", nb_alpha));

    f.push_back(CODECOMP_NUM("em", "max_iterations", em.max_iterations));
    f.push_back(CODECOMP_NUM("em", "unlabeled_weight", em.unlabeled_weight));
    f.push_back(CODECOMP_NUM("em", "convergence_tolerance", em.convergence_tolerance));
    f.push_back(CODECOMP_NUM("em", "alpha", em.alpha));
    f.push_back(CODECOMP_NUM("em", "unlabeled_pool", em.unlabeled_pool));

    f.push_back({"validate", "gamma",
                 [](const ExperimentConfig& c) {
                   return c.gamma ? format_double(*c.gamma) : std::string("none");
                 },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   if (v == "none") {
                     c.gamma.reset();
                     return {};
                   }
                   auto g = parse_double(v);
                   if (!g) return "expected a number or 'none', got '" + std::string(v) + "'";
                   c.gamma = *g;
                   return {};
                 }});
    f.push_back(CODECOMP_NUM("validate", "pairs", gamma_pairs));
    f.push_back({"validate", "metric",
                 [](const ExperimentConfig& c) {
                   return std::string(c.gamma_metric == DistanceMetric::euclidean ? "euclidean"
                                                                                  : "cosine");
                 },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   try {
                     c.gamma_metric = parse_distance_metric(v);
                   } catch (const Error& e) {
                     return e.what();
                   }
                   return {};
                 }});

    f.push_back({"ablation", "iterations",
                 [](const ExperimentConfig& c) { return join_list(c.ablation_iterations); },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   auto l = parse_list<int>(v);
                   if (!l) return "expected a comma-separated list of integers";
                   c.ablation_iterations = *l;
                   return {};
                 }});
    f.push_back({"sweep", "sizes", [](const ExperimentConfig& c) { return join_list(c.sweep_sizes); },
                 [](ExperimentConfig& c, std::string_view v) -> std::string {
                   auto l = parse_list<std::size_t>(v);
                   if (!l) return "expected a comma-separated list of integers";
                   c.sweep_sizes = *l;
                   return {};
                 }});
    return f;
  }();
  return all;
}

#undef CODECOMP_NUM

inline const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace detail

// Sets "section.key" (or a bare key that names exactly one field).
inline void set_config_value(ExperimentConfig& cfg, std::string_view dotted, std::string_view value) {
  const detail::Field* field = nullptr;
  if (auto dot = dotted.find('.'); dot != std::string_view::npos) {
    field = detail::find_field(dotted.substr(0, dot), dotted.substr(dot + 1));
  }
  if (!field) throw Error("unknown config field '" + std::string(dotted) + "'");
  if (auto err = field->set(cfg, trim(value)); !err.empty()) {
    throw Error("config field " + std::string(dotted) + ": " + err);
  }
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  ExperimentConfig cfg;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto body = trim(line);
    if (body.empty() || body.front() == '#' || body.front() == ';') continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail("malformed section header");
      section = std::string(trim(body.substr(1, body.size() - 2)));
      bool known = false;
      for (const auto& f : detail::fields()) known = known || section == f.section;
      if (!known) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    if (section.empty()) fail("key outside of a section");
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    const auto* field = detail::find_field(section, key);
    if (!field) fail("unknown field " + section + "." + std::string(key));
    if (auto err = field->set(cfg, value); !err.empty()) {
      fail("field " + section + "." + std::string(key) + ": " + err);
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  return parse_config(in, path.string());
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : detail::fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

// Bounds checks owned by each module plus presence of referenced files.
inline void validate_config(const ExperimentConfig& cfg, bool needs_corpus = true) {
  if (cfg.task.empty()) throw Error("experiment.task is required");
  if (needs_corpus) {
    if (cfg.corpus.empty()) throw Error("experiment.corpus is required");
    if (!std::filesystem::is_regular_file(cfg.corpus)) {
      throw Error("experiment.corpus: file '" + cfg.corpus + "' does not exist");
    }
  }
  cfg.experiment.validate();
  cfg.cotrain.validate();
  cfg.learner.validate();
  cfg.em.validate();
  if (!(cfg.nb_alpha > 0.0)) throw Error("nb.alpha must be > 0");
  if (cfg.provider.kind == ProviderSpec::Kind::hashed) {
    if (cfg.provider.window < 1) throw Error("provider.window must be >= 1");
    if (cfg.provider.dim < 1) throw Error("provider.dim must be >= 1");
  } else {
    if (cfg.provider.path.empty()) throw Error("provider.path is required for precomputed vectors");
    if (!std::filesystem::is_regular_file(cfg.provider.path)) {
      throw Error("provider.path: file '" + cfg.provider.path + "' does not exist");
    }
  }
  if (cfg.gamma && !(*cfg.gamma >= 0.0)) throw Error("validate.gamma must be >= 0");
  if (cfg.gamma_pairs < 1) throw Error("validate.pairs must be >= 1");
  for (int k : cfg.ablation_iterations) {
    if (k < 0) throw Error("ablation.iterations entries must be >= 0");
  }
  if (cfg.sweep_sizes.empty()) throw Error("sweep.sizes must not be empty");
  for (std::size_t i = 1; i < cfg.sweep_sizes.size(); ++i) {
    if (cfg.sweep_sizes[i] <= cfg.sweep_sizes[i - 1]) {
      throw Error("sweep.sizes must be strictly ascending");
    }
  }
}

// "hashed" or "precomputed:PATH".
inline void apply_provider_flag(ExperimentConfig& cfg, std::string_view value) {
  if (value == "hashed") {
    cfg.provider.kind = ProviderSpec::Kind::hashed;
  } else if (value.starts_with("precomputed:") && value.size() > 12) {
    cfg.provider.kind = ProviderSpec::Kind::precomputed;
    cfg.provider.path = std::string(value.substr(12));
  } else {
    throw Error("--provider: expected 'hashed' or 'precomputed:PATH', got '" + std::string(value) +
                "'");
  }
}

}  // namespace codecomp::cli
