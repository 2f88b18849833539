#pragma once

// JSON forms of fitted models and co-training logs.

#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "codecomp/cotrain.hpp"
#include "codecomp/naive_bayes.hpp"
#include "codecomp/preset.hpp"

namespace codecomp {

using ojson = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

inline ojson to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"l2_lambda", c.l2_lambda},
          {"seed", c.seed},
          {"convergence_tolerance", c.convergence_tolerance}};
}

inline TrainConfig train_config_from_json(const ojson& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.l2_lambda = j.at("l2_lambda").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.convergence_tolerance = j.at("convergence_tolerance").get<double>();
  return c;
}

inline ojson to_json(const CoConfig& c) {
  return {{"iterations", c.iterations},
          {"promotions_per_view", c.promotions_per_view},
          {"confidence_floor", c.confidence_floor},
          {"neutral_prob", c.neutral_prob}};
}

inline CoConfig co_config_from_json(const ojson& j) {
  CoConfig c;
  c.iterations = j.at("iterations").get<int>();
  c.promotions_per_view = j.at("promotions_per_view").get<int>();
  c.confidence_floor = j.at("confidence_floor").get<double>();
  c.neutral_prob = j.at("neutral_prob").get<double>();
  return c;
}

inline ojson to_json(const ProviderSpec& p) {
  if (p.kind == ProviderSpec::Kind::precomputed) return {{"kind", "precomputed"}, {"path", p.path}};
  return {{"kind", "hashed"}, {"window", p.window}, {"dim", p.dim}};
}

inline ProviderSpec provider_spec_from_json(const ojson& j) {
  ProviderSpec p;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "precomputed") {
    p.kind = ProviderSpec::Kind::precomputed;
    p.path = j.at("path").get<std::string>();
  } else if (kind == "hashed") {
    p.window = j.at("window").get<std::size_t>();
    p.dim = j.at("dim").get<std::size_t>();
  } else {
    throw Error("unknown provider kind '" + kind + "'");
  }
  return p;
}

inline ojson to_json(const LogRegModel& m) {
  return {{"weights", m.weights},
          {"bias", m.bias},
          {"final_loss", m.final_loss},
          {"epochs_run", m.epochs_run},
          {"config", to_json(m.config)}};
}

inline LogRegModel logreg_from_json(const ojson& j) {
  LogRegModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.final_loss = j.at("final_loss").get<double>();
  m.epochs_run = j.at("epochs_run").get<int>();
  m.config = train_config_from_json(j.at("config"));
  return m;
}

inline ojson to_json(const NBModel& m) {
  return {{"type", "naive_bayes"},
          {"format_version", kModelFormatVersion},
          {"alpha", m.alpha},
          {"vocabulary", m.vocabulary.terms()},
          {"class_weight", m.class_weight},
          {"counts", {m.counts[0], m.counts[1]}}};
}

inline void check_version(const ojson& j) {
  if (j.value("format_version", 0) != kModelFormatVersion) {
    throw Error("unsupported model format_version (expected " +
                std::to_string(kModelFormatVersion) + ")");
  }
}

inline NBModel nb_from_json(const ojson& j) {
  check_version(j);
  NBModel m;
  m.alpha = j.at("alpha").get<double>();
  const auto terms = j.at("vocabulary").get<std::vector<std::string>>();
  if (terms.empty() || terms.front() != kUnknownFeature) {
    throw Error("naive Bayes vocabulary must start with " + std::string(kUnknownFeature));
  }
  for (const auto& t : terms) m.vocabulary.add(t);
  if (m.vocabulary.size() != terms.size()) throw Error("naive Bayes vocabulary has duplicates");
  m.class_weight = j.at("class_weight").get<std::array<double, 2>>();
  for (int c = 0; c < 2; ++c) {
    m.counts[c] = j.at("counts").at(c).get<std::vector<double>>();
    if (m.counts[c].size() != terms.size()) throw Error("naive Bayes count table size mismatch");
  }
  m.finalize();
  return m;
}

// A fitted co-training model together with the preset that defines its views.
struct SavedCoModel {
  TaskPreset preset;
  CoDecompModel model;
};

inline ojson to_json(const TaskPreset& preset, const CoDecompModel& m) {
  ojson classifiers = ojson::array();
  for (const auto& c : m.classifiers) classifiers.push_back(to_json(c));
  return {{"type", "codecomp"},
          {"format_version", kModelFormatVersion},
          {"preset", format_preset(preset)},
          {"kcs", m.kcs_names},
          {"provider", to_json(m.provider)},
          {"cotrain", to_json(m.co_config)},
          {"learner", to_json(m.train_config)},
          {"classifiers", classifiers}};
}

inline SavedCoModel co_model_from_json(const ojson& j, const std::filesystem::path& lexicon_dir) {
  if (j.value("type", "") != "codecomp") throw Error("not a co-training model file");
  check_version(j);
  SavedCoModel s;
  s.preset = parse_preset(j.at("preset").get<std::string>(), lexicon_dir, "<model preset>");
  s.model.kcs_names = j.at("kcs").get<std::vector<std::string>>();
  s.model.provider = provider_spec_from_json(j.at("provider"));
  s.model.co_config = co_config_from_json(j.at("cotrain"));
  s.model.train_config = train_config_from_json(j.at("learner"));
  for (const auto& c : j.at("classifiers")) s.model.classifiers.push_back(logreg_from_json(c));
  if (s.model.classifiers.size() != s.model.kcs_names.size() ||
      s.model.kcs_names.size() != s.preset.kcs.size()) {
    throw Error("model file: classifier, kcs and preset counts disagree");
  }
  return s;
}

inline ojson to_json(const IterationRecord& r, const std::vector<std::string>& kcs_names) {
  ojson views = ojson::array();
  for (std::size_t j = 0; j < r.views.size(); ++j) {
    const auto& v = r.views[j];
    views.push_back({{"kcs", j < kcs_names.size() ? kcs_names[j] : std::to_string(j)},
                     {"positive_ids", v.positive_ids},
                     {"positive_confidence", v.positive_confidence},
                     {"negative_ids", v.negative_ids},
                     {"negative_confidence", v.negative_confidence}});
  }
  return {{"iteration", r.iteration},
          {"views", views},
          {"labeled_examples", r.labeled_examples},
          {"unlabeled_examples", r.unlabeled_examples},
          {"labeled_instances", r.labeled_instances}};
}

inline void write_iteration_log(std::ostream& out, const IterationLog& log,
                                const std::vector<std::string>& kcs_names) {
  for (const auto& r : log) out << to_json(r, kcs_names).dump() << '\n';
}

inline void write_json_file(const std::filesystem::path& path, const ojson& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline ojson read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace codecomp
