#pragma once

// Positive-class metrics and the repeated k-fold protocol: for every
// repetition r the fold plan is drawn with seed master + r, and inside every
// fold a stratified labeled sample is drawn from the training split; the
// rest of the split is handed to the learner without labels.

#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "codecomp/baselines.hpp"
#include "codecomp/concepts.hpp"
#include "codecomp/context.hpp"
#include "codecomp/corpus.hpp"
#include "codecomp/cotrain.hpp"
#include "codecomp/lexicon.hpp"
#include "codecomp/serialize.hpp"

namespace codecomp {

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Precision is 0 when nothing is predicted positive; likewise recall with no
// gold positives.
inline Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m{tp, fp, fn, tn, 0.0, 0.0, 0.0};
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

inline Metrics compute_metrics(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw Error("compute_metrics: " + std::to_string(predicted.size()) + " predictions for " +
                std::to_string(gold.size()) + " gold labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == Label::positive;
    const bool g = gold[i] == Label::positive;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    tn += !p && !g;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

// Keyed form: the two maps must cover the same ids.
inline Metrics compute_metrics(const std::map<std::string, Label>& predicted,
                               const std::map<std::string, Label>& gold) {
  std::vector<Label> p, g;
  for (const auto& [id, label] : gold) {
    auto it = predicted.find(id);
    if (it == predicted.end()) throw Error("compute_metrics: no prediction for document '" + id + "'");
    p.push_back(it->second);
    g.push_back(label);
  }
  for (const auto& [id, label] : predicted) {
    if (!gold.contains(id)) throw Error("compute_metrics: no gold label for document '" + id + "'");
  }
  return compute_metrics(p, g);
}

// Means of per-run metrics; counts are averaged too.
struct MetricSummary {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double tp = 0.0, fp = 0.0, fn = 0.0, tn = 0.0;
};

template <typename T>
MetricSummary mean_of(std::span<const T> items) {
  MetricSummary s;
  if (items.empty()) return s;
  for (const auto& m : items) {
    s.precision += m.precision;
    s.recall += m.recall;
    s.f1 += m.f1;
    s.tp += static_cast<double>(m.tp);
    s.fp += static_cast<double>(m.fp);
    s.fn += static_cast<double>(m.fn);
    s.tn += static_cast<double>(m.tn);
  }
  const double n = static_cast<double>(items.size());
  for (double* v : {&s.precision, &s.recall, &s.f1, &s.tp, &s.fp, &s.fn, &s.tn}) *v /= n;
  return s;
}

// ---------------------------------------------------------------------------
// Experiment specification

enum class ModelKind { codecomp, nb, em };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::codecomp: return "codecomp";
    case ModelKind::nb: return "nb";
    case ModelKind::em: return "em";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "codecomp") return ModelKind::codecomp;
  if (s == "nb") return ModelKind::nb;
  if (s == "em") return ModelKind::em;
  throw Error("unknown model '" + std::string(s) + "' (expected codecomp, nb or em)");
}

struct ModelSpec {
  ModelKind kind = ModelKind::codecomp;
  CoConfig cotrain;
  TrainConfig learner;
  ProviderSpec provider;
  double nb_alpha = 1.0;
  EMConfig em;
};

struct ExperimentSpec {
  int k_folds = 10;
  std::size_t n_labeled = 100;
  int repetitions = 5;
  std::uint64_t master_seed = 0;
  std::optional<int> dev_fold;  // evaluate this fold only
  int jobs = 1;

  void validate() const {
    if (k_folds < 2) throw Error("experiment.folds must be >= 2");
    if (repetitions < 1) throw Error("experiment.repetitions must be >= 1");
    if (n_labeled < 2) throw Error("experiment.n_labeled must be >= 2");
    if (dev_fold && (*dev_fold < 0 || *dev_fold >= k_folds)) {
      throw Error("experiment.dev_fold must be in [0, folds)");
    }
    if (jobs < 1) throw Error("experiment.jobs must be >= 1");
  }
};

inline std::uint64_t repetition_seed(std::uint64_t master, int r) {
  return master + static_cast<std::uint64_t>(r);
}

inline std::uint64_t fold_sample_seed(std::uint64_t rep_seed, int fold) {
  return derive_seed(rep_seed, static_cast<std::uint64_t>(fold));
}

// ---------------------------------------------------------------------------
// Corpus prepared for the co-training model: analysis, bags and context
// vectors are computed once and shared read-only across folds.

class PreparedCorpus {
 public:
  PreparedCorpus(const Corpus& corpus, const TaskPreset& preset, const Lexicons& lex,
                 const ContextProvider& provider)
      : preset_(preset) {
    preset.validate();
    for (const auto& doc : corpus) {
      Entry e;
      const auto analysis = analyze_document(doc, preset, lex);
      auto bags = build_bags(doc, analysis, preset);
      for (auto& w : bags.warnings) warnings_.push_back(std::move(w));
      const auto vectors = document_contexts(provider, analysis, preset);
      e.example.doc_id = doc.id;
      e.example.views.resize(preset.kcs.size());
      for (std::size_t k = 0; k < preset.kcs.size(); ++k) {
        for (std::size_t i = 0; i < vectors[k].size(); ++i) {
          e.example.views[k].push_back({vectors[k][i], InstanceLabel::unlabeled});
          e.labels_if_labeled.push_back(bags.bags[k].instances[i].label);
        }
      }
      index_.emplace(doc.id, entries_.size());
      entries_.push_back(std::move(e));
    }
  }

  const TaskPreset& preset() const { return preset_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::vector<std::string> kcs_names() const {
    std::vector<std::string> n;
    for (const auto& k : preset_.kcs) n.push_back(k.name);
    return n;
  }

  // Example with instance labels derived from the gold label and annotation.
  Example labeled(const std::string& id) const {
    const auto& e = entry(id);
    Example ex = e.example;
    std::size_t flat = 0;
    for (auto& view : ex.views) {
      for (auto& inst : view) inst.label = e.labels_if_labeled[flat++];
    }
    return ex;
  }

  Example unlabeled(const std::string& id) const { return entry(id).example; }

 private:
  struct Entry {
    Example example;
    std::vector<InstanceLabel> labels_if_labeled;  // flattened over views
  };

  const Entry& entry(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("document '" + id + "' was not prepared");
    return entries_[it->second];
  }

  TaskPreset preset_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Protocol driver

struct FoldTask {
  int repetition = 0;
  int fold = 0;
  std::uint64_t sample_seed = 0;
};

// Predictions for every variant a fold produces, aligned with the test split.
using FoldPredictions = std::vector<std::vector<Label>>;
using FoldFn = std::function<FoldPredictions(const FoldTask&, const LabeledSample&,
                                             const Corpus& test)>;

struct FoldOutcome {
  FoldTask task;
  std::vector<Metrics> metrics;  // per variant
};

// Runs fn on every (repetition, fold) cell. Results land in fixed slots, so
// the outcome does not depend on jobs.
inline std::vector<FoldOutcome> run_protocol(const Corpus& corpus, const ExperimentSpec& spec,
                                             const FoldFn& fn) {
  spec.validate();
  for (const auto& d : corpus) {
    if (!d.gold_label) throw Error("evaluation needs gold labels; document '" + d.id + "' has none");
  }
  std::vector<FoldPlan> plans;
  for (int r = 0; r < spec.repetitions; ++r) {
    plans.push_back(stratified_folds(corpus, spec.k_folds, repetition_seed(spec.master_seed, r)));
  }
  std::vector<FoldTask> tasks;
  for (int r = 0; r < spec.repetitions; ++r) {
    for (int f = 0; f < spec.k_folds; ++f) {
      if (spec.dev_fold && f != *spec.dev_fold) continue;
      tasks.push_back({r, f, fold_sample_seed(repetition_seed(spec.master_seed, r), f)});
    }
  }
  std::vector<FoldOutcome> outcomes(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  auto run = [&](std::size_t t) {
    try {
      const auto& task = tasks[t];
      const auto& plan = plans[static_cast<std::size_t>(task.repetition)];
      const auto test = test_split(corpus, plan, task.fold);
      const auto sample = sample_labeled(train_split(corpus, plan, task.fold),
                                         {spec.n_labeled, task.sample_seed});
      std::vector<Label> gold;
      for (const auto& d : test) gold.push_back(*d.gold_label);
      const auto predictions = fn(task, sample, test);
      outcomes[t].task = task;
      for (const auto& p : predictions) outcomes[t].metrics.push_back(compute_metrics(p, gold));
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), tasks.size());
  if (workers <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) run(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outcomes;
}

// Model-specific fold functions.

inline std::vector<Example> examples_for(const PreparedCorpus& prepared, const Corpus& docs,
                                         bool with_labels) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    out.push_back(with_labels ? prepared.labeled(d.id) : prepared.unlabeled(d.id));
  }
  return out;
}

inline FoldFn codecomp_fold_fn(const PreparedCorpus& prepared, const ModelSpec& spec) {
  return [&prepared, &spec](const FoldTask&, const LabeledSample& sample, const Corpus& test) {
    auto fit = cotrain_fit(examples_for(prepared, sample.labeled, true),
                           examples_for(prepared, sample.unlabeled, false), prepared.kcs_names(),
                           spec.cotrain, spec.learner, spec.provider);
    std::vector<Label> labels;
    for (const auto& ex : examples_for(prepared, test, false)) {
      labels.push_back(predict(fit.model, ex).label);
    }
    return FoldPredictions{std::move(labels)};
  };
}

inline std::vector<Label> nb_predict_all(const NBModel& model, const Corpus& test) {
  std::vector<Label> labels;
  for (const auto& d : test) labels.push_back(nb_predict(model, text_features(d.text)));
  return labels;
}

inline FoldFn nb_fold_fn(const ModelSpec& spec) {
  return [&spec](const FoldTask&, const LabeledSample& sample, const Corpus& test) {
    return FoldPredictions{nb_predict_all(nb_baseline_fit(sample.labeled, spec.nb_alpha), test)};
  };
}

inline FoldFn em_fold_fn(const ModelSpec& spec) {
  return [&spec](const FoldTask& task, const LabeledSample& sample, const Corpus& test) {
    auto cfg = spec.em;
    cfg.seed = derive_seed(task.sample_seed, 1);
    return FoldPredictions{nb_predict_all(em_fit(sample.labeled, sample.unlabeled, cfg).model, test)};
  };
}

// ---------------------------------------------------------------------------
// Reports

struct RunReport {
  std::string model;
  std::string fingerprint;
  ExperimentSpec experiment;
  std::vector<FoldOutcome> folds;       // repetition-major
  std::vector<MetricSummary> per_repetition;
  MetricSummary mean;                   // over repetitions of per-fold means
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline ojson to_json(const ModelSpec& m) {
  ojson j{{"model", to_string(m.kind)}};
  if (m.kind == ModelKind::codecomp) {
    j["provider"] = to_json(m.provider);
    j["cotrain"] = to_json(m.cotrain);
    j["learner"] = to_json(m.learner);
  } else {
    j["nb_alpha"] = m.nb_alpha;
  }
  if (m.kind == ModelKind::em) {
    j["em"] = {{"max_iterations", m.em.max_iterations},
               {"unlabeled_weight", m.em.unlabeled_weight},
               {"convergence_tolerance", m.em.convergence_tolerance},
               {"alpha", m.em.alpha},
               {"unlabeled_pool", m.em.unlabeled_pool}};
  }
  return j;
}

inline ojson to_json(const ExperimentSpec& e) {
  ojson j{{"folds", e.k_folds},
          {"n_labeled", e.n_labeled},
          {"repetitions", e.repetitions},
          {"master_seed", e.master_seed}};
  j["dev_fold"] = e.dev_fold ? ojson(*e.dev_fold) : ojson(nullptr);
  return j;
}

// Hash of everything that determines a report: corpus content, model and
// protocol settings, and the preset. Worker count is excluded.
inline std::string experiment_fingerprint(const Corpus& corpus, const ModelSpec& model,
                                          const ExperimentSpec& exp, const TaskPreset* preset) {
  std::uint64_t h = fnv1a(to_json(model).dump());
  h = fnv1a(to_json(exp).dump(), h);
  if (preset) h = fnv1a(format_preset(*preset), h);
  for (const auto& d : corpus) {
    h = fnv1a(d.id, h);
    h = fnv1a(d.gold_label ? to_string(*d.gold_label) : "-", h);
    h = fnv1a(d.text, h);
    for (const auto& s : d.positive_human_spans) {
      h = fnv1a(std::to_string(s.begin) + ":" + std::to_string(s.end), h);
    }
  }
  return hex64(h);
}

inline RunReport summarize(std::string model, std::string fingerprint, const ExperimentSpec& exp,
                           std::vector<FoldOutcome> outcomes, std::size_t variant = 0) {
  RunReport rep;
  rep.model = std::move(model);
  rep.fingerprint = std::move(fingerprint);
  rep.experiment = exp;
  for (int r = 0; r < exp.repetitions; ++r) {
    std::vector<Metrics> cells;
    for (const auto& o : outcomes) {
      if (o.task.repetition == r) cells.push_back(o.metrics.at(variant));
    }
    rep.per_repetition.push_back(mean_of<Metrics>(cells));
  }
  rep.mean = mean_of<MetricSummary>(rep.per_repetition);
  for (auto& o : outcomes) {
    o.metrics = {o.metrics.at(variant)};
    rep.folds.push_back(std::move(o));
  }
  return rep;
}

inline ojson summary_json(const MetricSummary& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn},
          {"tn", s.tn}};
}

inline ojson to_json(const RunReport& rep) {
  ojson folds = ojson::array();
  for (const auto& o : rep.folds) {
    const auto& m = o.metrics.front();
    folds.push_back({{"repetition", o.task.repetition},
                     {"fold", o.task.fold},
                     {"repetition_seed", repetition_seed(rep.experiment.master_seed, o.task.repetition)},
                     {"sample_seed", o.task.sample_seed},
                     {"tp", m.tp},
                     {"fp", m.fp},
                     {"fn", m.fn},
                     {"tn", m.tn},
                     {"precision", m.precision},
                     {"recall", m.recall},
                     {"f1", m.f1}});
  }
  ojson reps = ojson::array();
  for (const auto& s : rep.per_repetition) reps.push_back(summary_json(s));
  return {{"model", rep.model},
          {"fingerprint", rep.fingerprint},
          {"experiment", to_json(rep.experiment)},
          {"folds", folds},
          {"repetition_means", reps},
          {"mean", summary_json(rep.mean)}};
}

inline void write_report_csv(std::ostream& out, const RunReport& rep) {
  out << "repetition,fold,tp,fp,fn,tn,precision,recall,f1\n";
  for (const auto& o : rep.folds) {
    const auto& m = o.metrics.front();
    out << o.task.repetition << ',' << o.task.fold << ',' << m.tp << ',' << m.fp << ',' << m.fn
        << ',' << m.tn << ',' << format_double(m.precision) << ',' << format_double(m.recall)
        << ',' << format_double(m.f1) << '\n';
  }
  const auto& s = rep.mean;
  out << "mean,," << format_double(s.tp) << ',' << format_double(s.fp) << ','
      << format_double(s.fn) << ',' << format_double(s.tn) << ',' << format_double(s.precision)
      << ',' << format_double(s.recall) << ',' << format_double(s.f1) << '\n';
}

// ---------------------------------------------------------------------------
// Entry points

struct ExperimentInputs {
  const Corpus& corpus;
  const TaskPreset& preset;
  const Lexicons& lexicons;
};

inline RunReport run_experiment(const ExperimentInputs& in, const ModelSpec& model,
                                const ExperimentSpec& exp) {
  const auto fp = experiment_fingerprint(in.corpus, model, exp,
                                         model.kind == ModelKind::codecomp ? &in.preset : nullptr);
  std::vector<FoldOutcome> outcomes;
  if (model.kind == ModelKind::codecomp) {
    const auto provider = make_provider(model.provider);
    const PreparedCorpus prepared(in.corpus, in.preset, in.lexicons, *provider);
    outcomes = run_protocol(in.corpus, exp, codecomp_fold_fn(prepared, model));
  } else if (model.kind == ModelKind::nb) {
    outcomes = run_protocol(in.corpus, exp, nb_fold_fn(model));
  } else {
    outcomes = run_protocol(in.corpus, exp, em_fold_fn(model));
  }
  return summarize(std::string(to_string(model.kind)), fp, exp, std::move(outcomes));
}

struct AblationRow {
  std::string name;
  MetricSummary metrics;
};

inline const std::vector<int>& default_ablation_iterations() {
  static const std::vector<int> k{13, 25, 50, 75};
  return k;
}

// Rows: one per key concept set ("<name>-cl"), "Combined", then
// "+K-itr co-train" for each K. All rows share folds and labeled samples.
inline std::vector<AblationRow> ablation_table(const ExperimentInputs& in, const ModelSpec& model,
                                               const ExperimentSpec& exp,
                                               const std::vector<int>& iteration_settings) {
  for (int k : iteration_settings) {
    if (k < 0) throw Error("ablation iteration counts must be >= 0");
  }
  const auto provider = make_provider(model.provider);
  const PreparedCorpus prepared(in.corpus, in.preset, in.lexicons, *provider);
  std::vector<int> checkpoints{0};
  checkpoints.insert(checkpoints.end(), iteration_settings.begin(), iteration_settings.end());

  FoldFn fn = [&](const FoldTask&, const LabeledSample& sample, const Corpus& test) {
    auto cfg = model.cotrain;
    const auto models =
        cotrain_checkpoints(examples_for(prepared, sample.labeled, true),
                            examples_for(prepared, sample.unlabeled, false), prepared.kcs_names(),
                            cfg, model.learner, checkpoints);
    const auto test_ex = examples_for(prepared, test, false);
    auto v = ablation_variants(models.front(), std::span(models).subspan(1), iteration_settings,
                               test_ex);
    return std::move(v.labels);
  };
  auto outcomes = run_protocol(in.corpus, exp, fn);

  std::vector<std::string> names;
  for (const auto& k : in.preset.kcs) names.push_back(k.name + "-cl");
  names.push_back("Combined");
  for (int k : iteration_settings) names.push_back("+" + std::to_string(k) + "-itr co-train");

  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < names.size(); ++v) {
    rows.push_back({names[v], summarize(names[v], "", exp, outcomes, v).mean});
  }
  return rows;
}

inline void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "model,f1,precision,recall\n";
  for (const auto& r : rows) {
    out << r.name << ',' << format_double(r.metrics.f1) << ',' << format_double(r.metrics.precision)
        << ',' << format_double(r.metrics.recall) << '\n';
  }
}

struct SweepPoint {
  std::size_t n_labeled = 0;
  RunReport report;
};

inline std::vector<SweepPoint> training_size_sweep(const ExperimentInputs& in,
                                                   const ModelSpec& model,
                                                   const ExperimentSpec& exp,
                                                   const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) throw Error("sweep needs at least one size");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw Error("sweep sizes must be strictly ascending");
  }
  std::vector<SweepPoint> out;
  for (auto n : sizes) {
    auto e = exp;
    e.n_labeled = n;
    out.push_back({n, run_experiment(in, model, e)});
  }
  return out;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "n_labeled,f1,precision,recall\n";
  for (const auto& p : points) {
    out << p.n_labeled << ',' << format_double(p.report.mean.f1) << ','
        << format_double(p.report.mean.precision) << ',' << format_double(p.report.mean.recall)
        << '\n';
  }
}

}  // namespace codecomp
