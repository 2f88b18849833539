#pragma once

// Co-training over key-concept views.
//
// Every document is an example; every mention of a key concept set inside it
// is an instance of that set's view. One logistic classifier per view is
// trained on labeled instances. Unlabeled examples are scored per view by
// their most confident positive instance. Each iteration promotes, per view,
// the most confident positive examples (winning instance plus the most
// probable instance of every other view) and the examples whose instances are
// confidently negative in all views. At test time the per-view example
// probabilities are combined with the product rule.

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codecomp/common.hpp"
#include "codecomp/concepts.hpp"
#include "codecomp/context.hpp"
#include "codecomp/logistic.hpp"

namespace codecomp {

struct CoConfig {
  int iterations = 25;
  int promotions_per_view = 1;
  double confidence_floor = 0.7;
  double neutral_prob = 0.5;

  void validate() const {
    if (iterations < 0) throw Error("cotrain.iterations must be >= 0");
    if (promotions_per_view < 1) throw Error("cotrain.promotions_per_view must be >= 1");
    if (!(confidence_floor > 0.5 && confidence_floor <= 1.0)) {
      throw Error("cotrain.confidence_floor must be in (0.5, 1]");
    }
    if (!(neutral_prob >= 0.0 && neutral_prob <= 1.0)) {
      throw Error("cotrain.neutral_prob must be in [0, 1]");
    }
  }

  friend bool operator==(const CoConfig&, const CoConfig&) = default;
};

struct TrainingInstance {
  ContextVector x;
  InstanceLabel label = InstanceLabel::unlabeled;
};

// One document as seen by the learners: per view, its instance vectors.
struct Example {
  std::string doc_id;
  std::vector<std::vector<TrainingInstance>> views;

  bool has_all_views() const {
    return std::all_of(views.begin(), views.end(), [](const auto& v) { return !v.empty(); });
  }
};

// ---------------------------------------------------------------------------
// Multiple-instance scoring and aggregation

struct MilScore {
  double prob = 0.0;
  std::size_t index = 0;
};

// Most confident positive instance; ties go to the lowest index.
inline MilScore mil_example_score(std::span<const double> instance_probs) {
  if (instance_probs.empty()) throw Error("mil_example_score: empty instance list");
  MilScore best{instance_probs[0], 0};
  for (std::size_t i = 1; i < instance_probs.size(); ++i) {
    if (instance_probs[i] > best.prob) best = {instance_probs[i], i};
  }
  return best;
}

// Positive iff prod(P_j) >= prod(1 - P_j).
inline bool product_rule_positive(std::span<const double> view_probs) {
  double pos = 1.0;
  double neg = 1.0;
  for (double p : view_probs) {
    pos *= p;
    neg *= 1.0 - p;
  }
  return pos >= neg;
}

struct CoDecompModel {
  std::vector<std::string> kcs_names;
  std::vector<LogRegModel> classifiers;  // classifiers[j] reads vectors of view j only
  CoConfig co_config;
  TrainConfig train_config;
  ProviderSpec provider;

  std::size_t views() const { return classifiers.size(); }
};

struct ExampleScore {
  std::string doc_id;
  std::vector<std::optional<double>> prob;         // nullopt: empty bag
  std::vector<std::optional<std::size_t>> winner;  // winning instance per view
  std::vector<std::vector<double>> instance_probs;
};

inline ExampleScore score_example(std::span<const LogRegModel> classifiers, const Example& ex) {
  if (ex.views.size() != classifiers.size()) {
    throw Error("example '" + ex.doc_id + "' has " + std::to_string(ex.views.size()) +
                " views, model has " + std::to_string(classifiers.size()));
  }
  ExampleScore s;
  s.doc_id = ex.doc_id;
  for (std::size_t j = 0; j < classifiers.size(); ++j) {
    std::vector<double> probs;
    probs.reserve(ex.views[j].size());
    for (const auto& inst : ex.views[j]) probs.push_back(predict_proba(classifiers[j], inst.x));
    if (probs.empty()) {
      s.prob.push_back(std::nullopt);
      s.winner.push_back(std::nullopt);
    } else {
      const auto m = mil_example_score(probs);
      s.prob.push_back(m.prob);
      s.winner.push_back(m.index);
    }
    s.instance_probs.push_back(std::move(probs));
  }
  return s;
}

inline std::vector<double> view_probabilities(const ExampleScore& s, double neutral_prob) {
  std::vector<double> p;
  for (const auto& v : s.prob) p.push_back(v.value_or(neutral_prob));
  return p;
}

struct Prediction {
  Label label = Label::negative;
  std::vector<double> view_probs;  // empty bags contribute neutral_prob
};

inline Prediction predict(const CoDecompModel& model, const Example& ex) {
  const auto s = score_example(model.classifiers, ex);
  Prediction p;
  p.view_probs = view_probabilities(s, model.co_config.neutral_prob);
  p.label = product_rule_positive(p.view_probs) ? Label::positive : Label::negative;
  return p;
}

// ---------------------------------------------------------------------------
// Training

struct ViewPromotion {
  std::vector<std::string> positive_ids;
  std::vector<double> positive_confidence;
  std::vector<std::string> negative_ids;
  std::vector<double> negative_confidence;  // the view's example probability
};

struct IterationRecord {
  int iteration = 0;
  std::vector<ViewPromotion> views;
  std::size_t labeled_examples = 0;    // after promotion
  std::size_t unlabeled_examples = 0;  // after promotion
  std::vector<std::size_t> labeled_instances;  // per view, after promotion
};

using IterationLog = std::vector<IterationRecord>;

inline std::vector<TrainingInstance> labeled_instances_of(std::span<const Example> pool,
                                                          std::size_t view) {
  std::vector<TrainingInstance> out;
  for (const auto& ex : pool) {
    for (const auto& inst : ex.views[view]) {
      if (inst.label != InstanceLabel::unlabeled) out.push_back(inst);
    }
  }
  return out;
}

inline LogRegModel train_view(std::span<const Example> labeled, std::size_t view,
                              const TrainConfig& cfg) {
  std::vector<ContextVector> X;
  std::vector<int> y;
  for (const auto& ex : labeled) {
    for (const auto& inst : ex.views[view]) {
      if (inst.label == InstanceLabel::unlabeled) continue;
      X.push_back(inst.x);
      y.push_back(inst.label == InstanceLabel::positive ? 1 : 0);
    }
  }
  if (X.empty()) throw Error("view " + std::to_string(view) + " has no labeled instances");
  return train_logreg(X, y, cfg);
}

// Holds the labeled pool L and unlabeled pool U and advances co-training one
// iteration at a time. Promotion is irrevocable.
class CoTrainer {
 public:
  CoTrainer(std::vector<Example> labeled, std::vector<Example> unlabeled,
            std::vector<std::string> kcs_names, CoConfig co, TrainConfig train,
            ProviderSpec provider = {})
      : labeled_(std::move(labeled)),
        unlabeled_(std::move(unlabeled)),
        kcs_names_(std::move(kcs_names)),
        co_(co),
        train_(train),
        provider_(std::move(provider)) {
    co_.validate();
    train_.validate();
    const std::size_t J = kcs_names_.size();
    if (J == 0) throw Error("cotrain: need at least one key concept set");
    for (const auto* pool : {&labeled_, &unlabeled_}) {
      for (const auto& ex : *pool) {
        if (ex.views.size() != J) {
          throw Error("cotrain: example '" + ex.doc_id + "' has " +
                      std::to_string(ex.views.size()) + " views, expected " + std::to_string(J));
        }
      }
    }
    for (std::size_t j = 0; j < J; ++j) {
      bool pos = false, neg = false;
      for (const auto& inst : labeled_instances_of(labeled_, j)) {
        pos = pos || inst.label == InstanceLabel::positive;
        neg = neg || inst.label == InstanceLabel::negative;
      }
      if (!pos || !neg) {
        throw Error("cotrain: key concept set '" + kcs_names_[j] +
                    "' needs at least one positive and one negative labeled instance");
      }
    }
  }

  std::size_t views() const { return kcs_names_.size(); }
  const std::vector<Example>& labeled() const { return labeled_; }
  const std::vector<Example>& unlabeled() const { return unlabeled_; }
  const IterationLog& log() const { return log_; }
  int iterations_done() const { return static_cast<int>(log_.size()); }
  bool stopped() const { return stopped_; }

  std::size_t labeled_instance_count(std::size_t view) const {
    return labeled_instances_of(labeled_, view).size();
  }

  // Classifiers trained on the current labeled pool (cached until L changes).
  const std::vector<LogRegModel>& classifiers() {
    if (!cached_) {
      std::vector<LogRegModel> c;
      for (std::size_t j = 0; j < views(); ++j) c.push_back(train_view(labeled_, j, train_));
      cached_ = std::move(c);
    }
    return *cached_;
  }

  CoDecompModel model() {
    return {kcs_names_, classifiers(), co_, train_, provider_};
  }

  // One co-training iteration. Returns false, without changing the pools,
  // when U is empty or nothing clears the confidence floor.
  bool step() {
    if (stopped_) return false;
    if (unlabeled_.empty()) {
      stopped_ = true;
      return false;
    }
    const auto& C = classifiers();
    const std::size_t J = views();

    std::vector<ExampleScore> scores;
    scores.reserve(unlabeled_.size());
    for (const auto& ex : unlabeled_) scores.push_back(score_example(C, ex));

    // Examples with an empty bag in some view are never pseudo-labeled.
    std::vector<std::size_t> eligible;
    for (std::size_t u = 0; u < unlabeled_.size(); ++u) {
      if (unlabeled_[u].has_all_views()) eligible.push_back(u);
    }
    const double neg_ceiling = 1.0 - co_.confidence_floor;
    auto confidently_negative = [&](std::size_t u) {
      for (const auto& probs : scores[u].instance_probs) {
        for (double p : probs) {
          if (!(p < neg_ceiling)) return false;
        }
      }
      return true;
    };

    std::vector<bool> consumed(unlabeled_.size(), false);
    IterationRecord rec;
    rec.iteration = iterations_done() + 1;
    rec.views.resize(J);
    std::size_t promoted = 0;
    const auto take = static_cast<std::size_t>(co_.promotions_per_view);

    for (std::size_t j = 0; j < J; ++j) {
      // Positives: highest example probability first, ties by doc id.
      auto order = eligible;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double pa = *scores[a].prob[j], pb = *scores[b].prob[j];
        if (pa != pb) return pa > pb;
        return unlabeled_[a].doc_id < unlabeled_[b].doc_id;
      });
      std::size_t taken = 0;
      for (std::size_t u : order) {
        if (taken == take) break;
        const double p = *scores[u].prob[j];
        if (p < co_.confidence_floor) break;
        if (consumed[u]) continue;
        consumed[u] = true;
        auto& ex = unlabeled_[u];
        ex.views[j][*scores[u].winner[j]].label = InstanceLabel::positive;
        for (std::size_t k = 0; k < J; ++k) {
          if (k != j) ex.views[k][*scores[u].winner[k]].label = InstanceLabel::positive;
        }
        rec.views[j].positive_ids.push_back(ex.doc_id);
        rec.views[j].positive_confidence.push_back(p);
        ++taken;
        ++promoted;
      }

      // Negatives: every instance in every view below 1 - floor; the lowest
      // example probability in view j goes first.
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double pa = *scores[a].prob[j], pb = *scores[b].prob[j];
        if (pa != pb) return pa < pb;
        return unlabeled_[a].doc_id < unlabeled_[b].doc_id;
      });
      taken = 0;
      for (std::size_t u : order) {
        if (taken == take) break;
        if (!(*scores[u].prob[j] < neg_ceiling)) break;
        if (consumed[u] || !confidently_negative(u)) continue;
        consumed[u] = true;
        auto& ex = unlabeled_[u];
        for (auto& view : ex.views) {
          for (auto& inst : view) inst.label = InstanceLabel::negative;
        }
        rec.views[j].negative_ids.push_back(ex.doc_id);
        rec.views[j].negative_confidence.push_back(*scores[u].prob[j]);
        ++taken;
        ++promoted;
      }
    }

    if (promoted == 0) {
      stopped_ = true;
      return false;
    }
    std::vector<Example> remaining;
    remaining.reserve(unlabeled_.size() - promoted);
    for (std::size_t u = 0; u < unlabeled_.size(); ++u) {
      if (consumed[u]) {
        labeled_.push_back(std::move(unlabeled_[u]));
      } else {
        remaining.push_back(std::move(unlabeled_[u]));
      }
    }
    unlabeled_ = std::move(remaining);
    cached_.reset();

    rec.labeled_examples = labeled_.size();
    rec.unlabeled_examples = unlabeled_.size();
    for (std::size_t j = 0; j < J; ++j) rec.labeled_instances.push_back(labeled_instance_count(j));
    log_.push_back(std::move(rec));
    return true;
  }

 private:
  std::vector<Example> labeled_;
  std::vector<Example> unlabeled_;
  std::vector<std::string> kcs_names_;
  CoConfig co_;
  TrainConfig train_;
  ProviderSpec provider_;
  IterationLog log_;
  std::optional<std::vector<LogRegModel>> cached_;
  bool stopped_ = false;
};

struct CoFitResult {
  CoDecompModel model;
  IterationLog log;
};

// Runs co.iterations iterations (fewer if it stops early); the returned
// classifiers are trained on the final labeled pool, so iterations = 0 gives
// the independently trained per-view classifiers.
inline CoFitResult cotrain_fit(std::vector<Example> labeled, std::vector<Example> unlabeled,
                               std::vector<std::string> kcs_names, const CoConfig& co,
                               const TrainConfig& train, ProviderSpec provider = {}) {
  CoTrainer trainer(std::move(labeled), std::move(unlabeled), std::move(kcs_names), co, train,
                    std::move(provider));
  for (int i = 0; i < co.iterations && trainer.step(); ++i) {
  }
  return {trainer.model(), trainer.log()};
}

// Models after each requested iteration count, from a single run.
inline std::vector<CoDecompModel> cotrain_checkpoints(std::vector<Example> labeled,
                                                      std::vector<Example> unlabeled,
                                                      std::vector<std::string> kcs_names,
                                                      const CoConfig& co, const TrainConfig& train,
                                                      std::span<const int> checkpoints) {
  CoTrainer trainer(std::move(labeled), std::move(unlabeled), std::move(kcs_names), co, train);
  std::vector<int> order(checkpoints.begin(), checkpoints.end());
  std::sort(order.begin(), order.end());
  std::vector<std::pair<int, CoDecompModel>> taken;
  for (int target : order) {
    while (trainer.iterations_done() < target && trainer.step()) {
    }
    auto m = trainer.model();
    m.co_config.iterations = target;
    taken.emplace_back(target, std::move(m));
  }
  std::vector<CoDecompModel> out;
  for (int c : checkpoints) {
    for (const auto& [t, m] : taken) {
      if (t == c) {
        out.push_back(m);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation variants

struct VariantPredictions {
  std::vector<std::string> names;
  std::vector<std::vector<Label>> labels;  // [variant][example]
};

// Single-view rows threshold that view's probability at 0.5; "Combined" is
// the product rule over the base (no co-training) classifiers; the remaining
// rows apply the product rule with co-trained checkpoints.
inline VariantPredictions ablation_variants(const CoDecompModel& base,
                                            std::span<const CoDecompModel> cotrained,
                                            std::span<const int> iteration_settings,
                                            std::span<const Example> test) {
  if (cotrained.size() != iteration_settings.size()) {
    throw Error("ablation_variants: one model per iteration setting expected");
  }
  VariantPredictions out;
  const std::size_t J = base.views();
  for (std::size_t j = 0; j < J; ++j) out.names.push_back(base.kcs_names[j] + "-cl");
  out.names.push_back("Combined");
  for (int k : iteration_settings) out.names.push_back("+" + std::to_string(k) + "-itr co-train");
  out.labels.assign(out.names.size(), {});
  for (const auto& ex : test) {
    const auto p = predict(base, ex);
    for (std::size_t j = 0; j < J; ++j) {
      out.labels[j].push_back(p.view_probs[j] >= 0.5 ? Label::positive : Label::negative);
    }
    out.labels[J].push_back(p.label);
    for (std::size_t m = 0; m < cotrained.size(); ++m) {
      out.labels[J + 1 + m].push_back(predict(cotrained[m], ex).label);
    }
  }
  return out;
}

}  // namespace codecomp
