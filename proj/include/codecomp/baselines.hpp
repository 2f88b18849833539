#pragma once

// Document-level reference models: supervised naive Bayes and semi-supervised
// EM naive Bayes with weighted unlabeled documents.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "codecomp/corpus.hpp"
#include "codecomp/naive_bayes.hpp"

namespace codecomp {

inline NBModel nb_baseline_fit(const Corpus& labeled, double alpha = 1.0) {
  std::vector<FeatureList> docs;
  std::vector<Label> labels;
  for (const auto& d : labeled) {
    if (!d.gold_label) throw Error("nb_baseline_fit: document '" + d.id + "' has no label");
    docs.push_back(text_features(d.text));
    labels.push_back(*d.gold_label);
  }
  return train_nb(docs, labels, alpha);
}

struct EMConfig {
  int max_iterations = 10;
  double unlabeled_weight = 1.0;
  double convergence_tolerance = 1e-6;
  double alpha = 1.0;
  std::size_t unlabeled_pool = 100;  // 0 keeps every unlabeled document
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iterations < 1) throw Error("em.max_iterations must be >= 1");
    if (!(unlabeled_weight > 0.0 && unlabeled_weight <= 1.0)) {
      throw Error("em.unlabeled_weight must be in (0, 1]");
    }
    if (!(alpha > 0.0)) throw Error("em.alpha must be > 0");
  }

  friend bool operator==(const EMConfig&, const EMConfig&) = default;
};

struct EMResult {
  NBModel model;
  // Objective after initialization and after every E/M pass.
  std::vector<double> log_likelihood;
  int iterations = 0;
};

// The quantity EM climbs: Dirichlet smoothing prior + labeled joint
// log-likelihood + weighted unlabeled marginal log-likelihood.
inline double em_objective(const NBModel& model, std::span<const EncodedDocument> labeled,
                           std::span<const Label> labels,
                           std::span<const EncodedDocument> unlabeled, double unlabeled_weight) {
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (double ll : model.log_likelihood[c]) total += model.alpha * ll;
  }
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    total += nb_log_joint(model, labeled[i])[static_cast<int>(labels[i])];
  }
  for (const auto& d : unlabeled) {
    const auto lj = nb_log_joint(model, d);
    total += unlabeled_weight * log_sum_exp(lj[0], lj[1]);
  }
  return total;
}

inline EMResult em_fit(const Corpus& labeled, const Corpus& unlabeled, const EMConfig& cfg) {
  cfg.validate();
  if (labeled.empty()) throw Error("em_fit: labeled set is empty");

  Corpus pool = unlabeled;
  if (cfg.unlabeled_pool > 0 && pool.size() > cfg.unlabeled_pool) {
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(cfg.unlabeled_pool);
  }

  std::vector<FeatureList> lab_features;
  std::vector<Label> labels;
  for (const auto& d : labeled) {
    if (!d.gold_label) throw Error("em_fit: labeled document '" + d.id + "' has no label");
    lab_features.push_back(text_features(d.text));
    labels.push_back(*d.gold_label);
  }
  std::vector<FeatureList> unl_features;
  for (const auto& d : pool) unl_features.push_back(text_features(d.text));

  Vocabulary vocab;
  for (const auto& f : lab_features) {
    for (const auto& t : f) vocab.add(t);
  }
  for (const auto& f : unl_features) {
    for (const auto& t : f) vocab.add(t);
  }

  EMResult result;
  result.model = train_nb(lab_features, labels, cfg.alpha, &vocab);
  if (pool.empty()) return result;

  std::vector<EncodedDocument> lab_enc, unl_enc;
  for (const auto& f : lab_features) lab_enc.push_back(encode(vocab, f));
  for (const auto& f : unl_features) unl_enc.push_back(encode(vocab, f));

  const double w = cfg.unlabeled_weight;
  result.log_likelihood.push_back(em_objective(result.model, lab_enc, labels, unl_enc, w));
  for (int it = 0; it < cfg.max_iterations; ++it) {
    // E-step under the current parameters.
    std::vector<double> posterior(unl_enc.size());
    for (std::size_t i = 0; i < unl_enc.size(); ++i) {
      posterior[i] = nb_predict_proba(result.model, unl_enc[i]);
    }
    // M-step: labeled counts plus posterior-weighted unlabeled counts.
    NBModel next;
    next.alpha = cfg.alpha;
    next.vocabulary = vocab;
    for (int c = 0; c < 2; ++c) next.counts[c].assign(vocab.size(), 0.0);
    for (std::size_t i = 0; i < lab_enc.size(); ++i) {
      detail::accumulate(next, lab_enc[i], static_cast<int>(labels[i]), 1.0);
    }
    for (std::size_t i = 0; i < unl_enc.size(); ++i) {
      detail::accumulate(next, unl_enc[i], 1, w * posterior[i]);
      detail::accumulate(next, unl_enc[i], 0, w * (1.0 - posterior[i]));
    }
    next.finalize();
    result.model = std::move(next);
    ++result.iterations;
    const double ll = em_objective(result.model, lab_enc, labels, unl_enc, w);
    const double gain = ll - result.log_likelihood.back();
    result.log_likelihood.push_back(ll);
    if (std::abs(gain) < cfg.convergence_tolerance) break;
  }
  return result;
}

}  // namespace codecomp
