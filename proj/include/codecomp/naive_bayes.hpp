#pragma once

// Multinomial naive Bayes over unigram + bigram features.
//
// The vocabulary always holds an out-of-vocabulary slot (index 0) with no
// training counts, so features never seen in training still receive the
// smoothing mass alpha / (N_c + alpha * |V|) and per-class likelihoods still
// sum to one over the vocabulary.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "codecomp/common.hpp"
#include "codecomp/text.hpp"

namespace codecomp {

inline constexpr const char* kUnknownFeature = "<unk>";

using FeatureList = std::vector<std::string>;

inline FeatureList ngram_features(const std::vector<std::string>& tokens) {
  FeatureList f(tokens.begin(), tokens.end());
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) f.push_back(tokens[i] + " " + tokens[i + 1]);
  return f;
}

inline FeatureList text_features(std::string_view text) {
  return ngram_features(token_texts(tokenize(text)));
}

class Vocabulary {
 public:
  Vocabulary() { add(kUnknownFeature); }

  int add(const std::string& feature) {
    auto [it, inserted] = index_.emplace(feature, static_cast<int>(terms_.size()));
    if (inserted) terms_.push_back(feature);
    return it->second;
  }

  int find(const std::string& feature) const {
    auto it = index_.find(feature);
    return it == index_.end() ? unknown() : it->second;
  }

  int unknown() const { return 0; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, int> index_;
};

// Sparse (feature index, count) representation of one document.
using EncodedDocument = std::vector<std::pair<int, double>>;

inline EncodedDocument encode(const Vocabulary& vocab, const FeatureList& features) {
  std::unordered_map<int, double> counts;
  for (const auto& f : features) counts[vocab.find(f)] += 1.0;
  EncodedDocument doc(counts.begin(), counts.end());
  std::sort(doc.begin(), doc.end());
  return doc;
}

struct NBModel {
  double alpha = 1.0;
  Vocabulary vocabulary;
  std::array<double, 2> class_weight{0.0, 0.0};  // (fractional) documents per class
  std::array<std::vector<double>, 2> counts;     // feature counts per class
  std::array<double, 2> log_prior{0.0, 0.0};
  std::array<std::vector<double>, 2> log_likelihood;

  // Recomputes log-priors and log-likelihoods from the count tables.
  void finalize() {
    const double total = class_weight[0] + class_weight[1];
    const double v = static_cast<double>(vocabulary.size());
    for (int c = 0; c < 2; ++c) {
      counts[c].resize(vocabulary.size(), 0.0);
      log_prior[c] = std::log(class_weight[c] / total);
      double mass = 0.0;
      for (double x : counts[c]) mass += x;
      const double denom = std::log(mass + alpha * v);
      log_likelihood[c].resize(vocabulary.size());
      for (std::size_t w = 0; w < vocabulary.size(); ++w) {
        log_likelihood[c][w] = std::log(counts[c][w] + alpha) - denom;
      }
    }
  }
};

// log P(c) + sum_w n_w log P(w|c), for both classes.
inline std::array<double, 2> nb_log_joint(const NBModel& model, const EncodedDocument& doc) {
  std::array<double, 2> lj = model.log_prior;
  for (const auto& [w, n] : doc) {
    for (int c = 0; c < 2; ++c) lj[c] += n * model.log_likelihood[c][static_cast<std::size_t>(w)];
  }
  return lj;
}

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double nb_predict_proba(const NBModel& model, const EncodedDocument& doc) {
  const auto lj = nb_log_joint(model, doc);
  return std::exp(lj[1] - log_sum_exp(lj[0], lj[1]));
}

inline double nb_predict_proba(const NBModel& model, const FeatureList& features) {
  return nb_predict_proba(model, encode(model.vocabulary, features));
}

inline Label nb_predict(const NBModel& model, const FeatureList& features) {
  return nb_predict_proba(model, features) >= 0.5 ? Label::positive : Label::negative;
}

namespace detail {

inline void accumulate(NBModel& model, const EncodedDocument& doc, int cls, double weight) {
  model.class_weight[cls] += weight;
  for (const auto& [w, n] : doc) model.counts[cls][static_cast<std::size_t>(w)] += weight * n;
}

}  // namespace detail

// Vocabulary built from the training documents only; `vocabulary` lets a
// caller (EM) supply a larger one.
inline NBModel train_nb(std::span<const FeatureList> documents, std::span<const Label> labels,
                        double alpha, const Vocabulary* vocabulary = nullptr) {
  if (!(alpha > 0.0)) throw Error("train_nb: alpha must be > 0");
  if (documents.size() != labels.size() || documents.empty()) {
    throw Error("train_nb: need equal, non-zero numbers of documents and labels");
  }
  NBModel model;
  model.alpha = alpha;
  if (vocabulary) {
    model.vocabulary = *vocabulary;
  } else {
    for (const auto& d : documents) {
      for (const auto& f : d) model.vocabulary.add(f);
    }
  }
  for (int c = 0; c < 2; ++c) model.counts[c].assign(model.vocabulary.size(), 0.0);
  for (std::size_t i = 0; i < documents.size(); ++i) {
    detail::accumulate(model, encode(model.vocabulary, documents[i]), static_cast<int>(labels[i]),
                       1.0);
  }
  if (model.class_weight[0] == 0.0 || model.class_weight[1] == 0.0) {
    throw Error("train_nb: training data contains a single class");
  }
  model.finalize();
  return model;
}

}  // namespace codecomp
