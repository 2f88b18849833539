#pragma once

// L2-regularized binary logistic regression trained by full-batch gradient
// descent. One of these backs each key-concept view.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "codecomp/common.hpp"
#include "codecomp/context.hpp"

namespace codecomp {

inline constexpr double kProbFloor = 1e-6;
inline constexpr double kProbCeil = 1.0 - 1e-6;

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2_lambda = 1e-3;
  std::uint64_t seed = 0;
  double convergence_tolerance = 1e-7;
  bool allow_single_class = false;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("learner.learning_rate must be > 0");
    if (epochs < 1) throw Error("learner.epochs must be >= 1");
    if (!(l2_lambda >= 0.0)) throw Error("learner.l2_lambda must be >= 0");
    if (!(convergence_tolerance >= 0.0)) throw Error("learner.convergence_tolerance must be >= 0");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  TrainConfig config;
  double final_loss = 0.0;
  int epochs_run = 0;

  std::size_t dim() const { return weights.size(); }
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double decision_value(const LogRegModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    throw Error("logistic model expects dimension " + std::to_string(model.dim()) + ", got " +
                std::to_string(x.size()));
  }
  double z = model.bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += model.weights[i] * x[i];
  return z;
}

inline double predict_proba(const LogRegModel& model, std::span<const double> x) {
  return std::clamp(sigmoid(decision_value(model, x)), kProbFloor, kProbCeil);
}

inline double predict_proba(const LogRegModel& model, const ContextVector& x) {
  return predict_proba(model, x.view());
}

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

// Mean log-loss plus (lambda/2)*||w||^2 (bias unregularized) and its gradient.
inline LossGradient loss_gradient(const LogRegModel& model, std::span<const ContextVector> X,
                                  std::span<const int> y) {
  if (X.size() != y.size() || X.empty()) {
    throw Error("loss_gradient: need equal, non-zero numbers of samples and labels");
  }
  const double lambda = model.config.l2_lambda;
  const double n = static_cast<double>(X.size());
  LossGradient g;
  g.grad_weights.assign(model.dim(), 0.0);
  for (std::size_t s = 0; s < X.size(); ++s) {
    const auto& x = X[s].values;
    const double z = decision_value(model, x);
    const double target = y[s] != 0 ? 1.0 : 0.0;
    g.loss += softplus(z) - target * z;
    const double r = sigmoid(z) - target;
    for (std::size_t i = 0; i < x.size(); ++i) g.grad_weights[i] += r * x[i];
    g.grad_bias += r;
  }
  g.loss /= n;
  g.grad_bias /= n;
  double sq = 0.0;
  for (std::size_t i = 0; i < model.dim(); ++i) {
    g.grad_weights[i] = g.grad_weights[i] / n + lambda * model.weights[i];
    sq += model.weights[i] * model.weights[i];
  }
  g.loss += 0.5 * lambda * sq;
  return g;
}

// Step size below which gradient descent cannot increase the loss: the inverse
// of a smoothness bound on the regularized objective.
inline double max_stable_learning_rate(std::span<const ContextVector> X, double l2_lambda) {
  double mean_sq = 0.0;
  for (const auto& x : X) {
    double s = 1.0;  // bias feature
    for (double v : x.values) s += v * v;
    mean_sq += s;
  }
  mean_sq /= static_cast<double>(std::max<std::size_t>(X.size(), 1));
  return 1.0 / (0.25 * mean_sq + l2_lambda);
}

// Zero-initialized full-batch gradient descent. Stops after cfg.epochs steps
// or once the loss changes by less than cfg.convergence_tolerance. When
// loss_trace is given it receives the loss before each step and the final loss.
inline LogRegModel train_logreg(std::span<const ContextVector> X, std::span<const int> y,
                                const TrainConfig& cfg, std::vector<double>* loss_trace = nullptr) {
  cfg.validate();
  if (X.empty() || X.size() != y.size()) {
    throw Error("train_logreg: need equal, non-zero numbers of samples and labels");
  }
  const std::size_t dim = X.front().dim();
  for (const auto& x : X) {
    if (x.dim() != dim) throw Error("train_logreg: inconsistent vector dimensions");
  }
  const auto positives = std::count_if(y.begin(), y.end(), [](int v) { return v != 0; });
  if (!cfg.allow_single_class && (positives == 0 || positives == static_cast<long>(y.size()))) {
    throw Error("train_logreg: training data contains a single class");
  }

  LogRegModel model;
  model.weights.assign(dim, 0.0);
  model.config = cfg;
  double previous = 0.0;
  int epoch = 0;
  for (; epoch < cfg.epochs; ++epoch) {
    auto g = loss_gradient(model, X, y);
    if (loss_trace) loss_trace->push_back(g.loss);
    if (epoch > 0 && std::abs(previous - g.loss) < cfg.convergence_tolerance) break;
    previous = g.loss;
    for (std::size_t i = 0; i < dim; ++i) model.weights[i] -= cfg.learning_rate * g.grad_weights[i];
    model.bias -= cfg.learning_rate * g.grad_bias;
  }
  model.epochs_run = epoch;
  model.final_loss = loss_gradient(model, X, y).loss;
  if (loss_trace) loss_trace->push_back(model.final_loss);
  return model;
}

}  // namespace codecomp
