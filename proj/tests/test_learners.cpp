#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "codecomp/baselines.hpp"
#include "codecomp/logistic.hpp"
#include "codecomp/naive_bayes.hpp"
#include "codecomp/serialize.hpp"
#include "support/synthetic.hpp"

using namespace codecomp;

namespace {

struct Dataset {
  std::vector<ContextVector> X;
  std::vector<int> y;
};

Dataset random_dataset(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> truth(dim);
  for (auto& t : truth) t = g(rng);
  Dataset d;
  for (std::size_t s = 0; s < n; ++s) {
    ContextVector x{std::vector<double>(dim)};
    double z = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      x.values[i] = g(rng);
      z += truth[i] * x.values[i];
    }
    d.X.push_back(std::move(x));
    d.y.push_back(z + 0.5 * g(rng) > 0 ? 1 : 0);
  }
  d.y[0] = 1;
  d.y[1] = 0;
  return d;
}

LogRegModel random_model(std::size_t dim, double lambda, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  LogRegModel m;
  m.weights.resize(dim);
  for (auto& w : m.weights) w = g(rng);
  m.bias = g(rng);
  m.config.l2_lambda = lambda;
  return m;
}

double loss_at(const LogRegModel& m, const Dataset& d) { return loss_gradient(m, d.X, d.y).loss; }

FeatureList words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

}  // namespace

TEST(LogReg, SeparablePair) {
  const std::vector<ContextVector> X{{{1, 0}}, {{-1, 0}}};
  const std::vector<int> y{1, 0};
  const auto m = train_logreg(X, y, TrainConfig{});
  EXPECT_GT(predict_proba(m, X[0]), 0.5);
  EXPECT_LT(predict_proba(m, X[1]), 0.5);
}

TEST(LogReg, ConfigAndInputErrors) {
  const std::vector<ContextVector> X{{{1, 0}}, {{-1, 0}}};
  const std::vector<int> y{1, 0};
  TrainConfig zero;
  zero.epochs = 0;
  EXPECT_THROW(train_logreg(X, y, zero), Error);
  TrainConfig neg;
  neg.learning_rate = 0.0;
  EXPECT_THROW(train_logreg(X, y, neg), Error);
  const std::vector<int> same{1, 1};
  EXPECT_THROW(train_logreg(X, same, TrainConfig{}), Error);
  TrainConfig degenerate;
  degenerate.allow_single_class = true;
  EXPECT_NO_THROW(train_logreg(X, same, degenerate));
  EXPECT_THROW(train_logreg(X, std::vector<int>{1}, TrainConfig{}), Error);
}

TEST(LogReg, TrainingReducesLoss) {
  const auto d = random_dataset(50, 6, 1);
  LogRegModel init;
  init.weights.assign(6, 0.0);
  init.config.l2_lambda = TrainConfig{}.l2_lambda;
  const auto m = train_logreg(d.X, d.y, TrainConfig{});
  EXPECT_LT(m.final_loss, loss_at(init, d));
  EXPECT_DOUBLE_EQ(m.final_loss, loss_at(m, d));
}

TEST(LogReg, DeterministicPerSeed) {
  const auto d = random_dataset(40, 5, 2);
  const auto a = train_logreg(d.X, d.y, TrainConfig{});
  const auto b = train_logreg(d.X, d.y, TrainConfig{});
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(LogReg, PredictionBoundsAndIdentity) {
  LogRegModel zero;
  zero.weights.assign(3, 0.0);
  EXPECT_EQ(predict_proba(zero, ContextVector{{5, -2, 9}}), 0.5);
  LogRegModel big;
  big.weights = {1000, 0, 0};
  EXPECT_EQ(predict_proba(big, ContextVector{{1, 0, 0}}), kProbCeil);
  EXPECT_EQ(predict_proba(big, ContextVector{{-1, 0, 0}}), kProbFloor);
  EXPECT_THROW(predict_proba(big, ContextVector{{1, 0}}), Error);
}

TEST(LogReg, MonotoneInDecisionValue) {
  const auto m = random_model(4, 0.0, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<std::pair<double, double>> sweep;
  for (int i = 0; i < 300; ++i) {
    ContextVector x{std::vector<double>(4)};
    for (auto& v : x.values) v = g(rng);
    sweep.emplace_back(decision_value(m, x.values), predict_proba(m, x));
  }
  std::sort(sweep.begin(), sweep.end());
  for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_LE(sweep[i - 1].second, sweep[i].second);
}

TEST(LogReg, ClosedFormGradientAtZeroWeights) {
  LogRegModel m;
  m.weights.assign(3, 0.0);
  m.bias = 0.7;
  m.config.l2_lambda = 0.3;
  const std::vector<ContextVector> X{{{0.5, -1.0, 2.0}}};
  const std::vector<int> y{0};
  const auto g = loss_gradient(m, X, y);
  const double r = 1.0 / (1.0 + std::exp(-0.7));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g.grad_weights[i], r * X[0].values[i], 1e-15);
  EXPECT_NEAR(g.grad_bias, r, 1e-15);
}

TEST(LogReg, RegularizerGradientAlone) {
  // With every input zero and balanced labels the data term has zero weight gradient.
  auto m = random_model(3, 0.25, 5);
  const std::vector<ContextVector> X{{{0, 0, 0}}, {{0, 0, 0}}};
  const std::vector<int> y{1, 0};
  const auto g = loss_gradient(m, X, y);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(g.grad_weights[i], 0.25 * m.weights[i], 1e-15);
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = random_dataset(15, 5, 100 + seed);
    auto m = random_model(5, 0.01 * static_cast<double>(seed), 200 + seed);
    const auto g = loss_gradient(m, d.X, d.y);
    auto numeric = [&](double& param) {
      const double saved = param;
      param = saved + h;
      const double up = loss_at(m, d);
      param = saved - h;
      const double down = loss_at(m, d);
      param = saved;
      return (up - down) / (2 * h);
    };
    for (std::size_t i = 0; i < 5; ++i) {
      const double fd = numeric(m.weights[i]);
      EXPECT_LT(std::abs(fd - g.grad_weights[i]) / std::max(1e-8, std::abs(fd) + std::abs(g.grad_weights[i])), 1e-4);
    }
    const double fd = numeric(m.bias);
    EXPECT_LT(std::abs(fd - g.grad_bias) / std::max(1e-8, std::abs(fd) + std::abs(g.grad_bias)), 1e-4);
  }
}

TEST(LogReg, LossNonIncreasingBelowStabilityBound) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto d = random_dataset(60, 8, 300 + seed);
    TrainConfig cfg;
    cfg.learning_rate = 0.95 * max_stable_learning_rate(d.X, cfg.l2_lambda);
    cfg.epochs = 300;
    cfg.convergence_tolerance = 0.0;
    std::vector<double> trace;
    train_logreg(d.X, d.y, cfg, &trace);
    ASSERT_GT(trace.size(), 2u);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12);
  }
}

TEST(LogReg, JsonRoundTripIsExact) {
  const auto d = random_dataset(30, 7, 9);
  const auto m = train_logreg(d.X, d.y, TrainConfig{});
  const auto back = logreg_from_json(ojson::parse(to_json(m).dump()));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.epochs_run, m.epochs_run);
}

TEST(NaiveBayes, ToyCorpusHandComputed) {
  const std::vector<FeatureList> docs{text_features("sick flu"), text_features("flu shot")};
  const std::vector<Label> labels{Label::positive, Label::negative};
  const auto m = train_nb(docs, labels, 1.0);
  // 6 vocabulary entries with <unk>; 3 features per class.
  // P(sick|+) = 2/9, P(sick|-) = 1/9, equal priors.
  EXPECT_NEAR(nb_predict_proba(m, words({"sick"})), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(nb_predict(m, words({"sick"})), Label::positive);
  EXPECT_NEAR(std::exp(m.log_prior[1]), 0.5, 1e-15);
}

TEST(NaiveBayes, PriorsFollowClassCounts) {
  const std::vector<FeatureList> docs{words({"a"}), words({"a"}), words({"a"}), words({"b"})};
  const std::vector<Label> labels{Label::positive, Label::negative, Label::negative, Label::negative};
  const auto m = train_nb(docs, labels, 1.0);
  EXPECT_NEAR(std::exp(m.log_prior[1]), 0.25, 1e-15);
}

TEST(NaiveBayes, UnseenTokenUsesSmoothingMass) {
  const std::vector<FeatureList> docs{words({"flu"}), words({"shot"})};
  const std::vector<Label> labels{Label::positive, Label::negative};
  const auto m = train_nb(docs, labels, 1.0);
  EXPECT_NEAR(nb_predict_proba(m, words({"zebra"})), 0.5, 1e-12);
  for (int c = 0; c < 2; ++c) EXPECT_TRUE(std::isfinite(m.log_likelihood[c][0]));
}

TEST(NaiveBayes, SymmetricCorpusAndNormalization) {
  const std::vector<FeatureList> docs{words({"a", "x"}), words({"b", "x"})};
  const std::vector<Label> labels{Label::positive, Label::negative};
  const auto m = train_nb(docs, labels, 0.5);
  EXPECT_NEAR(nb_predict_proba(m, words({"a", "b"})), 0.5, 1e-12);
  for (int c = 0; c < 2; ++c) {
    double s = 0.0;
    for (double ll : m.log_likelihood[c]) s += std::exp(ll);
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(NaiveBayes, MatchesBruteForceJoint) {
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h"};
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> len(1, 6);
  std::vector<FeatureList> docs;
  std::vector<Label> labels;
  for (int i = 0; i < 12; ++i) {
    FeatureList d;
    for (int k = len(rng); k > 0; --k) d.push_back(vocab[pick(rng) % (i % 2 ? 8 : 5)]);
    docs.push_back(d);
    labels.push_back(i % 3 == 0 ? Label::positive : Label::negative);
  }
  const double alpha = 0.7;
  const auto m = train_nb(docs, labels, alpha);

  // Independent estimate straight from raw counts, no logs.
  std::map<std::string, double> count[2];
  double total[2] = {0, 0}, ndocs[2] = {0, 0};
  std::set<std::string> seen;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const int c = static_cast<int>(labels[i]);
    ndocs[c] += 1;
    for (const auto& w : docs[i]) {
      count[c][w] += 1;
      total[c] += 1;
      seen.insert(w);
    }
  }
  const double V = static_cast<double>(seen.size() + 1);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureList q;
    for (int k = 0; k < 5; ++k) q.push_back(k == 4 && trial % 4 == 0 ? "zz" : vocab[pick(rng)]);
    double joint[2];
    for (int c = 0; c < 2; ++c) {
      joint[c] = ndocs[c] / (ndocs[0] + ndocs[1]);
      for (const auto& w : q) {
        const double n = seen.contains(w) ? count[c][w] : 0.0;
        joint[c] *= (n + alpha) / (total[c] + alpha * V);
      }
    }
    EXPECT_NEAR(nb_predict_proba(m, q), joint[1] / (joint[0] + joint[1]), 1e-12);
  }
}

TEST(NaiveBayes, LongDocumentsDoNotUnderflow) {
  const std::vector<FeatureList> docs{words({"a", "b"}), words({"c", "d"})};
  const std::vector<Label> labels{Label::positive, Label::negative};
  const auto m = train_nb(docs, labels, 1.0);
  FeatureList balanced, skewed;
  for (int i = 0; i < 5000; ++i) {
    balanced.push_back("a");
    balanced.push_back("c");
    skewed.push_back("a");
    skewed.push_back(i % 100 == 0 ? "c" : "zz");
  }
  EXPECT_NEAR(nb_predict_proba(m, balanced), 0.5, 1e-9);
  const double p = nb_predict_proba(m, skewed);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_GT(p, 0.5);
}

TEST(NaiveBayes, SingleClassAndAlphaErrors) {
  const std::vector<FeatureList> docs{words({"a"}), words({"b"})};
  EXPECT_THROW(train_nb(docs, std::vector<Label>{Label::positive, Label::positive}, 1.0), Error);
  EXPECT_THROW(train_nb(docs, std::vector<Label>{Label::positive, Label::negative}, 0.0), Error);
}

TEST(NaiveBayes, JsonRoundTripIsExact) {
  const auto f = fixtures::make_em_fixture();
  const auto m = nb_baseline_fit(f.labeled, 0.3);
  const auto back = nb_from_json(ojson::parse(to_json(m).dump()));
  EXPECT_EQ(back.vocabulary.terms(), m.vocabulary.terms());
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(back.log_likelihood[c], m.log_likelihood[c]);
    EXPECT_EQ(back.log_prior[c], m.log_prior[c]);
  }
  auto wrong = to_json(m);
  wrong["format_version"] = 99;
  EXPECT_THROW(nb_from_json(wrong), Error);
}

TEST(EmBaseline, ObjectiveNonDecreasing) {
  const auto f = fixtures::make_em_fixture();
  for (double w : {1.0, 0.1}) {
    EMConfig cfg;
    cfg.max_iterations = 30;
    cfg.unlabeled_weight = w;
    cfg.convergence_tolerance = 0.0;
    const auto r = em_fit(f.labeled, f.unlabeled, cfg);
    ASSERT_GE(r.log_likelihood.size(), 2u);
    for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
      EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-9) << "pass " << i;
    }
  }
}

TEST(EmBaseline, EmptyUnlabeledEqualsNaiveBayes) {
  const auto f = fixtures::make_em_fixture();
  EMConfig cfg;
  const auto em = em_fit(f.labeled, {}, cfg);
  const auto nb = nb_baseline_fit(f.labeled, cfg.alpha);
  EXPECT_EQ(em.iterations, 0);
  for (const auto& d : f.unlabeled) {
    const auto x = text_features(d.text);
    EXPECT_EQ(nb_predict_proba(em.model, x), nb_predict_proba(nb, x));
  }
}

TEST(EmBaseline, IterationCapAndPool) {
  const auto f = fixtures::make_em_fixture();
  EMConfig cfg;
  cfg.max_iterations = 1;
  EXPECT_EQ(em_fit(f.labeled, f.unlabeled, cfg).iterations, 1);
  cfg.max_iterations = 5;
  cfg.unlabeled_pool = 10;
  cfg.seed = 4;
  const auto a = em_fit(f.labeled, f.unlabeled, cfg);
  const auto b = em_fit(f.labeled, f.unlabeled, cfg);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EMConfig bad;
  bad.unlabeled_weight = 0.0;
  EXPECT_THROW(em_fit(f.labeled, f.unlabeled, bad), Error);
}
