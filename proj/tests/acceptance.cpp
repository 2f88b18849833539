// Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero
// if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "codecomp/cli/commands.hpp"
#include "support/synthetic.hpp"

using namespace codecomp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

const Lexicons& lex() {
  static const Lexicons l = Lexicons::load(default_lexicon_dir());
  return l;
}

Outcome aggregation_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> views(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> p(static_cast<std::size_t>(views(rng)));
    for (auto& x : p) x = t % 10 == 0 ? std::round(u(rng) * 4) / 4 : u(rng);
    long double pos = 1, neg = 1;
    for (double x : p) {
      pos *= x;
      neg *= 1 - x;
    }
    const bool want = p.size() == 1 ? p[0] >= 0.5 : pos >= neg;
    if (product_rule_positive(p) != want) return fail("trial " + std::to_string(t));
  }
  return {true, "10000 trials"};
}

Outcome mil_oracle() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> len(1, 12), grid(0, 8);
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> p(static_cast<std::size_t>(len(rng)));
    for (auto& x : p) x = grid(rng) / 8.0;  // coarse grid forces ties
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (p[i] > p[best]) best = i;
    }
    const auto s = mil_example_score(p);
    if (s.index != best || s.prob != p[best]) return fail("trial " + std::to_string(t));
  }
  return {true, "10000 lists"};
}

Outcome gradient_check() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dims(1, 20), rows(1, 8);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto d = static_cast<std::size_t>(dims(rng));
    std::vector<ContextVector> X(static_cast<std::size_t>(rows(rng)), ContextVector{std::vector<double>(d)});
    std::vector<int> y;
    for (auto& x : X) {
      for (auto& v : x.values) v = g(rng);
      y.push_back(g(rng) > 0);
    }
    LogRegModel m;
    m.config.l2_lambda = 1e-2;
    m.weights.resize(d);
    for (auto& w : m.weights) w = 0.5 * g(rng);
    m.bias = 0.5 * g(rng);
    const auto grad = loss_gradient(m, X, y);
    const double h = 1e-5;
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({1e-8, std::abs(a), std::abs(n)}); };
    for (std::size_t i = 0; i <= d; ++i) {
      auto plus = m, minus = m;
      double& ap = i < d ? plus.weights[i] : plus.bias;
      double& am = i < d ? minus.weights[i] : minus.bias;
      ap += h;
      am -= h;
      const double numeric = (loss_gradient(plus, X, y).loss - loss_gradient(minus, X, y).loss) / (2 * h);
      const double analytic = i < d ? grad.grad_weights[i] : grad.grad_bias;
      if (std::abs(analytic) < 1e-7 && std::abs(numeric) < 1e-7) continue;
      worst = std::max(worst, rel(analytic, numeric));
    }
  }
  std::ostringstream s;
  s << "max relative error " << std::scientific << std::setprecision(2) << worst;
  return {worst < 1e-4, s.str()};
}

Outcome nb_oracle() {
  std::vector<std::string> vocab;
  for (int i = 0; i < 10; ++i) vocab.push_back("t" + std::to_string(i));
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::vector<FeatureList> docs;
  std::vector<Label> labels;
  for (int i = 0; i < 20; ++i) {
    FeatureList f;
    for (int k = 0; k < 4; ++k) f.push_back(vocab[pick(rng) % (i % 2 ? 10 : 6)]);
    docs.push_back(f);
    labels.push_back(i % 2 ? Label::positive : Label::negative);
  }
  const double alpha = 1.0;
  const auto m = train_nb(docs, labels, alpha);
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
  double worst = 0.0;
  std::size_t checked = 0;
  // Every sequence of length 0..5 over the vocabulary.
  std::function<void(FeatureList&)> walk = [&](FeatureList& q) {
    double joint[2];
    for (int c = 0; c < 2; ++c) {
      joint[c] = ndocs[c] / (ndocs[0] + ndocs[1]);
      for (const auto& w : q) joint[c] *= ((seen.contains(w) ? count[c][w] : 0.0) + alpha) / (total[c] + alpha * V);
    }
    worst = std::max(worst, std::abs(nb_predict_proba(m, q) - joint[1] / (joint[0] + joint[1])));
    ++checked;
    if (q.size() == 5) return;
    for (const auto& w : vocab) {
      q.push_back(w);
      walk(q);
      q.pop_back();
    }
  };
  FeatureList q;
  walk(q);
  std::ostringstream s;
  s << checked << " documents, max error " << std::scientific << std::setprecision(2) << worst;
  return {worst <= 1e-9, s.str()};
}

Outcome em_monotone() {
  const auto f = fixtures::make_em_fixture();
  EMConfig cfg;
  cfg.max_iterations = 25;
  cfg.convergence_tolerance = -1.0;  // never stop early
  cfg.unlabeled_pool = 0;
  const auto r = em_fit(f.labeled, f.unlabeled, cfg);
  if (r.iterations != 25) return fail("ran " + std::to_string(r.iterations) + " iterations");
  for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
    if (r.log_likelihood[i] < r.log_likelihood[i - 1] - 1e-9) return fail("decrease at pass " + std::to_string(i));
  }
  return {true, "25 passes"};
}

Outcome fold_protocol() {
  const auto corpus = fixtures::make_imbalanced_corpus(2013, 0.11, 6);
  const auto positives = count_label(corpus, Label::positive);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto plan = stratified_folds(corpus, 10, seed);
    if (!(plan == stratified_folds(corpus, 10, seed))) return fail("not deterministic");
    std::set<std::string> seen;
    std::size_t covered = 0;
    for (int f = 0; f < 10; ++f) {
      const auto test = test_split(corpus, plan, f);
      const auto pos = count_label(test, Label::positive);
      const double expect = static_cast<double>(positives) / 10.0;
      if (std::abs(static_cast<double>(pos) - std::round(expect)) > 1.0) {
        return fail("fold " + std::to_string(f) + " has " + std::to_string(pos) + " positives");
      }
      for (const auto& d : test) {
        if (!seen.insert(d.id).second) return fail("document in two folds");
      }
      covered += test.size();
    }
    if (covered != corpus.size() || seen.size() != corpus.size()) return fail("not a partition");
  }
  return {true, std::to_string(positives) + " positives over 10 folds"};
}

Outcome cotrain_bookkeeping() {
  fixtures::DecomposableSpec spec;
  spec.documents = 500;
  spec.seed = 7;
  const auto corpus = fixtures::make_decomposable_corpus(spec);
  const auto preset = fixtures::two_view_preset();
  const HashedWindowProvider provider(3, 128);
  const PreparedCorpus prepared(corpus, preset, lex(), provider);
  std::vector<Example> labeled, unlabeled, test;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& id = corpus[i].id;
    if (i < 60) {
      labeled.push_back(prepared.labeled(id));
    } else if (i < 400) {
      unlabeled.push_back(prepared.unlabeled(id));
    } else {
      test.push_back(prepared.unlabeled(id));
    }
  }
  TrainConfig learner;
  learner.learning_rate = 1.0;
  learner.epochs = 200;
  CoConfig co;
  co.iterations = 25;
  CoTrainer trainer(labeled, unlabeled, prepared.kcs_names(), co, learner);
  const std::size_t total = labeled.size() + unlabeled.size();
  std::size_t prev = labeled.size();
  int steps = 0;
  while (steps < co.iterations && trainer.step()) {
    ++steps;
    const auto& rec = trainer.log().back();
    std::size_t moved = 0;
    for (const auto& v : rec.views) moved += v.positive_ids.size() + v.negative_ids.size();
    if (moved > 4) return fail("iteration moved " + std::to_string(moved));
    if (rec.labeled_examples + rec.unlabeled_examples != total) return fail("pool size changed");
    if (rec.labeled_examples != prev + moved) return fail("labeled pool grew inconsistently");
    prev = rec.labeled_examples;
  }
  co.iterations = 0;
  const auto base = cotrain_fit(labeled, unlabeled, prepared.kcs_names(), co, learner).model;
  const std::vector<LogRegModel> indep{train_view(labeled, 0, learner), train_view(labeled, 1, learner)};
  for (const auto& ex : test) {
    const auto score = score_example(indep, ex);
    const auto probs = view_probabilities(score, co.neutral_prob);
    const auto want = product_rule_positive(probs) ? Label::positive : Label::negative;
    if (predict(base, ex).label != want) return fail("K=0 differs on " + ex.doc_id);
  }
  return {true, std::to_string(steps) + " iterations"};
}

Outcome directional_ablation() {
  const auto corpus = fixtures::make_decomposable_corpus(fixtures::DecomposableSpec{});
  const auto preset = fixtures::two_view_preset();
  ModelSpec model;
  model.learner.learning_rate = 1.0;
  model.provider.dim = 256;
  model.provider.window = 3;
  ExperimentSpec exp;
  exp.k_folds = 5;
  exp.repetitions = 5;
  exp.n_labeled = 100;
  exp.master_seed = 11;
  const auto rows = ablation_table({corpus, preset, lex()}, model, exp, {25});
  std::ostringstream s;
  s << std::fixed << std::setprecision(3);
  for (std::size_t i = 0; i < rows.size(); ++i) s << (i ? " " : "") << rows[i].name << '=' << rows[i].metrics.f1;
  const double single = std::max(rows[0].metrics.f1, rows[1].metrics.f1);
  const double combined = rows[2].metrics.f1;
  const double cotrained = rows[3].metrics.f1;
  return {combined >= single - 0.01 && cotrained >= combined, s.str()};
}

Outcome rule_fidelity() {
  struct Case {
    std::vector<std::string> in, out;
    SynthesisRule rule;
  };
  const std::vector<Case> cases{
      {{"went", "to", "bed"}, {"i", "went", "to", "bed"}, SynthesisRule::past_tense},
      {{"tired", "today"}, {"i", "am", "tired", "today"}, SynthesisRule::adjective},
      {{"diagnosed", "with", "flu"}, {"i", "have", "diagnosed", "with", "flu"}, SynthesisRule::past_participle},
      {{"feeling", "sick"}, {"i", "am", "feeling", "sick"}, SynthesisRule::present_continuous},
      {{"is", "sick"}, {"i", "am", "sick"}, SynthesisRule::is_replacement},
  };
  for (const auto& c : cases) {
    const auto r = synthesize_human_mention(std::span<const std::string>(c.in), lex());
    if (token_texts(r.tokens) != c.out || r.rule != c.rule) return fail("synthesizer on '" + c.in[0] + "'");
  }
  auto surfaces = [](const std::string& text) {
    std::vector<std::string> out;
    for (const auto& m : extract_human_mentions(tokenize(text), lex())) out.push_back(m.surface);
    return out;
  };
  using W = std::vector<std::string>;
  if (surfaces("it hurts so much") != W{}) return fail("'it' was marked");
  if (surfaces("@mary says hi") != W{"@mary"}) return fail("user mention");
  if (surfaces("my friend has the flu") != W{"my", "friend"}) return fail("pronoun or person word");
  return {true, "5 synthesizer rules, 3 mention rules"};
}

Outcome reproducible_reports() {
  const fs::path dir = fs::temp_directory_path() / "codecomp_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fixtures::DecomposableSpec spec;
  spec.documents = 300;
  {
    std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
    write_corpus_jsonl(out, fixtures::make_decomposable_corpus(spec));
    std::ofstream preset(dir / "two_view.preset", std::ios::binary);
    preset << format_preset(fixtures::two_view_preset());
  }
  cli::ExperimentConfig cfg;
  cfg.task = (dir / "two_view.preset").string();
  cfg.corpus = (dir / "corpus.jsonl").string();
  cfg.experiment.k_folds = 3;
  cfg.experiment.repetitions = 2;
  cfg.experiment.n_labeled = 40;
  cfg.experiment.master_seed = 5;
  cfg.learner.learning_rate = 1.0;
  cfg.learner.epochs = 150;
  cfg.cotrain.iterations = 5;
  cfg.provider.dim = 64;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  std::string first[2];
  bool same = true;
  for (int run = 0; run < 2; ++run) {
    cfg.out = (dir / ("run" + std::to_string(run))).string();
    std::ostringstream log;
    cli::cmd_evaluate(cfg, log);
    const auto json = slurp(fs::path(cfg.out) / "report_codecomp.json");
    const auto csv = slurp(fs::path(cfg.out) / "report_codecomp.csv");
    if (run == 0) {
      first[0] = json;
      first[1] = csv;
    } else {
      same = json == first[0] && csv == first[1] && !json.empty() && !csv.empty();
    }
  }
  fs::remove_all(dir);
  return {same, same ? "JSON and CSV identical" : "reports differ"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"aggregation oracle", aggregation_oracle},
      {"MIL oracle", mil_oracle},
      {"gradient check", gradient_check},
      {"naive Bayes oracle", nb_oracle},
      {"EM monotonicity", em_monotone},
      {"fold protocol", fold_protocol},
      {"co-training bookkeeping", cotrain_bookkeeping},
      {"directional ablation", directional_ablation},
      {"rule fidelity", rule_fidelity},
      {"reproducibility", reproducible_reports},
  };
  int failures = 0;
  int n = 0;
  for (const auto& c : criteria) {
    ++n;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << n << ": " << c.name << " (" << o.detail
              << "; " << std::fixed << std::setprecision(2) << secs << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
