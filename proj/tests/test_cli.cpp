#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "codecomp/cli/commands.hpp"
#include "codecomp/cli/config.hpp"
#include "support/synthetic.hpp"

using namespace codecomp;
using namespace codecomp::cli;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("codecomp_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<ojson> read_lines(const fs::path& p) {
  std::vector<ojson> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(ojson::parse(line));
  }
  return out;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kCancerCorpus =
    R"({"id":"p1","text":"my mom has cancer","gold_label":"positive"}
{"id":"n1","text":"cancer research news","gold_label":"negative"}
{"id":"p2","text":"diagnosed with cancer","gold_label":"positive"}
{"id":"p3","text":"so sad about cancer","gold_label":"positive"}
)";

ExperimentConfig cancer_config(const TempDir& dir) {
  write_file(dir / "corpus.jsonl", kCancerCorpus);
  ExperimentConfig cfg;
  cfg.task = "phm-cancer";
  cfg.corpus = (dir / "corpus.jsonl").string();
  cfg.out = (dir / "out").string();
  return cfg;
}

ExperimentConfig synthetic_config(const TempDir& dir, std::size_t docs) {
  fixtures::DecomposableSpec spec;
  spec.documents = docs;
  {
    std::ofstream out(dir / "synthetic.jsonl", std::ios::binary);
    write_corpus_jsonl(out, fixtures::make_decomposable_corpus(spec));
  }
  write_file(dir / "two_view.preset", format_preset(fixtures::two_view_preset()));
  ExperimentConfig cfg;
  cfg.task = (dir / "two_view.preset").string();
  cfg.corpus = (dir / "synthetic.jsonl").string();
  cfg.out = (dir / "out").string();
  cfg.experiment.k_folds = 3;
  cfg.experiment.repetitions = 1;
  cfg.experiment.n_labeled = 30;
  cfg.learner.learning_rate = 1.0;
  cfg.learner.epochs = 100;
  cfg.cotrain.iterations = 3;
  cfg.provider.dim = 64;
  return cfg;
}

}  // namespace

TEST(Config, SerializeParseRoundTrip) {
  ExperimentConfig cfg;
  cfg.task = "adr";
  cfg.corpus = "c.tsv";
  cfg.corpus_format = CorpusFormat::tsv;
  cfg.model = ModelKind::em;
  cfg.experiment.dev_fold = 3;
  cfg.provider.window = 5;
  cfg.cotrain.confidence_floor = 0.85;
  cfg.learner.learning_rate = 0.123456789012345;
  cfg.em.unlabeled_pool = 50;
  cfg.gamma = 1.25;
  cfg.gamma_metric = DistanceMetric::cosine;
  cfg.ablation_iterations = {1, 2};
  cfg.sweep_sizes = {50, 100, 200};
  const auto text = serialize_config(cfg);
  std::istringstream in(text);
  const auto back = parse_config(in);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.learner.learning_rate, cfg.learner.learning_rate);
  EXPECT_EQ(back.experiment.dev_fold, 3);
  EXPECT_EQ(back.sweep_sizes, cfg.sweep_sizes);
}

TEST(Config, ErrorsNameTheField) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "exp.cfg");
  };
  auto msg = message_of([&] { parse("[experiment]\nfolds = ten\n"); });
  EXPECT_NE(msg.find("exp.cfg:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("experiment.folds"), std::string::npos) << msg;
  msg = message_of([&] { parse("[cotrain]\nrounds = 3\n"); });
  EXPECT_NE(msg.find("cotrain.rounds"), std::string::npos) << msg;
  msg = message_of([&] { parse("[teacher]\n"); });
  EXPECT_NE(msg.find("[teacher]"), std::string::npos) << msg;

  ExperimentConfig cfg;
  msg = message_of([&] { validate_config(cfg); });
  EXPECT_NE(msg.find("experiment.task"), std::string::npos) << msg;
  cfg.task = "phm-flu";
  cfg.corpus = "/nonexistent/corpus.jsonl";
  msg = message_of([&] { validate_config(cfg); });
  EXPECT_NE(msg.find("experiment.corpus"), std::string::npos) << msg;
  cfg.cotrain.confidence_floor = 0.4;
  msg = message_of([&] { validate_config(cfg, false); });
  EXPECT_NE(msg.find("cotrain.confidence_floor"), std::string::npos) << msg;
}

TEST(Config, FlagValuesOverrideFile) {
  std::istringstream in("[experiment]\nfolds = 10\nseed = 4\n[provider]\nkind = hashed\n");
  auto cfg = parse_config(in);
  set_config_value(cfg, "experiment.folds", "5");
  set_config_value(cfg, "sweep.sizes", "100, 200");
  apply_provider_flag(cfg, "precomputed:/tmp/v.vec");
  EXPECT_EQ(cfg.experiment.k_folds, 5);
  EXPECT_EQ(cfg.experiment.master_seed, 4u);
  EXPECT_EQ(cfg.sweep_sizes, (std::vector<std::size_t>{100, 200}));
  EXPECT_EQ(cfg.provider.kind, ProviderSpec::Kind::precomputed);
  EXPECT_EQ(cfg.provider.path, "/tmp/v.vec");
  EXPECT_THROW(apply_provider_flag(cfg, "bert"), Error);
  EXPECT_THROW(set_config_value(cfg, "folds", "3"), Error);
}

TEST(Prepare, ExampleTweet) {
  const auto preset = load_preset("phm-cancer", default_lexicon_dir());
  const auto lex = Lexicons::load(default_lexicon_dir());
  const Corpus corpus{{"1", "I Just went to my Oncology appointment for cancer", std::nullopt, {}, ""}};
  std::ostringstream enriched;
  const auto s = prepare_corpus(corpus, preset, lex, enriched);
  const auto rec = ojson::parse(enriched.str());
  EXPECT_EQ(rec["kcs"][0]["mentions"][0]["surface"], "i");
  EXPECT_EQ(rec["kcs"][1]["mentions"].size(), 1u);
  EXPECT_EQ(rec["kcs"][1]["mentions"][0]["surface"], "cancer");
  EXPECT_EQ(s.mentions, (std::vector<std::size_t>{2, 1}));  // "i" and "my"
}

TEST(Prepare, SummaryMatchesRecountOfEnrichedFile) {
  TempDir dir;
  const auto cfg = cancer_config(dir);
  std::ostringstream log;
  const auto s = cmd_prepare(cfg, log);
  const auto records = read_lines(dir / "out/enriched.jsonl");
  ASSERT_EQ(records.size(), s.documents);
  std::vector<std::size_t> mentions(2, 0), synthetic(2, 0), empty(2, 0);
  for (const auto& r : records) {
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& m = r["kcs"][k]["mentions"];
      mentions[k] += m.size();
      empty[k] += m.empty();
      for (const auto& x : m) synthetic[k] += x["synthetic"].get<bool>();
    }
  }
  EXPECT_EQ(mentions, s.mentions);
  EXPECT_EQ(synthetic, s.synthetic);
  EXPECT_EQ(empty, s.empty_bags);
  EXPECT_EQ(synthetic[0], 1u);
  EXPECT_NE(log.str().find("documents: 4"), std::string::npos) << log.str();
}

TEST(Prepare, EmptyCorpus) {
  TempDir dir;
  auto cfg = cancer_config(dir);
  write_file(dir / "corpus.jsonl", "");
  std::ostringstream log;
  const auto s = cmd_prepare(cfg, log);
  EXPECT_EQ(s.documents, 0u);
  EXPECT_EQ(s.mentions, (std::vector<std::size_t>{0, 0}));
  EXPECT_EQ(slurp(dir / "out/enriched.jsonl"), "");
}

TEST(Annotate, ChoosesMentionRepromptsAndAcceptsNone) {
  TempDir dir;
  const auto cfg = cancer_config(dir);
  std::ostringstream log;
  cmd_prepare(cfg, log);
  std::istringstream answers("7\nmom\n1\nnone\n");
  std::ostringstream prompts;
  const auto stats = cmd_annotate(dir / "out/enriched.jsonl", dir / "annotated.jsonl", answers, prompts);
  EXPECT_EQ(stats.annotated, 3u);
  EXPECT_EQ(stats.without_mentions, 1u);
  EXPECT_FALSE(stats.interrupted);
  EXPECT_NE(prompts.str().find("invalid choice '7'"), std::string::npos);
  EXPECT_NE(prompts.str().find("invalid choice 'mom'"), std::string::npos);

  const auto out = read_lines(dir / "annotated.jsonl");
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0]["positive_human_spans"], ojson::parse("[[3,6]]"));
  EXPECT_EQ(out[0]["kcs"][0]["mentions"][0]["label"], "negative");
  EXPECT_EQ(out[0]["kcs"][0]["mentions"][1]["label"], "positive");
  EXPECT_FALSE(out[1].contains("annotated"));
  EXPECT_EQ(out[2]["positive_human_spans"], ojson::array());
  EXPECT_EQ(out[2]["kcs"][0]["mentions"][0]["label"], "unlabeled");
  EXPECT_NE(prompts.str().find("warning: document 'p3'"), std::string::npos);

  // The annotated file is a valid corpus again.
  const auto corpus = load_corpus((dir / "annotated.jsonl").string(), CorpusFormat::jsonl);
  EXPECT_EQ(corpus[0].positive_human_spans, (std::vector<CharSpan>{{3, 6}}));
}

TEST(Annotate, ResumesAfterInterruption) {
  TempDir dir;
  const auto cfg = cancer_config(dir);
  std::ostringstream log;
  cmd_prepare(cfg, log);
  std::istringstream first("0\n");
  std::ostringstream sink;
  const auto a = cmd_annotate(dir / "out/enriched.jsonl", dir / "annotated.jsonl", first, sink);
  EXPECT_TRUE(a.interrupted);
  EXPECT_EQ(read_lines(dir / "annotated.jsonl").size(), 2u);

  std::istringstream second("0\n");
  const auto b = cmd_annotate(dir / "out/enriched.jsonl", dir / "annotated.jsonl", second, sink);
  EXPECT_FALSE(b.interrupted);
  EXPECT_EQ(b.skipped_existing, 2u);
  const auto out = read_lines(dir / "annotated.jsonl");
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0]["positive_human_spans"], ojson::parse("[[0,2]]"));
  EXPECT_EQ(out[2]["positive_human_spans"], ojson::parse("[[0,0]]"));
}

TEST(Annotate, MissingInputIsAnError) {
  TempDir dir;
  std::istringstream in;
  std::ostringstream out;
  EXPECT_THROW(cmd_annotate(dir / "absent.jsonl", dir / "a.jsonl", in, out), Error);
}

TEST(ValidateKcs, WritesReportAndWarns) {
  TempDir dir;
  auto cfg = synthetic_config(dir, 60);
  std::ostringstream log;
  EXPECT_THROW(cmd_validate_kcs(cfg, log), Error);  // gamma required
  cfg.gamma = 0.0;
  const auto reports = cmd_validate_kcs(cfg, log);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_FALSE(reports[0].satisfied);
  EXPECT_NE(log.str().find("warning: kcs alpha exceeds gamma"), std::string::npos) << log.str();
  const auto j = read_json_file(dir / "out/gamma_report.json");
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["kcs"], "beta");
  EXPECT_EQ(j[0]["sampled_pairs"], 1000);
}

TEST(Evaluate, OutputsAreByteIdenticalAcrossRuns) {
  TempDir dir;
  auto cfg = synthetic_config(dir, 150);
  std::ostringstream log;
  cmd_evaluate(cfg, log);
  const auto json1 = slurp(dir / "out/report_codecomp.json");
  const auto csv1 = slurp(dir / "out/report_codecomp.csv");
  cfg.experiment.jobs = 2;
  cmd_evaluate(cfg, log);
  EXPECT_EQ(slurp(dir / "out/report_codecomp.json"), json1);
  EXPECT_EQ(slurp(dir / "out/report_codecomp.csv"), csv1);
  const auto j = ojson::parse(json1);
  EXPECT_EQ(j["folds"].size(), 3u);
  EXPECT_EQ(j["model"], "codecomp");
}

TEST(TrainPredict, SavedModelsReproducePredictions) {
  TempDir dir;
  auto cfg = synthetic_config(dir, 120);
  std::ostringstream log;
  cmd_train(cfg, log);
  EXPECT_TRUE(fs::exists(dir / "out/iterations.jsonl"));
  const auto saved = co_model_from_json(read_json_file(dir / "out/model.json"), default_lexicon_dir());
  EXPECT_EQ(saved.model.kcs_names, (std::vector<std::string>{"alpha", "beta"}));
  cmd_predict(cfg, dir / "out/model.json", log);
  const auto preds = read_lines(dir / "out/predictions.jsonl");
  ASSERT_EQ(preds.size(), 120u);

  const auto corpus = load_corpus(cfg.corpus, CorpusFormat::jsonl);
  const auto lex = Lexicons::load(default_lexicon_dir());
  const HashedWindowProvider provider(saved.model.provider.window, saved.model.provider.dim);
  const PreparedCorpus prepared(corpus, saved.preset, lex, provider);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(preds[i]["id"], corpus[i].id);
    EXPECT_EQ(preds[i]["label"], to_string(predict(saved.model, prepared.unlabeled(corpus[i].id)).label));
  }

  cfg.model = ModelKind::nb;
  cmd_train(cfg, log);
  cmd_predict(cfg, dir / "out/model.json", log);
  EXPECT_EQ(read_lines(dir / "out/predictions.jsonl").size(), 120u);
}

TEST(AblateSweep, WriteCsvFiles) {
  TempDir dir;
  auto cfg = synthetic_config(dir, 120);
  cfg.ablation_iterations = {1, 3};
  cfg.sweep_sizes = {20, 40};
  cfg.model = ModelKind::nb;
  std::ostringstream log;
  cmd_sweep(cfg, log);
  const auto sweep = slurp(dir / "out/sweep_nb.csv");
  EXPECT_EQ(sweep.rfind("n_labeled,f1,precision,recall\n20,", 0), 0u) << sweep;
  cfg.model = ModelKind::codecomp;
  const auto rows = cmd_ablate(cfg, log);
  EXPECT_EQ(rows.size(), 5u);
  EXPECT_NE(slurp(dir / "out/ablation.csv").find("+3-itr co-train,"), std::string::npos);
}

#ifdef CODECOMP_CLI_PATH
TEST(Binary, SubcommandsAndErrors) {
  TempDir dir;
  const auto cfg = cancer_config(dir);
  const std::string exe = CODECOMP_CLI_PATH;
  auto run = [&](const std::string& args) {
    return std::system((exe + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                        (dir / "stderr.txt").string())
                           .c_str());
  };
  EXPECT_EQ(run("prepare --task phm-cancer --corpus " + cfg.corpus + " --out " + cfg.out), 0);
  EXPECT_NE(slurp(dir / "stdout.txt").find("documents: 4"), std::string::npos);
  EXPECT_NE(run("prepare --task phm-measles --corpus " + cfg.corpus), 0);
  EXPECT_NE(slurp(dir / "stderr.txt").find("known presets"), std::string::npos);
  EXPECT_NE(run("evaluate --folds ten"), 0);
  EXPECT_NE(run("frobnicate"), 0);
}
#endif
