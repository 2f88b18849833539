#pragma once

// Subcommand implementations. Each takes a validated configuration and
// streams for human-readable messages; artifacts go under cfg.out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "codecomp/cli/config.hpp"
#include "codecomp/concepts.hpp"
#include "codecomp/context.hpp"
#include "codecomp/corpus.hpp"
#include "codecomp/cotrain.hpp"
#include "codecomp/eval.hpp"
#include "codecomp/lexicon.hpp"
#include "codecomp/preset.hpp"
#include "codecomp/serialize.hpp"

namespace codecomp::cli {

namespace fs = std::filesystem;

inline fs::path output_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.out);
  fs::create_directories(dir);
  return dir;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareSummary {
  std::size_t documents = 0;
  std::vector<std::string> kcs_names;
  std::vector<std::size_t> mentions;    // per set
  std::vector<std::size_t> synthetic;   // per set
  std::vector<std::size_t> empty_bags;  // per set
  std::vector<std::string> warnings;
};

inline ojson enriched_record(const Document& doc, const AnalyzedDocument& a, const BagSet& bags,
                             const TaskPreset& preset) {
  ojson j = to_json(doc);
  j["tokens"] = token_texts(a.tokens);
  j["masked_tokens"] = a.masked_tokens;
  ojson sets = ojson::array();
  for (std::size_t k = 0; k < preset.kcs.size(); ++k) {
    ojson mentions = ojson::array();
    for (std::size_t i = 0; i < a.mentions[k].size(); ++i) {
      const auto& m = a.mentions[k][i];
      const auto cs = mention_char_span(a.tokens, m);
      mentions.push_back({{"surface", m.surface},
                          {"token_begin", m.range.begin},
                          {"token_end", m.range.end},
                          {"char_begin", cs.begin},
                          {"char_end", cs.end},
                          {"synthetic", m.synthetic},
                          {"label", to_string(bags.bags[k].instances[i].label)}});
    }
    sets.push_back({{"name", preset.kcs[k].name},
                    {"kind", to_string(preset.kcs[k].kind)},
                    {"mentions", mentions}});
  }
  j["kcs"] = sets;
  return j;
}

inline PrepareSummary prepare_corpus(const Corpus& corpus, const TaskPreset& preset,
                                     const Lexicons& lex, std::ostream& enriched) {
  PrepareSummary s;
  for (const auto& k : preset.kcs) s.kcs_names.push_back(k.name);
  s.mentions.assign(preset.kcs.size(), 0);
  s.synthetic.assign(preset.kcs.size(), 0);
  s.empty_bags.assign(preset.kcs.size(), 0);
  for (const auto& doc : corpus) {
    const auto a = analyze_document(doc, preset, lex);
    const auto bags = build_bags(doc, a, preset);
    ++s.documents;
    for (std::size_t k = 0; k < preset.kcs.size(); ++k) {
      s.mentions[k] += a.mentions[k].size();
      for (const auto& m : a.mentions[k]) s.synthetic[k] += m.synthetic;
      s.empty_bags[k] += a.mentions[k].empty();
    }
    s.warnings.insert(s.warnings.end(), bags.warnings.begin(), bags.warnings.end());
    enriched << enriched_record(doc, a, bags, preset).dump() << '\n';
  }
  return s;
}

inline void print_summary(std::ostream& out, const PrepareSummary& s) {
  out << "documents: " << s.documents << '\n';
  for (std::size_t k = 0; k < s.kcs_names.size(); ++k) {
    out << "kcs " << s.kcs_names[k] << ": mentions " << s.mentions[k] << " (synthetic "
        << s.synthetic[k] << "), empty bags " << s.empty_bags[k] << '\n';
  }
  out << "warnings: " << s.warnings.size() << '\n';
}

inline PrepareSummary cmd_prepare(const ExperimentConfig& cfg, std::ostream& log) {
  validate_config(cfg);
  const auto lexdir = cfg.lexicons();
  const auto preset = load_preset(cfg.task, lexdir);
  const auto lex = Lexicons::load(lexdir);
  const auto corpus = load_corpus(cfg.corpus, cfg.corpus_format);
  const auto path = output_dir(cfg) / "enriched.jsonl";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  auto s = prepare_corpus(corpus, preset, lex, out);
  for (const auto& w : s.warnings) log << "warning: " << w << '\n';
  print_summary(log, s);
  log << "wrote " << path.string() << '\n';
  return s;
}

// ---------------------------------------------------------------------------
// annotate

struct AnnotateStats {
  std::size_t annotated = 0;
  std::size_t skipped_existing = 0;
  std::size_t without_mentions = 0;
  bool interrupted = false;
};

namespace detail {

inline std::vector<ojson> read_jsonl(const fs::path& path) {
  std::vector<ojson> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(ojson::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// Indices chosen by the operator: "none", or one or more indices separated by
// commas or spaces. Returns nullopt on invalid input.
inline std::optional<std::vector<std::size_t>> parse_choice(std::string_view text, std::size_t n) {
  text = trim(text);
  if (text == "none") return std::vector<std::size_t>{};
  std::vector<std::size_t> out;
  std::string token;
  std::string all(text);
  for (auto& ch : all) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream items(all);
  while (items >> token) {
    auto v = parse_int<std::size_t>(token);
    if (!v || *v >= n) return std::nullopt;
    if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
  }
  if (out.empty()) return std::nullopt;
  std::sort(out.begin(), out.end());
  return out;
}

inline ojson* human_set(ojson& record) {
  for (auto& k : record["kcs"]) {
    if (k.value("kind", "") == "human") return &k;
  }
  return nullptr;
}

}  // namespace detail

// For every positive document lists the human mentions and reads the
// operator's choice from `in`. Records are appended to `out_path` one at a
// time, so an interrupted session resumes at the first document not yet
// written there.
inline AnnotateStats cmd_annotate(const fs::path& enriched_in, const fs::path& out_path,
                                  std::istream& in, std::ostream& out) {
  if (!fs::is_regular_file(enriched_in)) throw Error("cannot open '" + enriched_in.string() + "'");
  const auto records = detail::read_jsonl(enriched_in);
  std::set<std::string> done;
  for (const auto& r : detail::read_jsonl(out_path)) done.insert(document_from_json(r).id);

  std::ofstream sink(out_path, std::ios::binary | std::ios::app);
  if (!sink) throw Error("cannot write '" + out_path.string() + "'");
  AnnotateStats stats;
  for (auto record : records) {
    const auto doc = document_from_json(record);
    if (done.contains(doc.id)) {
      ++stats.skipped_existing;
      continue;
    }
    auto* human = detail::human_set(record);
    if (doc.gold_label == Label::positive && human != nullptr) {
      auto& mentions = (*human)["mentions"];
      std::vector<std::size_t> chosen;
      if (mentions.empty()) {
        ++stats.without_mentions;
        out << "warning: document '" << doc.id << "' has no human mention; left unannotated\n";
      } else {
        out << "\n[" << doc.id << "] " << doc.text << '\n';
        for (std::size_t i = 0; i < mentions.size(); ++i) {
          out << "  " << i << ": " << mentions[i]["surface"].get<std::string>()
              << (mentions[i]["synthetic"].get<bool>() ? " (inserted)" : "") << '\n';
        }
        std::optional<std::vector<std::size_t>> choice;
        while (!choice) {
          out << "index (0-" << mentions.size() - 1 << ") or 'none'> " << std::flush;
          std::string line;
          if (!std::getline(in, line)) {
            stats.interrupted = true;
            return stats;
          }
          choice = detail::parse_choice(line, mentions.size());
          if (!choice) out << "invalid choice '" << std::string(trim(line)) << "'\n";
        }
        chosen = *choice;
        if (chosen.empty()) {
          out << "warning: document '" << doc.id
              << "' has no annotated human mention; its human instances stay unlabeled\n";
        }
      }
      ojson spans = ojson::array();
      for (std::size_t i = 0; i < mentions.size(); ++i) {
        const bool pos = std::find(chosen.begin(), chosen.end(), i) != chosen.end();
        if (pos) {
          spans.push_back(ojson::array({mentions[i]["char_begin"], mentions[i]["char_end"]}));
        }
        mentions[i]["label"] = chosen.empty() ? "unlabeled" : (pos ? "positive" : "negative");
      }
      record["positive_human_spans"] = spans;
      record["annotated"] = true;
      ++stats.annotated;
    }
    sink << record.dump() << '\n' << std::flush;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Shared loading

struct Workspace {
  TaskPreset preset;
  Lexicons lexicons;
  Corpus corpus;
};

inline Workspace load_workspace(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto lexdir = cfg.lexicons();
  return {load_preset(cfg.task, lexdir), Lexicons::load(lexdir),
          load_corpus(cfg.corpus, cfg.corpus_format)};
}

// ---------------------------------------------------------------------------
// validate-kcs

inline std::vector<GammaReport> cmd_validate_kcs(const ExperimentConfig& cfg, std::ostream& log) {
  if (!cfg.gamma) throw Error("validate.gamma is required (set it in the config or pass --gamma)");
  const auto ws = load_workspace(cfg);
  const auto provider = make_provider(cfg.provider);
  std::vector<AnalyzedDocument> analyzed;
  for (const auto& d : ws.corpus) analyzed.push_back(analyze_document(d, ws.preset, ws.lexicons));

  std::vector<GammaReport> reports;
  ojson j = ojson::array();
  for (std::size_t k = 0; k < ws.preset.kcs.size(); ++k) {
    const auto& name = ws.preset.kcs[k].name;
    std::size_t mentions = 0;
    for (const auto& a : analyzed) mentions += a.mentions[k].size();
    if (mentions < 2) {
      log << "warning: kcs " << name << " has " << mentions << " mentions; skipped\n";
      continue;
    }
    const auto r = validate_kcs_gamma(*provider, analyzed, ws.preset, k, *cfg.gamma,
                                      cfg.gamma_pairs, derive_seed(cfg.experiment.master_seed, k),
                                      cfg.gamma_metric);
    log << "kcs " << r.kcs_name << ": pairs " << r.sampled_pairs << ", max "
        << format_double(r.max_distance) << ", p95 " << format_double(r.quantile95_distance)
        << ", gamma " << format_double(r.gamma) << (r.satisfied ? ", ok" : ", NOT satisfied")
        << '\n';
    if (!r.satisfied) {
      log << "warning: kcs " << r.kcs_name
          << " exceeds gamma; its mentions may not share a context\n";
    }
    j.push_back({{"kcs", r.kcs_name},
                 {"gamma", r.gamma},
                 {"sampled_pairs", r.sampled_pairs},
                 {"max_distance", r.max_distance},
                 {"quantile95_distance", r.quantile95_distance},
                 {"satisfied", r.satisfied}});
    reports.push_back(r);
  }
  write_json_file(output_dir(cfg) / "gamma_report.json", j);
  return reports;
}

// ---------------------------------------------------------------------------
// train

// Trains on the whole corpus: n_labeled documents keep their labels, the
// rest are unlabeled.
inline void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  const auto ws = load_workspace(cfg);
  const auto sample = sample_labeled(ws.corpus, {cfg.experiment.n_labeled, cfg.experiment.master_seed});
  const auto dir = output_dir(cfg);
  if (cfg.model == ModelKind::codecomp) {
    const auto provider = make_provider(cfg.provider);
    const PreparedCorpus prepared(ws.corpus, ws.preset, ws.lexicons, *provider);
    auto fit = cotrain_fit(examples_for(prepared, sample.labeled, true),
                           examples_for(prepared, sample.unlabeled, false), prepared.kcs_names(),
                           cfg.cotrain, cfg.learner, cfg.provider);
    write_json_file(dir / "model.json", to_json(ws.preset, fit.model));
    std::ofstream it(dir / "iterations.jsonl", std::ios::binary);
    write_iteration_log(it, fit.log, fit.model.kcs_names);
    log << "co-training ran " << fit.log.size() << " iteration(s); labeled "
        << sample.labeled.size() << ", unlabeled " << sample.unlabeled.size() << '\n';
  } else if (cfg.model == ModelKind::nb) {
    write_json_file(dir / "model.json", to_json(nb_baseline_fit(sample.labeled, cfg.nb_alpha)));
  } else {
    auto em = cfg.em;
    em.seed = derive_seed(cfg.experiment.master_seed, 1);
    const auto r = em_fit(sample.labeled, sample.unlabeled, em);
    write_json_file(dir / "model.json", to_json(r.model));
    log << "EM ran " << r.iterations << " iteration(s)\n";
  }
  log << "wrote " << (dir / "model.json").string() << '\n';
}

// ---------------------------------------------------------------------------
// predict

inline void cmd_predict(const ExperimentConfig& cfg, const fs::path& model_path, std::ostream& log) {
  if (cfg.corpus.empty()) throw Error("experiment.corpus is required");
  const auto corpus = load_corpus(cfg.corpus, cfg.corpus_format);
  const auto j = read_json_file(model_path);
  const auto path = output_dir(cfg) / "predictions.jsonl";
  std::ofstream out(path, std::ios::binary);
  if (j.value("type", "") == "naive_bayes") {
    const auto nb = nb_from_json(j);
    for (const auto& d : corpus) {
      const double p = nb_predict_proba(nb, text_features(d.text));
      out << ojson{{"id", d.id},
                   {"label", to_string(p >= 0.5 ? Label::positive : Label::negative)},
                   {"probability", p}}
                 .dump()
          << '\n';
    }
  } else {
    const auto lexdir = cfg.lexicons();
    const auto saved = co_model_from_json(j, lexdir);
    const auto lex = Lexicons::load(lexdir);
    const auto provider = make_provider(saved.model.provider);
    const PreparedCorpus prepared(corpus, saved.preset, lex, *provider);
    for (const auto& d : corpus) {
      const auto p = predict(saved.model, prepared.unlabeled(d.id));
      out << ojson{{"id", d.id}, {"label", to_string(p.label)}, {"view_probs", p.view_probs}}.dump()
          << '\n';
    }
  }
  log << "wrote " << path.string() << '\n';
}

// ---------------------------------------------------------------------------
// evaluate / ablate / sweep

inline RunReport cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  const auto ws = load_workspace(cfg);
  const auto report =
      run_experiment({ws.corpus, ws.preset, ws.lexicons}, cfg.model_spec(), cfg.experiment);
  const auto dir = output_dir(cfg);
  const std::string stem = "report_" + std::string(to_string(cfg.model));
  write_json_file(dir / (stem + ".json"), to_json(report));
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_text_file(dir / (stem + ".csv"), csv.str());
  log << to_string(cfg.model) << ": F1 " << format_double(report.mean.f1) << ", precision "
      << format_double(report.mean.precision) << ", recall " << format_double(report.mean.recall)
      << '\n';
  return report;
}

inline std::vector<AblationRow> cmd_ablate(const ExperimentConfig& cfg, std::ostream& log) {
  const auto ws = load_workspace(cfg);
  const auto rows = ablation_table({ws.corpus, ws.preset, ws.lexicons}, cfg.model_spec(),
                                   cfg.experiment, cfg.ablation_iterations);
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  write_text_file(output_dir(cfg) / "ablation.csv", csv.str());
  log << csv.str();
  return rows;
}

inline std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  const auto ws = load_workspace(cfg);
  const auto points = training_size_sweep({ws.corpus, ws.preset, ws.lexicons}, cfg.model_spec(),
                                          cfg.experiment, cfg.sweep_sizes);
  std::ostringstream csv;
  write_sweep_csv(csv, points);
  write_text_file(output_dir(cfg) / ("sweep_" + std::string(to_string(cfg.model)) + ".csv"),
                  csv.str());
  log << csv.str();
  return points;
}

}  // namespace codecomp::cli
