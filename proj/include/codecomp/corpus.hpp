#pragma once

// Corpus ingestion, stratified fold planning and labeled/unlabeled sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "codecomp/common.hpp"

namespace codecomp {

// Half-open byte range into Document::text. A zero-length span anchors an
// implicit mention that the synthesizer inserts at that offset.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Document {
  std::string id;
  std::string text;
  std::optional<Label> gold_label;
  std::vector<CharSpan> positive_human_spans;
  std::string task;

  friend bool operator==(const Document&, const Document&) = default;
};

using Corpus = std::vector<Document>;

enum class CorpusFormat { jsonl, tsv };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl" || name == "json") return CorpusFormat::jsonl;
  if (name == "tsv") return CorpusFormat::tsv;
  throw Error("unknown corpus format '" + std::string(name) + "' (expected jsonl or tsv)");
}

inline void validate_document(const Document& doc) {
  if (doc.id.empty()) throw Error("document id must be non-empty");
  auto spans = doc.positive_human_spans;
  std::sort(spans.begin(), spans.end(), [](const CharSpan& a, const CharSpan& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.begin > s.end || s.end > doc.text.size()) {
      throw Error("document '" + doc.id + "': span [" + std::to_string(s.begin) + "," +
                  std::to_string(s.end) + ") outside text of length " +
                  std::to_string(doc.text.size()));
    }
    if (i > 0 && (spans[i - 1].end > s.begin || spans[i - 1] == s)) {
      throw Error("document '" + doc.id + "': overlapping positive_human_spans");
    }
  }
  if (!spans.empty() && doc.gold_label != Label::positive) {
    throw Error("document '" + doc.id + "': positive_human_spans set on a non-positive document");
  }
}

inline nlohmann::ordered_json to_json(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  if (doc.gold_label) {
    j["gold_label"] = std::string(to_string(*doc.gold_label));
  } else {
    j["gold_label"] = nullptr;
  }
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : doc.positive_human_spans) spans.push_back({s.begin, s.end});
  j["positive_human_spans"] = std::move(spans);
  if (!doc.task.empty()) j["task"] = doc.task;
  return j;
}

template <typename Json>
Document document_from_json(const Json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  Document doc;
  auto id = j.find("id");
  if (id == j.end()) throw Error("missing field 'id'");
  if (id->is_string()) {
    doc.id = id->template get<std::string>();
  } else if (id->is_number_integer()) {
    doc.id = std::to_string(id->template get<long long>());
  } else {
    throw Error("field 'id' must be a string or integer");
  }
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) throw Error("missing string field 'text'");
  doc.text = text->template get<std::string>();
  if (auto g = j.find("gold_label"); g != j.end() && !g->is_null()) {
    std::optional<Label> label;
    if (g->is_string()) label = parse_label(g->template get<std::string>());
    if (g->is_number_integer()) label = parse_label(std::to_string(g->template get<int>()));
    if (!label) throw Error("field 'gold_label' must be \"positive\" or \"negative\"");
    doc.gold_label = label;
  }
  if (auto s = j.find("positive_human_spans"); s != j.end() && !s->is_null()) {
    if (!s->is_array()) throw Error("field 'positive_human_spans' must be an array");
    for (const auto& pair : *s) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() ||
          !pair[1].is_number_unsigned()) {
        throw Error("each span must be a pair of non-negative integers");
      }
      doc.positive_human_spans.push_back(
          {pair[0].template get<std::size_t>(), pair[1].template get<std::size_t>()});
    }
  }
  if (auto t = j.find("task"); t != j.end() && t->is_string()) {
    doc.task = t->template get<std::string>();
  }
  validate_document(doc);
  return doc;
}

namespace detail {

inline void check_unique_id(std::unordered_set<std::string>& seen, const std::string& id,
                            std::size_t line) {
  if (!seen.insert(id).second) {
    throw Error("duplicate document id '" + id + "' (line " + std::to_string(line) + ")");
  }
}

inline std::vector<std::string> split_tabs(std::string_view line, std::size_t max_fields) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (fields.size() + 1 < max_fields) {
    auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) break;
    fields.emplace_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  fields.emplace_back(line.substr(start));
  return fields;
}

}  // namespace detail

inline Corpus load_corpus(std::istream& in, CorpusFormat format) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    Document doc;
    try {
      if (format == CorpusFormat::jsonl) {
        doc = document_from_json(nlohmann::json::parse(line));
      } else {
        auto fields = detail::split_tabs(line, 3);
        if (line_no == 1 && fields.size() == 3 && fields[0] == "id" && fields[1] == "label") {
          continue;  // header row
        }
        if (fields.size() != 3) throw Error("expected 3 tab-separated fields (id, label, text)");
        doc.id = fields[0];
        if (!trim(fields[1]).empty()) {
          doc.gold_label = parse_label(trim(fields[1]));
          if (!doc.gold_label) throw Error("unrecognized label '" + fields[1] + "'");
        }
        doc.text = fields[2];
        validate_document(doc);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
    detail::check_unique_id(seen, doc.id, line_no);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file '" + path + "'");
  return load_corpus(in, format);
}

inline void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const auto& doc : corpus) out << to_json(doc).dump() << '\n';
}

inline std::size_t count_label(const Corpus& corpus, Label label) {
  return static_cast<std::size_t>(std::count_if(
      corpus.begin(), corpus.end(), [&](const Document& d) { return d.gold_label == label; }));
}

// ---------------------------------------------------------------------------
// Fold planning

struct FoldPlan {
  int k = 0;
  std::map<std::string, int> assignments;

  int fold_of(const std::string& id) const {
    auto it = assignments.find(id);
    if (it == assignments.end()) throw Error("document '" + id + "' is not in the fold plan");
    return it->second;
  }

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

inline nlohmann::ordered_json to_json(const FoldPlan& plan) {
  nlohmann::ordered_json j;
  j["k"] = plan.k;
  nlohmann::ordered_json a = nlohmann::ordered_json::object();
  for (const auto& [id, fold] : plan.assignments) a[id] = fold;
  j["assignments"] = std::move(a);
  return j;
}

template <typename Json>
FoldPlan fold_plan_from_json(const Json& j) {
  FoldPlan plan;
  plan.k = j.at("k").template get<int>();
  for (const auto& [id, fold] : j.at("assignments").items()) {
    const int f = fold.template get<int>();
    if (f < 0 || f >= plan.k) throw Error("fold index out of range for '" + id + "'");
    plan.assignments[id] = f;
  }
  return plan;
}

// Shuffles each class independently, then deals its members round-robin so
// per-class fold sizes differ by at most one. The second class continues the
// deal where the first stopped, which keeps total fold sizes balanced too.
inline FoldPlan stratified_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  if (k < 2) throw Error("stratified_folds: k must be >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].gold_label) {
      throw Error("stratified_folds: document '" + corpus[i].id + "' has no gold label");
    }
    by_class[static_cast<int>(*corpus[i].gold_label)].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < static_cast<std::size_t>(k)) {
      throw Error("stratified_folds: class '" + std::string(to_string(static_cast<Label>(c))) +
                  "' has " + std::to_string(by_class[c].size()) + " members, fewer than k=" +
                  std::to_string(k));
    }
  }
  std::mt19937_64 rng(seed);
  FoldPlan plan;
  plan.k = k;
  std::size_t dealt = 0;
  for (int c = 0; c < 2; ++c) {
    auto members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      plan.assignments[corpus[idx].id] = static_cast<int>(dealt % static_cast<std::size_t>(k));
      ++dealt;
    }
  }
  return plan;
}

inline Corpus fold_members(const Corpus& corpus, const FoldPlan& plan, int fold, bool inside) {
  Corpus out;
  for (const auto& doc : corpus) {
    if ((plan.fold_of(doc.id) == fold) == inside) out.push_back(doc);
  }
  return out;
}

inline Corpus test_split(const Corpus& corpus, const FoldPlan& plan, int fold) {
  return fold_members(corpus, plan, fold, true);
}

inline Corpus train_split(const Corpus& corpus, const FoldPlan& plan, int fold) {
  return fold_members(corpus, plan, fold, false);
}

// ---------------------------------------------------------------------------
// Labeled / unlabeled sampling

struct SampleSpec {
  std::size_t n_labeled = 100;
  std::uint64_t seed = 0;
};

// Gold labels of documents handed to a learner as unlabeled. Only the
// evaluator is expected to call reveal().
class SealedLabels {
 public:
  SealedLabels() = default;

  void seal(const std::string& id, std::optional<Label> label) { labels_[id] = label; }

  std::optional<Label> reveal(const std::string& id) const {
    auto it = labels_.find(id);
    return it == labels_.end() ? std::nullopt : it->second;
  }

  std::size_t size() const { return labels_.size(); }

 private:
  std::unordered_map<std::string, std::optional<Label>> labels_;
};

struct LabeledSample {
  Corpus labeled;
  Corpus unlabeled;  // gold labels and spans stripped
  SealedLabels sealed;
};

inline Document hide_label(Document doc) {
  doc.gold_label.reset();
  doc.positive_human_spans.clear();
  return doc;
}

// Stratified draw of spec.n_labeled gold-labeled documents. Class quotas use
// largest remainders; every present class gets at least one slot when
// n_labeled allows. Documents without a gold label always land in unlabeled.
inline LabeledSample sample_labeled(const Corpus& split, const SampleSpec& spec) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i].gold_label) by_class[static_cast<int>(*split[i].gold_label)].push_back(i);
  }
  const std::size_t n_gold = by_class[0].size() + by_class[1].size();
  if (spec.n_labeled > n_gold) {
    throw Error("sample_labeled: n_labeled=" + std::to_string(spec.n_labeled) +
                " exceeds the " + std::to_string(n_gold) + " labeled documents in the split");
  }

  std::size_t quota[2] = {0, 0};
  if (n_gold > 0) {
    double remainder[2];
    std::size_t assigned = 0;
    for (int c = 0; c < 2; ++c) {
      const double exact = static_cast<double>(spec.n_labeled) *
                           static_cast<double>(by_class[c].size()) / static_cast<double>(n_gold);
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      remainder[c] = exact - static_cast<double>(quota[c]);
      assigned += quota[c];
    }
    while (assigned < spec.n_labeled) {
      const int c = remainder[1] > remainder[0] ? 1 : 0;
      const int pick = quota[c] < by_class[c].size() ? c : 1 - c;
      ++quota[pick];
      remainder[pick] = -1.0;
      ++assigned;
    }
    for (int c = 0; c < 2; ++c) {
      const int other = 1 - c;
      if (quota[c] == 0 && !by_class[c].empty() && quota[other] > 1) {
        ++quota[c];
        --quota[other];
      }
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<bool> chosen(split.size(), false);
  for (int c = 0; c < 2; ++c) {
    auto members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < quota[c]; ++i) chosen[members[i]] = true;
  }

  LabeledSample sample;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (chosen[i]) {
      sample.labeled.push_back(split[i]);
    } else {
      sample.sealed.seal(split[i].id, split[i].gold_label);
      sample.unlabeled.push_back(hide_label(split[i]));
    }
  }
  return sample;
}

}  // namespace codecomp
