#pragma once

// Context functions: map one mention occurrence to a fixed-dimension vector.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "codecomp/common.hpp"
#include "codecomp/concepts.hpp"
#include "codecomp/text.hpp"

namespace codecomp {

struct ContextVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  std::span<const double> view() const { return values; }

  friend bool operator==(const ContextVector&, const ContextVector&) = default;
};

inline bool all_finite(const ContextVector& v) {
  return std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); });
}

// Identifies an occurrence: the i-th mention of a key concept set in a document.
struct MentionKey {
  std::string doc_id;
  std::string kcs_name;
  std::size_t occurrence = 0;

  std::string describe() const {
    return "(doc=" + doc_id + ", kcs=" + kcs_name + ", index=" + std::to_string(occurrence) + ")";
  }
};

class ContextProvider {
 public:
  virtual ~ContextProvider() = default;
  virtual std::size_t dim() const = 0;
  // masked_tokens is the document after mask rewriting; range locates the
  // mention inside it.
  virtual ContextVector compute(const MentionKey& key, std::span<const std::string> masked_tokens,
                                TokenRange range) const = 0;
};

inline ContextVector context_of(const ContextProvider& provider, const MentionKey& key,
                                std::span<const std::string> masked_tokens, TokenRange range) {
  if (range.begin >= range.end || range.end > masked_tokens.size()) {
    throw Error("context_of: mention range [" + std::to_string(range.begin) + "," +
                std::to_string(range.end) + ") invalid for " +
                std::to_string(masked_tokens.size()) + " tokens " + key.describe());
  }
  auto v = provider.compute(key, masked_tokens, range);
  if (v.dim() != provider.dim()) {
    throw Error("context_of: provider returned dimension " + std::to_string(v.dim()) +
                ", expected " + std::to_string(provider.dim()));
  }
  if (!all_finite(v)) throw Error("context_of: non-finite value for " + key.describe());
  return v;
}

// ---------------------------------------------------------------------------
// Hashed window

// Counts of the tokens within `window` positions on either side of the
// mention (mention tokens excluded). Left and right neighbours hash into
// different buckets. The count vector is L2-normalized; no context gives zero.
inline ContextVector hashed_window_context(std::span<const std::string> tokens, TokenRange range,
                                           std::size_t window, std::size_t dim) {
  if (window < 1) throw Error("hashed_window_context: window must be >= 1");
  if (dim < 2) throw Error("hashed_window_context: dim must be >= 2");
  ContextVector v{std::vector<double>(dim, 0.0)};
  auto add = [&](std::string_view side, const std::string& tok) {
    const auto h = mix_seed(fnv1a(tok, fnv1a(side)));
    v.values[h % dim] += 1.0;
  };
  const std::size_t lo = range.begin > window ? range.begin - window : 0;
  for (std::size_t i = lo; i < range.begin; ++i) add("L|", tokens[i]);
  const std::size_t hi = std::min(tokens.size(), range.end + window);
  for (std::size_t i = range.end; i < hi; ++i) add("R|", tokens[i]);
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v.values) x /= norm;
  }
  return v;
}

class HashedWindowProvider final : public ContextProvider {
 public:
  HashedWindowProvider(std::size_t window, std::size_t dim) : window_(window), dim_(dim) {
    if (window < 1) throw Error("hashed provider: window must be >= 1");
    if (dim < 2) throw Error("hashed provider: dim must be >= 2");
  }

  std::size_t dim() const override { return dim_; }
  std::size_t window() const { return window_; }

  ContextVector compute(const MentionKey&, std::span<const std::string> masked_tokens,
                        TokenRange range) const override {
    return hashed_window_context(masked_tokens, range, window_, dim_);
  }

 private:
  std::size_t window_;
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// Precomputed vectors
//
// File format:
//   dim N
//   doc_id<TAB>kcs_name<TAB>occurrence_index<TAB>v1 v2 ... vN
// Numbers are parsed with from_chars, independent of the C locale.

class PrecomputedProvider final : public ContextProvider {
 public:
  static PrecomputedProvider load(std::istream& in, const std::string& source = "<vectors>") {
    PrecomputedProvider p;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    auto fail = [&](const std::string& msg) {
      throw Error(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      if (!have_header) {
        auto body = trim(line);
        if (body.substr(0, 4) != "dim ") fail("expected header 'dim N'");
        auto n = parse_int<std::size_t>(trim(body.substr(4)));
        if (!n || *n == 0) fail("invalid dimension in header");
        p.dim_ = *n;
        have_header = true;
        continue;
      }
      std::string_view rest(line);
      std::string_view fields[3];
      for (auto& f : fields) {
        auto tab = rest.find('\t');
        if (tab == std::string_view::npos) fail("expected doc_id, kcs, index and values separated by tabs");
        f = rest.substr(0, tab);
        rest = rest.substr(tab + 1);
      }
      auto occ = parse_int<std::size_t>(fields[2]);
      if (!occ) fail("invalid occurrence index '" + std::string(fields[2]) + "'");
      std::vector<double> values;
      values.reserve(p.dim_);
      std::size_t pos = 0;
      while (pos < rest.size()) {
        while (pos < rest.size() && rest[pos] == ' ') ++pos;
        if (pos >= rest.size()) break;
        auto end = rest.find(' ', pos);
        if (end == std::string_view::npos) end = rest.size();
        auto x = parse_double(rest.substr(pos, end - pos));
        if (!x || !std::isfinite(*x)) {
          fail("invalid number '" + std::string(rest.substr(pos, end - pos)) + "'");
        }
        values.push_back(*x);
        pos = end;
      }
      if (values.size() != p.dim_) {
        fail("record has " + std::to_string(values.size()) + " values, header declares " +
             std::to_string(p.dim_));
      }
      auto key = make_key(fields[0], fields[1], *occ);
      if (!p.vectors_.emplace(std::move(key), ContextVector{std::move(values)}).second) {
        fail("duplicate record for " + MentionKey{std::string(fields[0]), std::string(fields[1]), *occ}.describe());
      }
    }
    if (!have_header) throw Error(source + ": missing 'dim N' header");
    return p;
  }

  static PrecomputedProvider load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vector file '" + path + "'");
    return load(in, path);
  }

  std::size_t dim() const override { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  const ContextVector& lookup(const MentionKey& key) const {
    auto it = vectors_.find(make_key(key.doc_id, key.kcs_name, key.occurrence));
    if (it == vectors_.end()) throw Error("no precomputed vector for " + key.describe());
    return it->second;
  }

  ContextVector compute(const MentionKey& key, std::span<const std::string>,
                        TokenRange) const override {
    return lookup(key);
  }

 private:
  PrecomputedProvider() = default;

  static std::string make_key(std::string_view doc, std::string_view kcs, std::size_t occ) {
    std::string k(doc);
    k += '\t';
    k += kcs;
    k += '\t';
    k += std::to_string(occ);
    return k;
  }

  std::size_t dim_ = 0;
  std::unordered_map<std::string, ContextVector> vectors_;
};

// ---------------------------------------------------------------------------
// Provider construction from configuration

struct ProviderSpec {
  enum class Kind { hashed, precomputed } kind = Kind::hashed;
  std::size_t window = 3;
  std::size_t dim = 256;
  std::string path;  // precomputed only

  friend bool operator==(const ProviderSpec&, const ProviderSpec&) = default;
};

inline std::shared_ptr<const ContextProvider> make_provider(const ProviderSpec& spec) {
  if (spec.kind == ProviderSpec::Kind::hashed) {
    return std::make_shared<HashedWindowProvider>(spec.window, spec.dim);
  }
  return std::make_shared<PrecomputedProvider>(PrecomputedProvider::load(spec.path));
}

// Vectors for every mention of every set in an analyzed document.
inline std::vector<std::vector<ContextVector>> document_contexts(const ContextProvider& provider,
                                                                 const AnalyzedDocument& doc,
                                                                 const TaskPreset& preset) {
  std::vector<std::vector<ContextVector>> out(preset.kcs.size());
  for (std::size_t k = 0; k < preset.kcs.size(); ++k) {
    for (std::size_t i = 0; i < doc.mentions[k].size(); ++i) {
      out[k].push_back(context_of(provider, {doc.doc_id, preset.kcs[k].name, i},
                                  doc.masked_tokens, doc.masked_ranges[k][i]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Contextual-similarity check for a key concept set

enum class DistanceMetric { euclidean, cosine };

inline DistanceMetric parse_distance_metric(std::string_view s) {
  if (s == "euclidean") return DistanceMetric::euclidean;
  if (s == "cosine") return DistanceMetric::cosine;
  throw Error("unknown distance '" + std::string(s) + "' (expected euclidean or cosine)");
}

inline double vector_distance(const ContextVector& a, const ContextVector& b, DistanceMetric metric) {
  if (a.dim() != b.dim()) throw Error("vector_distance: dimension mismatch");
  if (metric == DistanceMetric::euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
      const double d = a.values[i] - b.values[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return (na == nb) ? 0.0 : 1.0;
  return std::max(0.0, 1.0 - dot / (std::sqrt(na) * std::sqrt(nb)));
}

struct GammaReport {
  std::string kcs_name;
  double gamma = 0.0;
  std::size_t sampled_pairs = 0;
  double max_distance = 0.0;
  double quantile95_distance = 0.0;
  bool satisfied = false;
};

// Samples mention pairs (distinct occurrences, uniformly, with replacement)
// and summarizes their context distances. Advisory only.
inline GammaReport validate_kcs_gamma(std::span<const ContextVector> mention_vectors,
                                      const std::string& kcs_name, double gamma,
                                      std::size_t sample_pairs, std::uint64_t seed,
                                      DistanceMetric metric = DistanceMetric::euclidean) {
  if (sample_pairs < 1) throw Error("validate_kcs_gamma: sample_pairs must be >= 1");
  if (mention_vectors.size() < 2) {
    throw Error("validate_kcs_gamma: key concept set '" + kcs_name + "' has " +
                std::to_string(mention_vectors.size()) + " mentions, need at least 2");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> first(0, mention_vectors.size() - 1);
  std::uniform_int_distribution<std::size_t> second(0, mention_vectors.size() - 2);
  std::vector<double> d;
  d.reserve(sample_pairs);
  for (std::size_t p = 0; p < sample_pairs; ++p) {
    const std::size_t i = first(rng);
    std::size_t j = second(rng);
    if (j >= i) ++j;
    d.push_back(vector_distance(mention_vectors[i], mention_vectors[j], metric));
  }
  std::sort(d.begin(), d.end());
  GammaReport r;
  r.kcs_name = kcs_name;
  r.gamma = gamma;
  r.sampled_pairs = sample_pairs;
  r.max_distance = d.back();
  // nearest-rank percentile
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(d.size())));
  r.quantile95_distance = d[std::max<std::size_t>(rank, 1) - 1];
  r.satisfied = r.quantile95_distance <= gamma;
  return r;
}

inline GammaReport validate_kcs_gamma(const ContextProvider& provider,
                                      std::span<const AnalyzedDocument> corpus,
                                      const TaskPreset& preset, std::size_t kcs_index,
                                      double gamma, std::size_t sample_pairs, std::uint64_t seed,
                                      DistanceMetric metric = DistanceMetric::euclidean) {
  const auto& kcs = preset.kcs.at(kcs_index);
  std::vector<ContextVector> vectors;
  for (const auto& doc : corpus) {
    for (std::size_t i = 0; i < doc.mentions[kcs_index].size(); ++i) {
      vectors.push_back(context_of(provider, {doc.doc_id, kcs.name, i}, doc.masked_tokens,
                                   doc.masked_ranges[kcs_index][i]));
    }
  }
  return validate_kcs_gamma(vectors, kcs.name, gamma, sample_pairs, seed, metric);
}

}  // namespace codecomp
