#pragma once

// Key Concept Sets and everything that turns a raw document into per-concept
// bags of mention instances: human-mention rules, the sentence-initial mention
// synthesizer, keyword search, mask rewriting and instance auto-labeling.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codecomp/common.hpp"
#include "codecomp/corpus.hpp"
#include "codecomp/lexicon.hpp"
#include "codecomp/text.hpp"

namespace codecomp {

enum class KcsKind { human, keyword };

inline std::string_view to_string(KcsKind kind) {
  return kind == KcsKind::human ? "human" : "keyword";
}

struct KeyConceptSet {
  std::string name;
  KcsKind kind = KcsKind::keyword;
  std::vector<std::string> keywords;  // lowercase; empty for human sets
  std::optional<std::string> mask_token;

  void validate() const {
    if (name.empty()) throw Error("key concept set needs a name");
    if (kind == KcsKind::keyword && keywords.empty()) {
      throw Error("keyword key concept set '" + name + "' has no keywords");
    }
    for (const auto& k : keywords) {
      if (detail::ascii_lower(k) != k) {
        throw Error("keyword '" + k + "' in set '" + name + "' is not lowercase");
      }
    }
  }

  friend bool operator==(const KeyConceptSet&, const KeyConceptSet&) = default;
};

struct Mention {
  std::string doc_id;
  std::string kcs_name;
  TokenRange range;
  std::string surface;
  bool synthetic = false;

  friend bool operator==(const Mention&, const Mention&) = default;
};

enum class InstanceLabel { negative, positive, unlabeled };

inline std::string_view to_string(InstanceLabel label) {
  switch (label) {
    case InstanceLabel::negative: return "negative";
    case InstanceLabel::positive: return "positive";
    default: return "unlabeled";
  }
}

inline InstanceLabel parse_instance_label(std::string_view s) {
  if (s == "positive") return InstanceLabel::positive;
  if (s == "negative") return InstanceLabel::negative;
  if (s == "unlabeled") return InstanceLabel::unlabeled;
  throw Error("unknown instance label '" + std::string(s) + "'");
}

struct Instance {
  Mention mention;
  InstanceLabel label = InstanceLabel::unlabeled;
};

struct Bag {
  std::string doc_id;
  std::string kcs_name;
  std::vector<Instance> instances;
};

namespace detail {

inline std::string join_surface(std::span<const Token> tokens, TokenRange r) {
  std::string s;
  for (std::size_t i = r.begin; i < r.end; ++i) {
    if (i > r.begin) s += ' ';
    s += tokens[i].text;
  }
  return s;
}

inline Mention make_mention(std::span<const Token> tokens, TokenRange r, std::string_view doc_id,
                            std::string_view kcs_name) {
  bool synthetic = false;
  for (std::size_t i = r.begin; i < r.end; ++i) synthetic = synthetic || tokens[i].synthetic;
  return {std::string(doc_id), std::string(kcs_name), r, join_surface(tokens, r), synthetic};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Human mentions

// Detector seam: anything that can point at human references in a token list.
class HumanMentionDetector {
 public:
  virtual ~HumanMentionDetector() = default;
  virtual std::vector<TokenRange> detect(std::span<const Token> tokens) const = 0;
};

// Pronouns (never "it"), @-handles and person-dictionary hits.
class RuleBasedHumanDetector final : public HumanMentionDetector {
 public:
  explicit RuleBasedHumanDetector(const Lexicons& lexicons) : lex_(&lexicons) {}

  bool is_human_token(std::string_view tok) const {
    if (tok == "it") return false;
    if (tok.size() > 1 && tok.front() == '@') return true;
    const std::string key(tok);
    return lex_->pronouns.contains(key) || lex_->person_dictionary.contains(key);
  }

  std::vector<TokenRange> detect(std::span<const Token> tokens) const override {
    std::vector<TokenRange> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (is_human_token(tokens[i].text)) out.push_back({i, i + 1});
    }
    return out;
  }

 private:
  const Lexicons* lex_;
};

inline std::vector<Mention> extract_human_mentions(std::span<const Token> tokens,
                                                   const HumanMentionDetector& detector,
                                                   std::string_view doc_id = {},
                                                   std::string_view kcs_name = "human") {
  std::vector<Mention> mentions;
  for (const auto& r : detector.detect(tokens)) {
    mentions.push_back(detail::make_mention(tokens, r, doc_id, kcs_name));
  }
  return mentions;
}

inline std::vector<Mention> extract_human_mentions(std::span<const Token> tokens,
                                                   const Lexicons& lexicons,
                                                   std::string_view doc_id = {},
                                                   std::string_view kcs_name = "human") {
  return extract_human_mentions(tokens, RuleBasedHumanDetector(lexicons), doc_id, kcs_name);
}

// ---------------------------------------------------------------------------
// Mention synthesizer

enum class SynthesisRule {
  none,
  past_tense,          // "went home"        -> "i went home"
  adjective,           // "sick again"       -> "i am sick again"
  past_participle,     // "diagnosed with"   -> "i have diagnosed with"
  present_continuous,  // "feeling awful"    -> "i am feeling awful"
  is_replacement,      // "is feeling sick"  -> "i am feeling sick"
};

// Word-form guess for the first token of a sentence. Lexicon membership wins
// over suffix heuristics, so "tired" is an adjective and "diagnosed" a participle.
inline SynthesisRule classify_sentence_opener(std::string_view word, const Lexicons& lex) {
  const std::string w(word);
  if (w == "is") return SynthesisRule::is_replacement;
  if (lex.common_adjectives.contains(w)) return SynthesisRule::adjective;
  if (lex.past_participles.contains(w)) return SynthesisRule::past_participle;
  if (lex.irregular_past_verbs.contains(w)) return SynthesisRule::past_tense;
  auto ends_with = [&](std::string_view suffix) {
    return w.size() > suffix.size() + 1 &&
           std::string_view(w).substr(w.size() - suffix.size()) == suffix;
  };
  if (ends_with("ed") && !w.ends_with("eed")) return SynthesisRule::past_tense;
  if (ends_with("ing") && !lex.ing_exceptions.contains(w)) {
    return SynthesisRule::present_continuous;
  }
  return SynthesisRule::none;
}

struct SynthesisResult {
  std::vector<Token> tokens;
  std::optional<Mention> mention;  // covers the inserted "i"
  SynthesisRule rule = SynthesisRule::none;
};

inline SynthesisResult synthesize_human_mention(std::span<const Token> sentence,
                                                const Lexicons& lex, std::string_view doc_id = {},
                                                std::string_view kcs_name = "human") {
  SynthesisResult result;
  result.tokens.assign(sentence.begin(), sentence.end());
  if (sentence.empty()) return result;
  const auto& first = sentence.front();
  result.rule = classify_sentence_opener(first.text, lex);

  auto inserted = [&](std::string text) {
    return Token{std::move(text), first.begin, first.begin, true};
  };
  std::vector<Token> prefix;
  switch (result.rule) {
    case SynthesisRule::none:
      return result;
    case SynthesisRule::past_tense:
      prefix = {inserted("i")};
      break;
    case SynthesisRule::past_participle:
      prefix = {inserted("i"), inserted("have")};
      break;
    case SynthesisRule::adjective:
    case SynthesisRule::present_continuous:
      prefix = {inserted("i"), inserted("am")};
      break;
    case SynthesisRule::is_replacement:
      // "am" takes over the byte range of the replaced "is".
      prefix = {inserted("i"), Token{"am", first.begin, first.end, true}};
      result.tokens.erase(result.tokens.begin());
      break;
  }
  result.tokens.insert(result.tokens.begin(), prefix.begin(), prefix.end());
  result.mention = detail::make_mention(result.tokens, {0, 1}, doc_id, kcs_name);
  return result;
}

inline SynthesisResult synthesize_human_mention(std::span<const std::string> words,
                                                const Lexicons& lex) {
  std::vector<Token> tokens;
  for (const auto& w : words) tokens.push_back({w, 0, 0, false});
  return synthesize_human_mention(tokens, lex);
}

// ---------------------------------------------------------------------------
// Keyword mentions

// Exact token-sequence matches, case-insensitive. Scans left to right, prefers
// the longest keyword at a position and never reports overlapping matches.
inline std::vector<Mention> extract_keyword_mentions(std::span<const Token> tokens,
                                                     const KeyConceptSet& kcs,
                                                     std::string_view doc_id = {}) {
  if (kcs.kind != KcsKind::keyword) {
    throw Error("extract_keyword_mentions: set '" + kcs.name + "' is not a keyword set");
  }
  std::vector<std::vector<std::string>> patterns;
  for (const auto& kw : kcs.keywords) {
    auto pat = token_texts(tokenize(kw));
    if (!pat.empty()) patterns.push_back(std::move(pat));
  }
  std::sort(patterns.begin(), patterns.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });

  std::vector<Mention> mentions;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    for (const auto& pat : patterns) {
      if (i + pat.size() > tokens.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < pat.size() && ok; ++k) ok = tokens[i + k].text == pat[k];
      if (ok) {
        matched = pat.size();
        break;
      }
    }
    if (matched > 0) {
      mentions.push_back(detail::make_mention(tokens, {i, i + matched}, doc_id, kcs.name));
      i += matched;
    } else {
      ++i;
    }
  }
  return mentions;
}

// ---------------------------------------------------------------------------
// Masking

// Replaces each mention's token range by the set's single mask token.
inline std::vector<std::string> mask(std::span<const std::string> tokens,
                                     std::span<const Mention> mentions, const KeyConceptSet& kcs) {
  if (mentions.empty()) return {tokens.begin(), tokens.end()};
  if (!kcs.mask_token) throw Error("mask: set '" + kcs.name + "' has no mask token");
  std::vector<TokenRange> ranges;
  for (const auto& m : mentions) {
    if (m.range.begin >= m.range.end || m.range.end > tokens.size()) {
      throw Error("mask: mention range outside token list");
    }
    ranges.push_back(m.range);
  }
  std::sort(ranges.begin(), ranges.end(),
            [](const TokenRange& a, const TokenRange& b) { return a.begin < b.begin; });
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i - 1].overlaps(ranges[i])) throw Error("mask: overlapping mentions");
  }
  std::vector<std::string> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < tokens.size();) {
    if (next < ranges.size() && ranges[next].begin == i) {
      out.push_back(*kcs.mask_token);
      i = ranges[next].end;
      ++next;
    } else {
      out.push_back(tokens[i]);
      ++i;
    }
  }
  return out;
}

inline std::vector<std::string> mask(std::span<const Token> tokens,
                                     std::span<const Mention> mentions, const KeyConceptSet& kcs) {
  const auto texts = token_texts({tokens.begin(), tokens.end()});
  return mask(std::span<const std::string>(texts), mentions, kcs);
}

// ---------------------------------------------------------------------------
// Task presets

struct TaskPreset {
  std::string name;
  std::vector<KeyConceptSet> kcs;

  std::optional<std::size_t> index_of(std::string_view kcs_name) const {
    for (std::size_t i = 0; i < kcs.size(); ++i) {
      if (kcs[i].name == kcs_name) return i;
    }
    return std::nullopt;
  }

  bool has_human_set() const {
    return std::any_of(kcs.begin(), kcs.end(),
                       [](const KeyConceptSet& k) { return k.kind == KcsKind::human; });
  }

  void validate() const {
    if (kcs.empty()) throw Error("task preset '" + name + "' declares no key concept sets");
    for (std::size_t i = 0; i < kcs.size(); ++i) {
      kcs[i].validate();
      for (std::size_t j = 0; j < i; ++j) {
        if (kcs[j].name == kcs[i].name) {
          throw Error("task preset '" + name + "': duplicate key concept set '" + kcs[i].name + "'");
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Document analysis

// Label-independent view of a document under a preset: tokens after mention
// synthesis, mentions per key concept set, and the masked token sequence with
// every mention re-indexed into it.
struct AnalyzedDocument {
  std::string doc_id;
  std::vector<Token> tokens;
  std::vector<std::vector<Mention>> mentions;        // parallel to preset.kcs
  std::vector<std::string> masked_tokens;
  std::vector<std::vector<TokenRange>> masked_ranges;  // parallel to mentions
};

// Byte range a mention covers in the source text (empty for synthetic "i").
inline CharSpan mention_char_span(const std::vector<Token>& tokens, const Mention& m) {
  return {tokens[m.range.begin].begin, tokens[m.range.end - 1].end};
}

namespace detail {

// Rewrites all masked sets at once so that every mention, masked or not, can
// be located in the shortened sequence. On cross-set overlap the earlier set wins.
inline void apply_masks(AnalyzedDocument& doc, const TaskPreset& preset) {
  const std::size_t n = doc.tokens.size();
  std::vector<int> owner(n, -1);
  std::vector<std::size_t> run_end(n, 0);
  for (std::size_t k = 0; k < preset.kcs.size(); ++k) {
    if (!preset.kcs[k].mask_token) continue;
    for (const auto& m : doc.mentions[k]) {
      bool free = true;
      for (std::size_t i = m.range.begin; i < m.range.end; ++i) free = free && owner[i] < 0;
      if (!free) continue;
      for (std::size_t i = m.range.begin; i < m.range.end; ++i) owner[i] = static_cast<int>(k);
      run_end[m.range.begin] = m.range.end;
    }
  }
  std::vector<std::size_t> new_index(n + 1, 0);
  doc.masked_tokens.clear();
  for (std::size_t i = 0; i < n;) {
    if (owner[i] >= 0 && run_end[i] > i) {
      const std::size_t end = run_end[i];
      for (std::size_t j = i; j < end; ++j) new_index[j] = doc.masked_tokens.size();
      doc.masked_tokens.push_back(*preset.kcs[static_cast<std::size_t>(owner[i])].mask_token);
      i = end;
    } else {
      new_index[i] = doc.masked_tokens.size();
      doc.masked_tokens.push_back(doc.tokens[i].text);
      ++i;
    }
  }
  new_index[n] = doc.masked_tokens.size();
  doc.masked_ranges.assign(doc.mentions.size(), {});
  for (std::size_t k = 0; k < doc.mentions.size(); ++k) {
    for (const auto& m : doc.mentions[k]) {
      const std::size_t b = new_index[m.range.begin];
      const std::size_t e = new_index[m.range.end - 1] + 1;
      doc.masked_ranges[k].push_back({b, e});
    }
  }
}

}  // namespace detail

// Tokenize, synthesize implicit first-person mentions in sentences that do not
// already open with a human mention, extract mentions for every set, mask.
inline AnalyzedDocument analyze_document(const Document& doc, const TaskPreset& preset,
                                         const Lexicons& lex) {
  AnalyzedDocument out;
  out.doc_id = doc.id;
  const RuleBasedHumanDetector detector(lex);
  auto raw = tokenize(doc.text);
  if (preset.has_human_set()) {
    for (const auto& sentence : split_sentences(doc.text, raw)) {
      std::span<const Token> s(raw.data() + sentence.begin, sentence.size());
      if (!s.empty() && detector.is_human_token(s.front().text)) {
        out.tokens.insert(out.tokens.end(), s.begin(), s.end());
        continue;
      }
      auto synth = synthesize_human_mention(s, lex);
      out.tokens.insert(out.tokens.end(), synth.tokens.begin(), synth.tokens.end());
    }
  } else {
    out.tokens = std::move(raw);
  }
  for (const auto& kcs : preset.kcs) {
    if (kcs.kind == KcsKind::human) {
      out.mentions.push_back(extract_human_mentions(out.tokens, detector, doc.id, kcs.name));
    } else {
      out.mentions.push_back(extract_keyword_mentions(out.tokens, kcs, doc.id));
    }
  }
  detail::apply_masks(out, preset);
  return out;
}

// ---------------------------------------------------------------------------
// Bags and the auto-labeling policy

inline bool span_covers(const CharSpan& span, const CharSpan& mention) {
  if (mention.begin == mention.end) return span.begin == span.end && span.begin == mention.begin;
  return span.begin < mention.end && mention.begin < span.end;
}

// Labeled negatives: every instance negative. Labeled positives: keyword
// instances positive; human instances positive iff an annotated span covers
// them. A positive without annotation leaves its human instances unlabeled.
inline InstanceLabel auto_label(KcsKind kind, std::optional<Label> gold, bool has_annotation,
                                bool covered) {
  if (!gold) return InstanceLabel::unlabeled;
  if (*gold == Label::negative) return InstanceLabel::negative;
  if (kind == KcsKind::keyword) return InstanceLabel::positive;
  if (!has_annotation) return InstanceLabel::unlabeled;
  return covered ? InstanceLabel::positive : InstanceLabel::negative;
}

struct BagSet {
  std::vector<Bag> bags;  // parallel to preset.kcs
  std::vector<std::string> warnings;
};

inline BagSet build_bags(const Document& doc, const AnalyzedDocument& analysis,
                         const TaskPreset& preset) {
  BagSet out;
  const bool annotated = !doc.positive_human_spans.empty();
  for (std::size_t k = 0; k < preset.kcs.size(); ++k) {
    const auto& kcs = preset.kcs[k];
    Bag bag{doc.id, kcs.name, {}};
    for (const auto& m : analysis.mentions[k]) {
      bool covered = false;
      if (kcs.kind == KcsKind::human && annotated) {
        const auto ms = mention_char_span(analysis.tokens, m);
        for (const auto& s : doc.positive_human_spans) covered = covered || span_covers(s, ms);
      }
      bag.instances.push_back({m, auto_label(kcs.kind, doc.gold_label, annotated, covered)});
    }
    if (kcs.kind == KcsKind::human && doc.gold_label == Label::positive && !annotated &&
        !bag.instances.empty()) {
      out.warnings.push_back("document '" + doc.id +
                             "' is positive but has no annotated human mention; human instances "
                             "left unlabeled");
    }
    out.bags.push_back(std::move(bag));
  }
  return out;
}

inline BagSet build_bags(const Document& doc, const TaskPreset& preset, const Lexicons& lex) {
  return build_bags(doc, analyze_document(doc, preset, lex), preset);
}

}  // namespace codecomp
