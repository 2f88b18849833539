#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "codecomp/common.hpp"

namespace codecomp {

// Lexicon file format: one entry per line, UTF-8, '#' starts a comment.
// Entries must be lowercase and unique.
inline std::vector<std::string> load_lexicon(std::istream& in, const std::string& source) {
  std::vector<std::string> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto entry = std::string(trim(line));
    if (entry.empty()) continue;
    for (char ch : entry) {
      if (ch >= 'A' && ch <= 'Z') {
        throw Error(source + ":" + std::to_string(line_no) + ": entry '" + entry +
                    "' is not lowercase");
      }
    }
    if (!seen.insert(entry).second) {
      throw Error(source + ":" + std::to_string(line_no) + ": duplicate entry '" + entry + "'");
    }
    entries.push_back(entry);
  }
  return entries;
}

inline std::vector<std::string> load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon file '" + path.string() + "'");
  return load_lexicon(in, path.string());
}

struct Lexicons {
  std::unordered_set<std::string> pronouns;
  std::unordered_set<std::string> person_dictionary;
  std::unordered_set<std::string> irregular_past_verbs;
  std::unordered_set<std::string> past_participles;
  std::unordered_set<std::string> common_adjectives;
  std::unordered_set<std::string> ing_exceptions;  // "-ing" words that are not verbs

  static std::unordered_set<std::string> as_set(const std::vector<std::string>& v) {
    return {v.begin(), v.end()};
  }

  // Reads pronouns.txt, persons.txt, irregular_past.txt and participles.txt
  // (required) plus adjectives.txt and ing_exceptions.txt (optional).
  static Lexicons load(const std::filesystem::path& dir) {
    auto required = [&](const char* name) { return as_set(load_lexicon(dir / name)); };
    auto optional = [&](const char* name) -> std::unordered_set<std::string> {
      return std::filesystem::exists(dir / name) ? as_set(load_lexicon(dir / name))
                                                 : std::unordered_set<std::string>{};
    };
    Lexicons lex;
    lex.pronouns = required("pronouns.txt");
    lex.person_dictionary = required("persons.txt");
    lex.irregular_past_verbs = required("irregular_past.txt");
    lex.past_participles = required("participles.txt");
    lex.common_adjectives = optional("adjectives.txt");
    lex.ing_exceptions = optional("ing_exceptions.txt");
    return lex;
  }
};

// CODECOMP_LEXICON_DIR, else the data/lexicons directory of the source tree.
inline std::filesystem::path default_lexicon_dir() {
  if (const char* env = std::getenv("CODECOMP_LEXICON_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
#ifdef CODECOMP_DEFAULT_LEXICON_DIR
  return CODECOMP_DEFAULT_LEXICON_DIR;
#else
  return "data/lexicons";
#endif
}

}  // namespace codecomp
