#pragma once

// Task presets in a small plain-text format:
//
//   task = phm-cancer
//   [kcs human]
//   kind = human
//   mask = HUM_TOK
//   [kcs disease]
//   kind = keyword
//   keywords = cancer
//
// "keywords" is comma-separated; "keywords_file" names a lexicon file,
// resolved against the lexicon directory when relative. "mask = none" or an
// absent mask leaves mentions unmasked.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "codecomp/concepts.hpp"
#include "codecomp/lexicon.hpp"

namespace codecomp {

inline TaskPreset parse_preset(std::istream& in, const std::filesystem::path& lexicon_dir,
                               const std::string& source = "<preset>") {
  TaskPreset preset;
  KeyConceptSet* current = nullptr;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail("unterminated section header");
      auto inner = trim(body.substr(1, body.size() - 2));
      if (inner.substr(0, 4) != "kcs " || trim(inner.substr(4)).empty()) {
        fail("expected section header '[kcs NAME]'");
      }
      preset.kcs.push_back({std::string(trim(inner.substr(4))), KcsKind::keyword, {}, {}});
      current = &preset.kcs.back();
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    const auto key = trim(body.substr(0, eq));
    const auto value = std::string(trim(body.substr(eq + 1)));
    if (current == nullptr) {
      if (key == "task") {
        preset.name = value;
      } else {
        fail("unknown top-level key '" + std::string(key) + "'");
      }
      continue;
    }
    if (key == "kind") {
      if (value == "human") {
        current->kind = KcsKind::human;
      } else if (value == "keyword") {
        current->kind = KcsKind::keyword;
      } else {
        fail("kind must be 'human' or 'keyword'");
      }
    } else if (key == "mask") {
      if (value.empty() || value == "none") {
        current->mask_token.reset();
      } else {
        current->mask_token = value;
      }
    } else if (key == "keywords") {
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        auto kw = std::string(trim(item));
        if (!kw.empty()) current->keywords.push_back(detail::ascii_lower(kw));
      }
    } else if (key == "keywords_file") {
      std::filesystem::path p(value);
      if (p.is_relative()) p = lexicon_dir / p;
      for (auto& kw : load_lexicon(p)) current->keywords.push_back(std::move(kw));
    } else {
      fail("unknown key '" + std::string(key) + "'");
    }
  }
  if (preset.name.empty()) throw Error(source + ": preset is missing 'task = NAME'");
  preset.validate();
  return preset;
}

inline TaskPreset parse_preset(const std::string& text, const std::filesystem::path& lexicon_dir,
                               const std::string& source = "<preset>") {
  std::istringstream in(text);
  return parse_preset(in, lexicon_dir, source);
}

inline std::string format_preset(const TaskPreset& preset) {
  std::ostringstream out;
  out << "task = " << preset.name << '\n';
  for (const auto& k : preset.kcs) {
    out << "[kcs " << k.name << "]\n";
    out << "kind = " << to_string(k.kind) << '\n';
    if (!k.keywords.empty()) {
      out << "keywords = ";
      for (std::size_t i = 0; i < k.keywords.size(); ++i) out << (i ? ", " : "") << k.keywords[i];
      out << '\n';
    }
    out << "mask = " << (k.mask_token ? *k.mask_token : std::string("none")) << '\n';
  }
  return out.str();
}

namespace detail {

inline std::string human_plus_keyword(const std::string& task, const std::string& set_name,
                                      const std::string& keyword_line, const char* mask) {
  return "task = " + task +
         "\n[kcs human]\nkind = human\nmask = HUM_TOK\n"
         "[kcs " + set_name + "]\nkind = keyword\n" + keyword_line + "\nmask = " + mask + "\n";
}

inline const std::map<std::string, std::string>& builtin_preset_sources() {
  static const std::map<std::string, std::string> presets = [] {
    std::map<std::string, std::string> m;
    const std::pair<const char*, const char*> diseases[] = {
        {"phm-alzheimer", "alzheimer's"}, {"phm-heart-attack", "heart attack"},
        {"phm-parkinson", "parkinson's"}, {"phm-cancer", "cancer"},
        {"phm-depression", "depression"}, {"phm-stroke", "stroke"},
        {"phm-flu", "flu"},
    };
    for (const auto& [task, kw] : diseases) {
      m[task] = human_plus_keyword(task, "disease", std::string("keywords = ") + kw, "none");
    }
    m["crisis-earthquake"] =
        human_plus_keyword("crisis-earthquake", "crisis", "keywords = earthquake, quake", "none");
    m["adr"] = human_plus_keyword("adr", "drug", "keywords_file = drugs.txt", "DRUG_TOK");
    return m;
  }();
  return presets;
}

}  // namespace detail

inline std::vector<std::string> builtin_preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, src] : detail::builtin_preset_sources()) names.push_back(name);
  return names;
}

// Built-in name, or a path to a preset file.
inline TaskPreset load_preset(const std::string& name_or_path,
                              const std::filesystem::path& lexicon_dir) {
  const auto& builtins = detail::builtin_preset_sources();
  if (auto it = builtins.find(name_or_path); it != builtins.end()) {
    return parse_preset(it->second, lexicon_dir, name_or_path);
  }
  if (std::filesystem::is_regular_file(name_or_path)) {
    std::ifstream in(name_or_path);
    return parse_preset(in, lexicon_dir, name_or_path);
  }
  std::string known;
  for (const auto& n : builtin_preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error("unknown task '" + name_or_path + "' (known presets: " + known +
              "; or pass a preset file path)");
}

}  // namespace codecomp
