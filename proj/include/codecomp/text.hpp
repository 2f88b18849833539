#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace codecomp {

struct Token {
  std::string text;        // lowercased surface
  std::size_t begin = 0;   // byte range in the source text
  std::size_t end = 0;     // begin == end for tokens the synthesizer inserted
  bool synthetic = false;

  friend bool operator==(const Token&, const Token&) = default;
};

// Half-open token index range.
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool overlaps(const TokenRange& o) const { return begin < o.end && o.begin < end; }

  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

namespace detail {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Non-ASCII bytes are treated as word characters so UTF-8 letters stay intact.
inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline bool is_handle_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

// Lowercases ASCII; keeps "@handle" and word-internal apostrophes ("parkinson's")
// in one token; every other punctuation byte becomes its own token.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  const std::size_t n = text.size();
  std::size_t i = 0;
  auto at = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  while (i < n) {
    const unsigned char c = at(i);
    if (detail::is_space(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (c == '@' && j < n && detail::is_handle_byte(at(j))) {
      while (j < n && detail::is_handle_byte(at(j))) ++j;
    } else if (detail::is_word_byte(c)) {
      while (j < n) {
        if (detail::is_word_byte(at(j))) {
          ++j;
        } else if (at(j) == '\'' && j + 1 < n && detail::is_word_byte(at(j + 1))) {
          j += 2;
        } else {
          break;
        }
      }
    }
    tokens.push_back({detail::ascii_lower(text.substr(i, j - i)), i, j, false});
    i = j;
  }
  return tokens;
}

inline bool is_sentence_terminator(std::string_view tok) {
  return tok == "." || tok == "!" || tok == "?";
}

// Sentences end after a run of ".", "!" or "?" tokens, or at a newline in the
// source text between two tokens.
inline std::vector<TokenRange> split_sentences(std::string_view text,
                                               const std::vector<Token>& tokens) {
  std::vector<TokenRange> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool last = i + 1 == tokens.size();
    bool boundary = last;
    if (!last) {
      const auto& next = tokens[i + 1];
      if (is_sentence_terminator(tokens[i].text) && !is_sentence_terminator(next.text)) {
        boundary = true;
      }
      if (!boundary && tokens[i].end <= next.begin && next.begin <= text.size() &&
          text.substr(tokens[i].end, next.begin - tokens[i].end).find('\n') !=
              std::string_view::npos) {
        boundary = true;
      }
    }
    if (boundary) {
      sentences.push_back({start, i + 1});
      start = i + 1;
    }
  }
  return sentences;
}

inline std::vector<std::string> token_texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

}  // namespace codecomp
