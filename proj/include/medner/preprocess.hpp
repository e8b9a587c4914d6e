#pragma once

#include <string>
#include <vector>

#include "medner/corpus.hpp"

namespace medner {

inline const std::string kNumToken = "<num>";

// Per line, the token indices that start a sentence. Boundaries fall after a
// token ending in '.' when the next token starts with an uppercase letter;
// line ends always close a sentence.
struct SentenceMap {
  std::vector<std::vector<int>> starts;  // per line, ascending, first is 0

  int sentence_index(int line, int tok) const {
    const auto& s = starts[static_cast<std::size_t>(line)];
    int idx = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] <= tok) idx = static_cast<int>(i);
    return idx;
  }

  // [begin, end) token range of the sentence containing tok
  std::pair<int, int> sentence_range(int line, int tok, int line_len) const {
    const auto& s = starts[static_cast<std::size_t>(line)];
    int idx = sentence_index(line, tok);
    int begin = s[static_cast<std::size_t>(idx)];
    int end = idx + 1 < static_cast<int>(s.size()) ? s[static_cast<std::size_t>(idx) + 1] : line_len;
    return {begin, end};
  }
};

inline bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ascii_upper(char c) { return c >= 'A' && c <= 'Z'; }

// Expects raw (not yet lowercased) tokens; the capital-letter test needs case.
inline SentenceMap split_sentences(const AnnotatedDocument& doc) {
  SentenceMap map;
  map.starts.resize(doc.lines.size());
  for (std::size_t li = 0; li < doc.lines.size(); ++li) {
    const auto& line = doc.lines[li];
    auto& starts = map.starts[li];
    if (line.empty()) continue;
    starts.push_back(0);
    for (std::size_t t = 0; t + 1 < line.size(); ++t) {
      const std::string& cur = line[t];
      const std::string& nxt = line[t + 1];
      if (!cur.empty() && cur.back() == '.' && !nxt.empty() && is_ascii_upper(nxt.front()))
        starts.push_back(static_cast<int>(t) + 1);
    }
  }
  return map;
}

namespace detail {

inline std::string strip_edge_punct(const std::string& t) {
  auto is_edge = [](char c) { return c == '.' || c == ':' || c == ';'; };
  std::size_t b = 0, e = t.size();
  while (b < e && is_edge(t[b])) ++b;
  while (e > b && is_edge(t[e - 1])) --e;
  return t.substr(b, e - b);
}

// optional sign, digits, optionally one of . / : followed by digits
inline bool is_numeric_token(const std::string& t) {
  std::size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < t.size() && is_ascii_digit(t[i])) ++i, ++digits;
  if (digits == 0) return false;
  if (i == t.size()) return true;
  if (t[i] != '.' && t[i] != '/' && t[i] != ':') return false;
  ++i;
  digits = 0;
  while (i < t.size() && is_ascii_digit(t[i])) ++i, ++digits;
  return digits > 0 && i == t.size();
}

// Removes '.', ':', ';' unless letter-surrounded or directly after a digit;
// the test uses the character's original neighbours within the token.
inline std::string remove_punct(const std::string& t) {
  std::string out;
  out.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    char c = t[i];
    if (c == '.' || c == ':' || c == ';') {
      const bool surrounded = i > 0 && i + 1 < t.size() && is_ascii_alpha(t[i - 1]) &&
                              is_ascii_alpha(t[i + 1]);
      const bool after_number = i > 0 && is_ascii_digit(t[i - 1]);
      if (!surrounded && !after_number) continue;
    }
    out += c;
  }
  return out;
}

}  // namespace detail

// Rules applied per token to a fixed point: numeric tokens become <num>,
// then punctuation removal, then lowercasing. Token count and positions are
// never altered.
inline std::string normalize_token(std::string t) {
  for (int iter = 0; iter < 8; ++iter) {
    if (detail::is_numeric_token(detail::strip_edge_punct(t))) return kNumToken;
    std::string removed = detail::remove_punct(t);
    if (removed == t) break;
    t = std::move(removed);
  }
  return to_lower_ascii(t);
}

inline AnnotatedDocument normalize_tokens(const AnnotatedDocument& doc) {
  AnnotatedDocument out = doc;
  for (auto& line : out.lines)
    for (auto& tok : line) tok = normalize_token(std::move(tok));
  // refresh annotation surfaces so they keep matching the addressed tokens
  for (auto& e : out.entries) {
    e.medication.surface = join(out.annotation_tokens(e.medication), " ");
    for (auto& a : e.related) a.surface = join(out.annotation_tokens(a), " ");
  }
  return out;
}

// Type-level count of document tokens missing from the vocabulary.
template <class Vocab>
long oov_count(const std::vector<AnnotatedDocument>& docs, const Vocab& vocab) {
  return count_oov_types(docs, [&](const std::string& t) { return vocab.contains(t); });
}

}  // namespace medner
