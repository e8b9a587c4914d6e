#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "medner/common.hpp"
#include "medner/rng.hpp"

namespace medner {

// Field codes: 1 medication, 2 dosage, 3 mode, 4 frequency, 5 duration,
// 6 reason, 0 none.
enum class FieldLabel : int {
  None = 0,
  Medication = 1,
  Dosage = 2,
  Mode = 3,
  Frequency = 4,
  Duration = 5,
  Reason = 6,
};

inline constexpr int kNumFields = 6;  // non-None labels

inline const std::vector<FieldLabel>& all_fields() {
  static const std::vector<FieldLabel> fields = {FieldLabel::Medication, FieldLabel::Dosage,
                                                 FieldLabel::Mode,       FieldLabel::Frequency,
                                                 FieldLabel::Duration,   FieldLabel::Reason};
  return fields;
}

inline int field_code(FieldLabel f) { return static_cast<int>(f); }

inline FieldLabel field_from_code(int code) {
  if (code < 0 || code > kNumFields) throw MalformedAnnotation("bad field code " + std::to_string(code));
  return static_cast<FieldLabel>(code);
}

inline const char* field_name(FieldLabel f) {
  switch (f) {
    case FieldLabel::None: return "none";
    case FieldLabel::Medication: return "medication";
    case FieldLabel::Dosage: return "dosage";
    case FieldLabel::Mode: return "mode";
    case FieldLabel::Frequency: return "frequency";
    case FieldLabel::Duration: return "duration";
    case FieldLabel::Reason: return "reason";
  }
  return "?";
}

inline const char* field_key(FieldLabel f) {
  switch (f) {
    case FieldLabel::Medication: return "m";
    case FieldLabel::Dosage: return "do";
    case FieldLabel::Mode: return "mo";
    case FieldLabel::Frequency: return "f";
    case FieldLabel::Duration: return "du";
    case FieldLabel::Reason: return "r";
    default: throw MalformedAnnotation("field has no key");
  }
}

inline std::optional<FieldLabel> field_from_key(std::string_view key) {
  if (key == "m") return FieldLabel::Medication;
  if (key == "do") return FieldLabel::Dosage;
  if (key == "mo") return FieldLabel::Mode;
  if (key == "f") return FieldLabel::Frequency;
  if (key == "du") return FieldLabel::Duration;
  if (key == "r") return FieldLabel::Reason;
  return std::nullopt;
}

// 1-based line, 0-based inclusive token offsets within the line.
struct TokenSpan {
  int line = 1;
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  auto operator<=>(const TokenSpan&) const = default;
};

struct Annotation {
  FieldLabel label = FieldLabel::None;
  std::vector<TokenSpan> spans;
  std::string surface;

  int token_count() const {
    int n = 0;
    for (const auto& s : spans) n += s.length();
    return n;
  }
  bool operator==(const Annotation&) const = default;
};

struct Entry {
  Annotation medication;
  std::vector<Annotation> related;

  bool has_field(FieldLabel f) const {
    if (f == FieldLabel::Medication) return true;
    for (const auto& a : related)
      if (a.label == f) return true;
    return false;
  }
  bool operator==(const Entry&) const = default;
};

struct AnnotatedDocument {
  std::string doc_id;
  std::vector<std::vector<std::string>> lines;  // tokens per line
  std::vector<Entry> entries;
  std::optional<int> source_year;

  std::size_t total_tokens() const {
    std::size_t n = 0;
    for (const auto& l : lines) n += l.size();
    return n;
  }

  const std::string& token_at(const TokenSpan& s, int offset) const {
    return lines[static_cast<std::size_t>(s.line - 1)][static_cast<std::size_t>(s.start + offset)];
  }

  std::vector<std::string> span_tokens(const TokenSpan& s) const {
    std::vector<std::string> out;
    for (int t = s.start; t <= s.end; ++t)
      out.push_back(lines[static_cast<std::size_t>(s.line - 1)][static_cast<std::size_t>(t)]);
    return out;
  }

  std::vector<std::string> annotation_tokens(const Annotation& a) const {
    std::vector<std::string> out;
    for (const auto& s : a.spans) {
      auto st = span_tokens(s);
      out.insert(out.end(), st.begin(), st.end());
    }
    return out;
  }

  bool span_in_bounds(const TokenSpan& s) const {
    if (s.line < 1 || s.line > static_cast<int>(lines.size())) return false;
    if (s.start < 0 || s.start > s.end) return false;
    return s.end < static_cast<int>(lines[static_cast<std::size_t>(s.line - 1)].size());
  }

  bool operator==(const AnnotatedDocument& o) const {
    return doc_id == o.doc_id && lines == o.lines && entries == o.entries &&
           source_year == o.source_year;
  }
};

// ---- document / annotation file formats -----------------------------------

inline std::string serialize_doc_text(const AnnotatedDocument& doc) {
  std::string out;
  for (const auto& line : doc.lines) {
    out += join(line, " ");
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::optional<TokenSpan> parse_span_pair(const std::string& a, const std::string& b) {
  auto parse_atom = [](const std::string& s, int& line, int& tok) -> bool {
    auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= s.size()) return false;
    try {
      std::size_t used = 0;
      line = std::stoi(s.substr(0, colon), &used);
      if (used != colon) return false;
      tok = std::stoi(s.substr(colon + 1), &used);
      if (used != s.size() - colon - 1) return false;
    } catch (const std::exception&) {
      return false;
    }
    return true;
  };
  int l1, t1, l2, t2;
  if (!parse_atom(a, l1, t1) || !parse_atom(b, l2, t2)) return std::nullopt;
  if (l1 != l2 || t1 > t2 || l1 < 1 || t1 < 0) return std::nullopt;
  return TokenSpan{l1, t1, t2};
}

}  // namespace detail

// Parses one document plus its annotation file. Grammar: one entry per line,
// fields joined by "||", each field `key="surface" line:start line:end ...`
// or `key="nm"`; keys m, do, mo, f, du, r; offsets 1-based line / 0-based
// token, end inclusive.
inline AnnotatedDocument parse_i2b2(const std::string& doc_text, const std::string& ann_text,
                                    const std::string& doc_id = "",
                                    std::optional<int> source_year = std::nullopt) {
  if (doc_text.empty()) throw MalformedAnnotation("empty document text");
  AnnotatedDocument doc;
  doc.doc_id = doc_id;
  doc.source_year = source_year;
  for (const auto& line : split_lines(doc_text)) doc.lines.push_back(split_whitespace(line));

  int lineno = 0;
  for (const auto& raw : split_lines(ann_text)) {
    ++lineno;
    if (raw.empty() || raw.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = " (annotation line " + std::to_string(lineno) + ")";
    Entry entry;
    bool have_medication = false;

    // split on "||"
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      std::size_t next = raw.find("||", pos);
      if (next == std::string::npos) {
        fields.push_back(raw.substr(pos));
        break;
      }
      fields.push_back(raw.substr(pos, next - pos));
      pos = next + 2;
    }

    for (const auto& field : fields) {
      auto eq = field.find('=');
      if (eq == std::string::npos) throw MalformedAnnotation("missing '='" + where);
      std::string key = field.substr(0, eq);
      // trim surrounding blanks on the key
      while (!key.empty() && key.front() == ' ') key.erase(key.begin());
      while (!key.empty() && key.back() == ' ') key.pop_back();
      auto label = field_from_key(key);
      if (!label) throw MalformedAnnotation("unknown key '" + key + "'" + where);
      if (eq + 1 >= field.size() || field[eq + 1] != '"')
        throw MalformedAnnotation("missing opening quote" + where);
      auto closing = field.find('"', eq + 2);
      if (closing == std::string::npos)
        throw MalformedAnnotation("missing closing quote" + where);
      std::string surface = field.substr(eq + 2, closing - eq - 2);
      auto rest = split_whitespace(field.substr(closing + 1));
      if (rest.empty()) {
        if (surface != "nm")
          throw MalformedAnnotation("annotation '" + surface + "' without offsets" + where);
        continue;  // field not mentioned
      }
      if (rest.size() % 2 != 0)
        throw MalformedAnnotation("odd number of span atoms" + where);
      Annotation ann;
      ann.label = *label;
      ann.surface = surface;
      for (std::size_t i = 0; i + 1 < rest.size(); i += 2) {
        auto span = detail::parse_span_pair(rest[i], rest[i + 1]);
        if (!span) throw MalformedAnnotation("bad span '" + rest[i] + " " + rest[i + 1] + "'" + where);
        if (!doc.span_in_bounds(*span))
          throw SpanOutOfBounds("span " + rest[i] + " " + rest[i + 1] + " outside document" + where);
        ann.spans.push_back(*span);
      }
      if (*label == FieldLabel::Medication) {
        if (have_medication)
          throw MalformedAnnotation("multiple medication annotations in one entry" + where);
        entry.medication = std::move(ann);
        have_medication = true;
      } else {
        entry.related.push_back(std::move(ann));
      }
    }
    if (!have_medication)
      throw MalformedAnnotation("entry without medication annotation" + where);
    doc.entries.push_back(std::move(entry));
  }
  return doc;
}

inline std::string serialize_annotation(const Annotation& a) {
  std::string out = std::string(field_key(a.label)) + "=\"" + a.surface + "\"";
  for (const auto& s : a.spans) {
    out += " " + std::to_string(s.line) + ":" + std::to_string(s.start);
    out += " " + std::to_string(s.line) + ":" + std::to_string(s.end);
  }
  return out;
}

inline std::string serialize_ann_text(const AnnotatedDocument& doc) {
  std::string out;
  for (const auto& e : doc.entries) {
    std::string line = serialize_annotation(e.medication);
    for (const auto& a : e.related) line += "||" + serialize_annotation(a);
    for (FieldLabel f : all_fields()) {
      if (f == FieldLabel::Medication) continue;
      if (!e.has_field(f)) line += "||" + std::string(field_key(f)) + "=\"nm\"";
    }
    out += line;
    out += '\n';
  }
  return out;
}

// ---- pooling and splits -----------------------------------------------------

struct CorpusPool {
  std::vector<AnnotatedDocument> unannotated;
  std::vector<AnnotatedDocument> annotated;
  std::unordered_set<std::uint64_t> content_hashes;

  struct YearCounts {
    int year = 0;
    int total = 0;
    int unique_unannotated = 0;
    int unique_annotated = 0;
  };
  std::vector<YearCounts> per_year;

  std::size_t size() const { return unannotated.size() + annotated.size(); }

  // regroup by source year, preserving pool order (for idempotence checks)
  std::vector<std::pair<int, std::vector<AnnotatedDocument>>> as_corpora() const {
    std::map<int, std::vector<AnnotatedDocument>> by_year;
    for (const auto& d : unannotated) by_year[d.source_year.value_or(0)].push_back(d);
    for (const auto& d : annotated) by_year[d.source_year.value_or(0)].push_back(d);
    return {by_year.begin(), by_year.end()};
  }
};

// Hash of whitespace-normalized, lowercased raw text.
inline std::uint64_t content_hash(const AnnotatedDocument& doc) {
  std::string norm;
  for (const auto& line : doc.lines) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) norm += ' ';
      norm += to_lower_ascii(line[i]);
    }
    norm += '\n';
  }
  return fnv1a(norm);
}

// Sequentially pools corpora (ordered by year ascending); the first
// occurrence of each content hash wins.
inline CorpusPool dedup_pool(const std::vector<std::pair<int, std::vector<AnnotatedDocument>>>& corpora) {
  CorpusPool pool;
  for (const auto& [year, docs] : corpora) {
    CorpusPool::YearCounts counts;
    counts.year = year;
    counts.total = static_cast<int>(docs.size());
    for (const auto& doc : docs) {
      const std::uint64_t h = content_hash(doc);
      if (pool.content_hashes.count(h)) continue;
      pool.content_hashes.insert(h);
      if (doc.entries.empty()) {
        pool.unannotated.push_back(doc);
        ++counts.unique_unannotated;
      } else {
        pool.annotated.push_back(doc);
        ++counts.unique_annotated;
      }
    }
    pool.per_year.push_back(counts);
  }
  return pool;
}

struct SplitSizes {
  int model_train = 238;
  int validation = 10;
  int test = 10;
};

struct Split {
  std::vector<std::string> embedding_train;  // all unannotated + leftover annotated
  std::vector<std::string> model_train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Validation and test are drawn uniformly without replacement from the
// annotated documents; the annotated remainder beyond model_train joins the
// unannotated documents in embedding_train. The four sets partition the pool.
inline Split split_corpus(const CorpusPool& pool, const SplitSizes& cfg, std::uint64_t seed) {
  const int need = cfg.model_train + cfg.validation + cfg.test;
  if (need > static_cast<int>(pool.annotated.size()))
    throw InsufficientDocuments("requested " + std::to_string(need) + " annotated documents, have " +
                                std::to_string(pool.annotated.size()));
  std::vector<std::string> ids;
  ids.reserve(pool.annotated.size());
  for (const auto& d : pool.annotated) ids.push_back(d.doc_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(Rng::derive(seed, "split"));
  rng.shuffle(ids);

  Split split;
  auto it = ids.begin();
  split.validation.assign(it, it + cfg.validation);
  it += cfg.validation;
  split.test.assign(it, it + cfg.test);
  it += cfg.test;
  split.model_train.assign(it, it + cfg.model_train);
  it += cfg.model_train;
  for (const auto& d : pool.unannotated) split.embedding_train.push_back(d.doc_id);
  split.embedding_train.insert(split.embedding_train.end(), it, ids.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.model_train.begin(), split.model_train.end());
  std::sort(split.embedding_train.begin(), split.embedding_train.end());
  return split;
}

// ---- corpus metrics ---------------------------------------------------------

// One "phrase" is one Annotation; one "token" is one annotated token.
struct MetricsReport {
  long documents = 0;
  long entries = 0;
  long phrases = 0;
  long tokens = 0;
  double mean_entries_per_document = 0;
  double mean_phrases_per_document = 0;
  double mean_tokens_per_document = 0;
  double mean_phrases_per_entry = 0;
  double mean_tokens_per_entry = 0;
  double mean_tokens_per_phrase = 0;
  long target_vocabulary = 0;  // unique annotated token types
  long oov = -1;               // -1 when no vocabulary given
};

template <class HasToken>
inline long count_oov_types(const std::vector<AnnotatedDocument>& docs, const HasToken& in_vocab) {
  std::set<std::string> missing;
  for (const auto& d : docs)
    for (const auto& line : d.lines)
      for (const auto& tok : line)
        if (!in_vocab(tok)) missing.insert(tok);
  return static_cast<long>(missing.size());
}

inline MetricsReport corpus_metrics(const std::vector<AnnotatedDocument>& docs) {
  MetricsReport r;
  r.documents = static_cast<long>(docs.size());
  std::set<std::string> target_vocab;
  for (const auto& d : docs) {
    r.entries += static_cast<long>(d.entries.size());
    for (const auto& e : d.entries) {
      std::vector<const Annotation*> anns;
      anns.push_back(&e.medication);
      for (const auto& a : e.related) anns.push_back(&a);
      for (const Annotation* a : anns) {
        r.phrases += 1;
        r.tokens += a->token_count();
        for (const auto& tok : d.annotation_tokens(*a)) target_vocab.insert(tok);
      }
    }
  }
  r.target_vocabulary = static_cast<long>(target_vocab.size());
  if (r.documents) {
    r.mean_entries_per_document = static_cast<double>(r.entries) / r.documents;
    r.mean_phrases_per_document = static_cast<double>(r.phrases) / r.documents;
    r.mean_tokens_per_document = static_cast<double>(r.tokens) / r.documents;
  }
  if (r.entries) {
    r.mean_phrases_per_entry = static_cast<double>(r.phrases) / r.entries;
    r.mean_tokens_per_entry = static_cast<double>(r.tokens) / r.entries;
  }
  if (r.phrases) r.mean_tokens_per_phrase = static_cast<double>(r.tokens) / r.phrases;
  return r;
}

// Per-field percentage of entries containing at least one annotation of the field.
struct LabelReport {
  std::map<FieldLabel, double> percent;
  long entries = 0;
};

inline LabelReport label_metrics(const std::vector<AnnotatedDocument>& docs) {
  LabelReport r;
  std::map<FieldLabel, long> with;
  for (FieldLabel f : all_fields()) with[f] = 0;
  for (const auto& d : docs)
    for (const auto& e : d.entries) {
      ++r.entries;
      for (FieldLabel f : all_fields())
        if (e.has_field(f)) ++with[f];
    }
  for (FieldLabel f : all_fields())
    r.percent[f] = r.entries ? 100.0 * static_cast<double>(with[f]) / static_cast<double>(r.entries) : 0.0;
  return r;
}

}  // namespace medner
