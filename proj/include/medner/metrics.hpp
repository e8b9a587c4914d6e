#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "medner/corpus.hpp"

namespace medner {

struct LabeledSpan {
  FieldLabel label = FieldLabel::None;
  TokenSpan span;
  bool operator==(const LabeledSpan&) const = default;
  auto operator<=>(const LabeledSpan&) const = default;
};

struct FieldCounts {
  long tp = 0, fp = 0, fn = 0;
};

// Token-level: exact (position, field) matches. Phrase-level: a predicted
// span is a true positive iff an identical gold span exists.
struct ConfusionCounts {
  std::map<FieldLabel, FieldCounts> token;
  std::map<FieldLabel, FieldCounts> phrase;

  ConfusionCounts() {
    for (FieldLabel f : all_fields()) {
      token[f] = {};
      phrase[f] = {};
    }
  }

  void add(const ConfusionCounts& o) {
    for (FieldLabel f : all_fields()) {
      token[f].tp += o.token.at(f).tp;
      token[f].fp += o.token.at(f).fp;
      token[f].fn += o.token.at(f).fn;
      phrase[f].tp += o.phrase.at(f).tp;
      phrase[f].fp += o.phrase.at(f).fp;
      phrase[f].fn += o.phrase.at(f).fn;
    }
  }
};

inline ConfusionCounts score_tokens(const AnnotatedDocument& gold,
                                    const std::vector<LabeledSpan>& pred) {
  ConfusionCounts counts;
  std::map<FieldLabel, std::set<std::pair<int, int>>> gold_tokens;
  std::multiset<LabeledSpan> gold_spans;
  for (const auto& e : gold.entries) {
    std::vector<const Annotation*> anns{&e.medication};
    for (const auto& a : e.related) anns.push_back(&a);
    for (const auto* a : anns)
      for (const auto& s : a->spans) {
        gold_spans.insert({a->label, s});
        for (int t = s.start; t <= s.end; ++t) gold_tokens[a->label].insert({s.line, t});
      }
  }

  std::map<FieldLabel, std::set<std::pair<int, int>>> pred_tokens;
  for (const auto& ps : pred) {
    if (!gold.span_in_bounds(ps.span))
      throw DocumentMismatch("predicted span outside document " + gold.doc_id);
    for (int t = ps.span.start; t <= ps.span.end; ++t)
      pred_tokens[ps.label].insert({ps.span.line, t});
    auto it = gold_spans.find(ps);
    if (it != gold_spans.end()) {
      counts.phrase[ps.label].tp += 1;
      gold_spans.erase(it);
    } else {
      counts.phrase[ps.label].fp += 1;
    }
  }
  for (const auto& gs : gold_spans) counts.phrase[gs.label].fn += 1;

  for (FieldLabel f : all_fields()) {
    const auto& g = gold_tokens[f];
    const auto& p = pred_tokens[f];
    for (const auto& pos : p) counts.token[f].tp += g.count(pos) ? 1 : 0;
    counts.token[f].fp = static_cast<long>(p.size()) - counts.token[f].tp;
    counts.token[f].fn = static_cast<long>(g.size()) - counts.token[f].tp;
  }
  return counts;
}

struct PrfRow {
  double precision = 0, recall = 0, f1 = 0;
};

inline PrfRow prf(long tp, long fp, long fn) {
  PrfRow r;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

struct F1Report {
  std::map<FieldLabel, PrfRow> per_field;
  PrfRow micro;
};

inline F1Report f1(const std::map<FieldLabel, FieldCounts>& counts) {
  F1Report report;
  long tp = 0, fp = 0, fn = 0;
  for (const auto& [f, c] : counts) {
    report.per_field[f] = prf(c.tp, c.fp, c.fn);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  report.micro = prf(tp, fp, fn);
  return report;
}

// ---- relation scoring -------------------------------------------------------

// most frequent field per token type among the training annotations
using FieldLookup = std::map<std::string, FieldLabel>;

inline FieldLookup build_field_lookup(const std::vector<AnnotatedDocument>& train_docs) {
  std::map<std::string, std::map<FieldLabel, long>> freq;
  for (const auto& d : train_docs)
    for (const auto& e : d.entries) {
      std::vector<const Annotation*> anns{&e.medication};
      for (const auto& a : e.related) anns.push_back(&a);
      for (const auto* a : anns)
        for (const auto& tok : d.annotation_tokens(*a)) freq[tok][a->label] += 1;
    }
  FieldLookup lookup;
  for (const auto& [tok, by_field] : freq) {
    FieldLabel best = FieldLabel::None;
    long best_count = 0;
    for (FieldLabel f : all_fields()) {
      auto it = by_field.find(f);
      const long c = it == by_field.end() ? 0 : it->second;
      if (c > best_count) {
        best_count = c;
        best = f;
      }
    }
    lookup[tok] = best;
  }
  return lookup;
}

// Extraction output for one entry: the seq2seq tagger claims fields
// directly; the encoder-decoder generates bare tokens.
struct ExtractedRelations {
  bool generated = false;
  std::map<FieldLabel, std::vector<std::string>> tagged;
  std::vector<std::string> tokens;
};

// Generated tokens matching gold related tokens keep the gold field;
// unmatched tokens go to lookup(token), or None (excluded) if absent.
inline std::map<FieldLabel, std::vector<std::string>> attribute_fields(
    const std::vector<std::string>& generated,
    const std::map<FieldLabel, std::multiset<std::string>>& gold_by_field,
    const FieldLookup& lookup) {
  std::map<FieldLabel, std::multiset<std::string>> remaining = gold_by_field;
  std::map<FieldLabel, std::vector<std::string>> out;
  for (const auto& tok : generated) {
    FieldLabel assigned = FieldLabel::None;
    for (FieldLabel f : all_fields()) {
      auto it = remaining[f].find(tok);
      if (it != remaining[f].end()) {
        remaining[f].erase(it);
        assigned = f;
        break;
      }
    }
    if (assigned == FieldLabel::None) {
      auto it = lookup.find(tok);
      assigned = it == lookup.end() ? FieldLabel::None : it->second;
    }
    if (assigned != FieldLabel::None) out[assigned].push_back(tok);
  }
  return out;
}

inline std::map<FieldLabel, std::multiset<std::string>> gold_related_tokens(
    const AnnotatedDocument& doc, const Entry& entry) {
  std::map<FieldLabel, std::multiset<std::string>> out;
  for (const auto& a : entry.related)
    for (const auto& tok : doc.annotation_tokens(a)) out[a.label].insert(tok);
  return out;
}

// Per-entry, per-field multiset comparison of gold related tokens against
// the extraction.
inline ConfusionCounts score_relations(const AnnotatedDocument& doc,
                                       const std::vector<const Entry*>& gold_entries,
                                       const std::vector<ExtractedRelations>& extracted,
                                       const FieldLookup& lookup) {
  if (gold_entries.size() != extracted.size())
    throw EntryMismatch("extraction count does not match entries for " + doc.doc_id);
  ConfusionCounts counts;
  for (std::size_t i = 0; i < gold_entries.size(); ++i) {
    auto gold = gold_related_tokens(doc, *gold_entries[i]);
    std::map<FieldLabel, std::vector<std::string>> ext =
        extracted[i].generated ? attribute_fields(extracted[i].tokens, gold, lookup)
                               : extracted[i].tagged;
    for (FieldLabel f : all_fields()) {
      if (f == FieldLabel::Medication) continue;  // relations cover the five related fields
      std::multiset<std::string> g = gold.count(f) ? gold.at(f) : std::multiset<std::string>{};
      long tp = 0, fp = 0;
      auto it = ext.find(f);
      if (it != ext.end())
        for (const auto& tok : it->second) {
          auto git = g.find(tok);
          if (git != g.end()) {
            g.erase(git);
            ++tp;
          } else {
            ++fp;
          }
        }
      counts.token[f].tp += tp;
      counts.token[f].fp += fp;
      counts.token[f].fn += static_cast<long>(g.size());
    }
  }
  return counts;
}

}  // namespace medner
