#pragma once

#include <map>
#include <string>
#include <vector>

#include "medner/corpus.hpp"
#include "medner/rng.hpp"

namespace medner {

// Grammar-driven look-alike corpus. Entry lines come from templates whose
// placeholders expand from per-field lexicons; non-medication placeholders
// are included per the configured field proportions. Filler lines add the
// ambiguity that makes context matter: numbers that are not dosages and drug
// mentions that are not annotated.
struct GeneratorConfig {
  int annotated_docs = 200;
  int unannotated_docs = 600;
  int min_entries_per_doc = 3;
  int max_entries_per_doc = 8;
  int min_filler_lines = 3;
  int max_filler_lines = 8;

  // entry-level field occurrence targets, in percent
  std::map<FieldLabel, double> field_proportions = {
      {FieldLabel::Dosage, 49.5}, {FieldLabel::Mode, 37.7},   {FieldLabel::Frequency, 44.8},
      {FieldLabel::Duration, 6.1}, {FieldLabel::Reason, 18.3},
  };

  // templates mix literal tokens with <verb>, <mid>, <drug>, <dose>,
  // <mode>, <freq>, <dur>, <reason>; "NUM" inside a lexicon entry becomes a
  // number
  std::vector<std::string> templates = {"<verb> <mid> <drug> <dose> <mode> <freq> <dur> <reason>"};

  // confounder tails keep drug mentions and numbers inside the same
  // sentence as the entry, in roles that are not annotated
  double entry_tail_rate = 0.45;
  std::vector<std::string> entry_tails = {
      "and will hold <drugref> for now",
      "after stopping <drugref> last week",
      "while avoiding <drugref> going forward",
      "despite prior <drugref> intolerance",
      "once <drugref> level returns",
      "with bp NUM over NUM today",
      "noting glucose NUM this morning",
      "and recheck labs in NUM days",
      "given weight of NUM kg",
  };

  // hard confounder lines mirror the prescription shape: the same neutral
  // mid-run and a dose-like tail, distinguished only by the sentence head,
  // which sits outside a narrow token window
  double confounder_rate = 0.45;  // expected confounder lines per entry
  std::vector<std::string> confounder_heads = {
      "allergy list was updated to include",
      "outside records mention prior use of",
      "patient declined a new course of",
      "pharmacy flagged an interaction with",
      "family history includes reactions to",
      "admission reconciliation removed",
  };
  std::string confounder_template = "<head> <mid> <drugref> <dosish> <modish> <freqish>";

  std::vector<std::string> mids = {
      "after review of todays labs and vitals",
      "per the admitting team earlier this morning",
      "following discussion of risks and benefits",
      "once renal function was rechecked overnight",
      "in line with the outpatient plan from clinic",
      "after holding parameters were confirmed again",
  };

  std::vector<std::string> verbs = {"started",   "continued", "given",
                                    "takes",     "prescribed", "restarted",
                                    "received",  "will start", "plan to start",
                                    "decided to start", "now taking"};
  std::vector<std::string> drugs = {
      "aspirin",    "metformin",  "lisinopril",   "atorvastatin", "warfarin",
      "insulin",    "prednisone", "amoxicillin",  "ibuprofen",    "gabapentin",
      "furosemide", "metoprolol", "omeprazole",   "sertraline",   "albuterol",
      "simvastatin", "losartan",  "amlodipine",   "tramadol",     "levothyroxine",
      "clopidogrel", "heparin",   "digoxin",      "baby aspirin", "iron sulfate"};
  std::vector<std::string> doses = {"NUM mg", "NUM mg", "NUM mcg", "NUM units", "NUM tablets",
                                    "NUM ml"};
  std::vector<std::string> modes = {"po", "iv", "orally", "subcutaneous", "topical",
                                    "im", "by mouth", "inhaled"};
  std::vector<std::string> frequencies = {"daily",       "bid",        "tid",
                                          "qid",         "weekly",     "prn",
                                          "twice daily", "every morning", "at bedtime",
                                          "every NUM hours"};
  std::vector<std::string> durations = {"for NUM days", "for NUM weeks", "for NUM months",
                                        "until symptoms resolve", "x NUM days"};
  std::vector<std::string> reasons = {"pneumonia", "hypertension", "chest pain", "fever",
                                      "infection", "diabetes",     "anxiety",    "back pain",
                                      "insomnia",  "nausea",       "high cholesterol", "migraine"};

  // "for" glue emitted before an included <reason>, unannotated
  std::vector<std::string> filler_templates = {
      "patient seen today for routine followup",
      "bp NUM over NUM and pulse NUM",
      "glucose NUM sodium NUM potassium NUM",
      "labs reviewed and stable",
      "patient denies chest pain or fever",
      "allergy to <drugref> noted in chart",
      "history of <drugref> intolerance",
      "weight NUM kg height NUM cm",
      "followup in NUM weeks",
      "Exam unremarkable. Plan discussed with patient",
      "no acute distress observed",
      "reviewed home medication list",
      "<drugref> level checked today",
      "discussed risks of <drugref> therapy",
      "wound healing well no drainage",
      "sleep improved since last visit",
  };
};

struct SyntheticCorpus {
  std::vector<AnnotatedDocument> unannotated;
  std::vector<AnnotatedDocument> annotated;
};

namespace detail {

inline std::string gen_number(Rng& rng) {
  if (rng.bernoulli(0.25))
    return std::to_string(1 + rng.uniform_int(9)) + "." + std::to_string(rng.uniform_int(10));
  return std::to_string(1 + rng.uniform_int(999));
}

inline std::vector<std::string> expand_lexicon_entry(const std::string& entry, Rng& rng) {
  std::vector<std::string> out;
  for (auto& tok : split_whitespace(entry)) out.push_back(tok == "NUM" ? gen_number(rng) : tok);
  return out;
}

inline const std::vector<std::string>& lexicon_for(const GeneratorConfig& cfg, FieldLabel f) {
  switch (f) {
    case FieldLabel::Medication: return cfg.drugs;
    case FieldLabel::Dosage: return cfg.doses;
    case FieldLabel::Mode: return cfg.modes;
    case FieldLabel::Frequency: return cfg.frequencies;
    case FieldLabel::Duration: return cfg.durations;
    case FieldLabel::Reason: return cfg.reasons;
    default: throw EmptyLexicon("no lexicon for none");
  }
}

struct LineUnit {
  std::vector<std::string> tokens;
  // per annotation: label and [start,end] token offsets within the line
  std::vector<std::pair<FieldLabel, std::pair<int, int>>> anns;
};

inline LineUnit render_entry_line(const GeneratorConfig& cfg, Rng& rng) {
  const std::string& tpl =
      cfg.templates[static_cast<std::size_t>(rng.uniform_int(cfg.templates.size()))];
  LineUnit unit;
  for (const auto& slot : split_whitespace(tpl)) {
    FieldLabel field = FieldLabel::None;
    if (slot == "<verb>") {
      if (cfg.verbs.empty()) throw EmptyLexicon("verb lexicon is empty");
      for (auto& t : expand_lexicon_entry(
               cfg.verbs[static_cast<std::size_t>(rng.uniform_int(cfg.verbs.size()))], rng))
        unit.tokens.push_back(std::move(t));
      continue;
    } else if (slot == "<mid>") {
      if (cfg.mids.empty()) continue;
      for (auto& t : expand_lexicon_entry(
               cfg.mids[static_cast<std::size_t>(rng.uniform_int(cfg.mids.size()))], rng))
        unit.tokens.push_back(std::move(t));
      continue;
    } else if (slot == "<drug>") {
      field = FieldLabel::Medication;
    } else if (slot == "<dose>") {
      field = FieldLabel::Dosage;
    } else if (slot == "<mode>") {
      field = FieldLabel::Mode;
    } else if (slot == "<freq>") {
      field = FieldLabel::Frequency;
    } else if (slot == "<dur>") {
      field = FieldLabel::Duration;
    } else if (slot == "<reason>") {
      field = FieldLabel::Reason;
    } else {
      unit.tokens.push_back(slot);
      continue;
    }
    if (field != FieldLabel::Medication) {
      auto it = cfg.field_proportions.find(field);
      const double pct = it == cfg.field_proportions.end() ? 100.0 : it->second;
      if (!rng.bernoulli(pct / 100.0)) continue;
    }
    const auto& lex = lexicon_for(cfg, field);
    if (lex.empty()) throw EmptyLexicon(std::string("lexicon for ") + field_name(field) + " is empty");
    if (field == FieldLabel::Reason) unit.tokens.push_back("for");
    auto toks = expand_lexicon_entry(lex[static_cast<std::size_t>(rng.uniform_int(lex.size()))], rng);
    const int start = static_cast<int>(unit.tokens.size());
    for (auto& t : toks) unit.tokens.push_back(std::move(t));
    unit.anns.emplace_back(field, std::make_pair(start, static_cast<int>(unit.tokens.size()) - 1));
  }
  if (!cfg.entry_tails.empty() && rng.bernoulli(cfg.entry_tail_rate)) {
    const std::string& tail =
        cfg.entry_tails[static_cast<std::size_t>(rng.uniform_int(cfg.entry_tails.size()))];
    for (const auto& slot : split_whitespace(tail)) {
      if (slot == "NUM") {
        unit.tokens.push_back(gen_number(rng));
      } else if (slot == "<drugref>") {
        for (auto& t : expand_lexicon_entry(
                 cfg.drugs[static_cast<std::size_t>(rng.uniform_int(cfg.drugs.size()))], rng))
          unit.tokens.push_back(std::move(t));
      } else {
        unit.tokens.push_back(slot);
      }
    }
  }
  return unit;
}

// same mid-run and tail shapes as a prescription, nothing annotated
inline LineUnit render_confounder_line(const GeneratorConfig& cfg, Rng& rng) {
  LineUnit unit;
  auto emit_from = [&](const std::vector<std::string>& lex) {
    if (lex.empty()) return;
    for (auto& t : expand_lexicon_entry(lex[static_cast<std::size_t>(rng.uniform_int(lex.size()))],
                                        rng))
      unit.tokens.push_back(std::move(t));
  };
  for (const auto& slot : split_whitespace(cfg.confounder_template)) {
    if (slot == "<head>") {
      if (cfg.confounder_heads.empty()) throw EmptyLexicon("confounder head lexicon is empty");
      emit_from(cfg.confounder_heads);
    } else if (slot == "<mid>") {
      emit_from(cfg.mids);
    } else if (slot == "<drugref>") {
      emit_from(cfg.drugs);
    } else if (slot == "<dosish>") {
      if (rng.bernoulli(0.7)) emit_from(cfg.doses);
    } else if (slot == "<modish>") {
      if (rng.bernoulli(0.5)) emit_from(cfg.modes);
    } else if (slot == "<freqish>") {
      if (rng.bernoulli(0.5)) emit_from(cfg.frequencies);
    } else if (slot == "NUM") {
      unit.tokens.push_back(gen_number(rng));
    } else {
      unit.tokens.push_back(slot);
    }
  }
  return unit;
}

inline LineUnit render_filler_line(const GeneratorConfig& cfg, Rng& rng) {
  if (cfg.filler_templates.empty()) throw EmptyLexicon("filler template list is empty");
  const std::string& tpl =
      cfg.filler_templates[static_cast<std::size_t>(rng.uniform_int(cfg.filler_templates.size()))];
  LineUnit unit;
  for (const auto& slot : split_whitespace(tpl)) {
    if (slot == "NUM") {
      unit.tokens.push_back(gen_number(rng));
    } else if (slot == "<drugref>") {
      if (cfg.drugs.empty()) throw EmptyLexicon("drug lexicon is empty");
      for (auto& t : expand_lexicon_entry(
               cfg.drugs[static_cast<std::size_t>(rng.uniform_int(cfg.drugs.size()))], rng))
        unit.tokens.push_back(std::move(t));
    } else {
      unit.tokens.push_back(slot);
    }
  }
  return unit;
}

inline AnnotatedDocument materialize(const std::string& id, std::vector<LineUnit> units,
                                     bool keep_annotations) {
  AnnotatedDocument doc;
  doc.doc_id = id;
  for (std::size_t li = 0; li < units.size(); ++li) {
    auto& unit = units[li];
    doc.lines.push_back(unit.tokens);
    if (!keep_annotations || unit.anns.empty()) continue;
    Entry entry;
    bool have_med = false;
    for (auto& [field, range] : unit.anns) {
      TokenSpan span{static_cast<int>(li) + 1, range.first, range.second};
      Annotation ann;
      ann.label = field;
      ann.spans = {span};
      ann.surface = join(doc.span_tokens(span), " ");
      if (field == FieldLabel::Medication) {
        entry.medication = std::move(ann);
        have_med = true;
      } else {
        entry.related.push_back(std::move(ann));
      }
    }
    if (have_med) doc.entries.push_back(std::move(entry));
  }
  return doc;
}

}  // namespace detail

inline SyntheticCorpus gen_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
  if (cfg.drugs.empty()) throw EmptyLexicon("drug lexicon is empty");
  if (cfg.templates.empty()) throw EmptyLexicon("template list is empty");
  Rng rng(Rng::derive(seed, "synthetic"));
  SyntheticCorpus corpus;

  auto build_doc = [&](const std::string& id, bool annotated) {
    const int entries =
        cfg.min_entries_per_doc +
        static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(cfg.max_entries_per_doc - cfg.min_entries_per_doc + 1)));
    const int fillers =
        cfg.min_filler_lines +
        static_cast<int>(rng.uniform_int(
            static_cast<std::uint64_t>(cfg.max_filler_lines - cfg.min_filler_lines + 1)));
    std::vector<detail::LineUnit> units;
    for (int e = 0; e < entries; ++e) {
      units.push_back(detail::render_entry_line(cfg, rng));
      if (rng.bernoulli(cfg.confounder_rate))
        units.push_back(detail::render_confounder_line(cfg, rng));
    }
    for (int f = 0; f < fillers; ++f) units.push_back(detail::render_filler_line(cfg, rng));
    rng.shuffle(units);
    return detail::materialize(id, std::move(units), annotated);
  };

  for (int i = 0; i < cfg.annotated_docs; ++i)
    corpus.annotated.push_back(build_doc("synth-a" + std::to_string(i), true));
  for (int i = 0; i < cfg.unannotated_docs; ++i)
    corpus.unannotated.push_back(build_doc("synth-u" + std::to_string(i), false));
  return corpus;
}

}  // namespace medner
