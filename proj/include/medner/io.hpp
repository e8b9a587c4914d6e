#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "medner/corpus.hpp"
#include "medner/embed_eval.hpp"
#include "medner/metrics.hpp"
#include "medner/ner.hpp"

namespace medner {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigInvalid("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigInvalid("cannot write " + path.string());
  os << content;
}

inline std::uint64_t file_hash(const fs::path& path) { return fnv1a(read_file(path)); }

inline std::string format_double(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

// ---- corpus directories -------------------------------------------------------
// A corpus directory holds <doc_id>.txt files (whitespace-tokenized lines)
// with optional <doc_id>.ann annotation files in the entry grammar.

inline void write_corpus_dir(const fs::path& dir, const std::vector<AnnotatedDocument>& docs) {
  fs::create_directories(dir);
  for (const auto& doc : docs) {
    write_file(dir / (doc.doc_id + ".txt"), serialize_doc_text(doc));
    if (!doc.entries.empty()) write_file(dir / (doc.doc_id + ".ann"), serialize_ann_text(doc));
  }
}

inline std::vector<AnnotatedDocument> read_corpus_dir(const fs::path& dir,
                                                      std::optional<int> year = std::nullopt) {
  if (!fs::is_directory(dir)) throw ConfigInvalid("corpus directory missing: " + dir.string());
  std::vector<fs::path> txts;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      txts.push_back(entry.path());
  std::sort(txts.begin(), txts.end());
  std::vector<AnnotatedDocument> docs;
  for (const auto& txt : txts) {
    fs::path ann = txt;
    ann.replace_extension(".ann");
    std::string ann_text = fs::exists(ann) ? read_file(ann) : std::string{};
    docs.push_back(parse_i2b2(read_file(txt), ann_text, txt.stem().string(), year));
  }
  return docs;
}

// ---- predictions and relations (jsonl) ------------------------------------------

inline void write_predictions(const fs::path& path,
                              const std::vector<std::pair<std::string, PredictedSpan>>& rows) {
  std::string out;
  for (const auto& [doc_id, ps] : rows) {
    nlohmann::json j;
    j["doc_id"] = doc_id;
    j["line"] = ps.span.line;
    j["start"] = ps.span.start;
    j["end"] = ps.span.end;
    j["label"] = field_name(ps.label);
    j["score"] = format_double(ps.score);
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

inline std::vector<std::pair<std::string, PredictedSpan>> read_predictions(const fs::path& path) {
  std::vector<std::pair<std::string, PredictedSpan>> rows;
  std::ifstream is(path);
  if (!is) throw ConfigInvalid("cannot open predictions: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw MalformedHeader("bad prediction line " + std::to_string(lineno) + ": " + e.what());
    }
    PredictedSpan ps;
    ps.span = {j.at("line").get<int>(), j.at("start").get<int>(), j.at("end").get<int>()};
    const std::string label = j.at("label").get<std::string>();
    ps.label = FieldLabel::None;
    for (FieldLabel f : all_fields())
      if (label == field_name(f)) ps.label = f;
    if (ps.label == FieldLabel::None)
      throw MalformedHeader("bad label '" + label + "' in prediction line " + std::to_string(lineno));
    ps.score = std::stod(j.at("score").get<std::string>());
    rows.emplace_back(j.at("doc_id").get<std::string>(), ps);
  }
  return rows;
}

struct RelationRow {
  std::string doc_id;
  std::size_t entry_index = 0;
  TokenSpan medication_span;
  std::string field;  // "none" for unattributed generated tokens
  std::vector<std::string> tokens;
  bool generated = false;
};

inline void write_relations(const fs::path& path, const std::vector<RelationRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j;
    j["doc_id"] = r.doc_id;
    j["entry"] = r.entry_index;
    j["medication_span"] = {r.medication_span.line, r.medication_span.start, r.medication_span.end};
    j["field"] = r.field;
    j["tokens"] = r.tokens;
    j["generated"] = r.generated;
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

inline std::vector<RelationRow> read_relations(const fs::path& path) {
  std::vector<RelationRow> rows;
  std::ifstream is(path);
  if (!is) throw ConfigInvalid("cannot open relations: " + path.string());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    RelationRow r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.entry_index = j.at("entry").get<std::size_t>();
    auto span = j.at("medication_span");
    r.medication_span = {span[0].get<int>(), span[1].get<int>(), span[2].get<int>()};
    r.field = j.at("field").get<std::string>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.generated = j.value("generated", false);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- report writers --------------------------------------------------------------

inline std::string metrics_report_csv(const MetricsReport& r) {
  std::string out = "metric,value\n";
  out += "documents," + std::to_string(r.documents) + "\n";
  out += "entries," + std::to_string(r.entries) + "\n";
  out += "phrases," + std::to_string(r.phrases) + "\n";
  out += "tokens," + std::to_string(r.tokens) + "\n";
  out += "mean_entries_per_document," + format_double(r.mean_entries_per_document, 4) + "\n";
  out += "mean_phrases_per_document," + format_double(r.mean_phrases_per_document, 4) + "\n";
  out += "mean_tokens_per_document," + format_double(r.mean_tokens_per_document, 4) + "\n";
  out += "mean_phrases_per_entry," + format_double(r.mean_phrases_per_entry, 4) + "\n";
  out += "mean_tokens_per_entry," + format_double(r.mean_tokens_per_entry, 4) + "\n";
  out += "mean_tokens_per_phrase," + format_double(r.mean_tokens_per_phrase, 4) + "\n";
  out += "target_vocabulary," + std::to_string(r.target_vocabulary) + "\n";
  if (r.oov >= 0) out += "oov," + std::to_string(r.oov) + "\n";
  return out;
}

inline nlohmann::json metrics_report_json(const MetricsReport& r) {
  nlohmann::json j;
  j["documents"] = r.documents;
  j["entries"] = r.entries;
  j["phrases"] = r.phrases;
  j["tokens"] = r.tokens;
  j["mean_entries_per_document"] = r.mean_entries_per_document;
  j["mean_phrases_per_document"] = r.mean_phrases_per_document;
  j["mean_tokens_per_document"] = r.mean_tokens_per_document;
  j["mean_phrases_per_entry"] = r.mean_phrases_per_entry;
  j["mean_tokens_per_entry"] = r.mean_tokens_per_entry;
  j["mean_tokens_per_phrase"] = r.mean_tokens_per_phrase;
  j["target_vocabulary"] = r.target_vocabulary;
  if (r.oov >= 0) j["oov"] = r.oov;
  return j;
}

inline std::string label_report_csv(const LabelReport& r) {
  std::string out = "field,percent_of_entries\n";
  for (FieldLabel f : all_fields())
    out += std::string(field_name(f)) + "," + format_double(r.percent.at(f), 2) + "\n";
  return out;
}

inline std::string intrinsic_report_csv(const IntrinsicReport& r) {
  std::string out = "field,cbow_aed,cbow_acs,csg_aed,csg_acs\n";
  for (FieldLabel f : all_fields()) {
    out += field_name(f);
    out += "," + format_double(r.aed_cbow.at(f), 4);
    out += "," + format_double(r.acs_cbow.at(f), 4);
    out += "," + format_double(r.aed_csg.at(f), 4);
    out += "," + format_double(r.acs_csg.at(f), 4);
    out += "\n";
  }
  return out;
}

inline std::string sweep_report_csv(const SweepReport& r) {
  std::string out = "field,algorithm,layers,activation,dropout,lr,f1,best\n";
  for (FieldLabel f : all_fields()) {
    for (const auto& cell : r.cells.at(f)) {
      const auto& best = r.best.at(f);
      const bool is_best = best.point.algorithm == cell.point.algorithm &&
                           best.point.layers == cell.point.layers &&
                           best.point.activation == cell.point.activation &&
                           best.point.dropout == cell.point.dropout &&
                           best.point.lr == cell.point.lr;
      out += std::string(field_name(f)) + "," + embed_algo_name(cell.point.algorithm) + "," +
             std::to_string(cell.point.layers) + "," + activation_name(cell.point.activation) +
             "," + format_double(cell.point.dropout, 1) + "," + format_double(cell.point.lr, 4) +
             "," + format_double(cell.f1, 4) + "," + (is_best ? "1" : "0") + "\n";
    }
  }
  return out;
}

// field x (P, R, F1) rows plus micro, token level first
inline std::string f1_report_csv(const std::string& tag, const ConfusionCounts& counts) {
  auto token = f1(counts.token);
  auto phrase = f1(counts.phrase);
  std::string out = "model,level,field,tp,fp,fn,precision,recall,f1\n";
  auto emit = [&](const char* level, const std::map<FieldLabel, FieldCounts>& c, const F1Report& rep) {
    for (FieldLabel f : all_fields()) {
      const auto& row = rep.per_field.at(f);
      out += tag + "," + level + "," + field_name(f) + "," + std::to_string(c.at(f).tp) + "," +
             std::to_string(c.at(f).fp) + "," + std::to_string(c.at(f).fn) + "," +
             format_double(row.precision, 4) + "," + format_double(row.recall, 4) + "," +
             format_double(row.f1, 4) + "\n";
    }
    long tp = 0, fp = 0, fn = 0;
    for (FieldLabel f : all_fields()) {
      tp += c.at(f).tp;
      fp += c.at(f).fp;
      fn += c.at(f).fn;
    }
    out += tag + "," + level + ",micro," + std::to_string(tp) + "," + std::to_string(fp) + "," +
           std::to_string(fn) + "," + format_double(rep.micro.precision, 4) + "," +
           format_double(rep.micro.recall, 4) + "," + format_double(rep.micro.f1, 4) + "\n";
  };
  emit("token", counts.token, token);
  emit("phrase", counts.phrase, phrase);
  return out;
}

inline std::string tsne_csv(const std::vector<std::string>& tokens,
                            const std::vector<std::string>& fields, const Tensor<double>& coords) {
  std::string out = "token,field,x,y\n";
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out += tokens[i] + "," + fields[i] + "," +
           format_double(coords.at(static_cast<std::int64_t>(i), 0)) + "," +
           format_double(coords.at(static_cast<std::int64_t>(i), 1)) + "\n";
  return out;
}

}  // namespace medner
