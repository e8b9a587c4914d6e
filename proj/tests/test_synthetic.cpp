#include <catch2/catch_amalgamated.hpp>

#include "medner/preprocess.hpp"
#include "medner/synthetic.hpp"

using namespace medner;

namespace {

bool plain_number(const std::string& t) {
  bool dot = false;
  if (t.empty()) return false;
  for (char c : t) {
    if (c == '.') {
      if (dot) return false;
      dot = true;
    } else if (!is_ascii_digit(c)) {
      return false;
    }
  }
  return is_ascii_digit(t.front()) && is_ascii_digit(t.back());
}

}  // namespace

TEST_CASE("single template trace") {
  GeneratorConfig cfg;
  cfg.templates = {"started <drug> <dose> <mode>"};
  cfg.drugs = {"NAME"};
  cfg.doses = {"DOSE mg"};
  cfg.modes = {"po"};
  cfg.field_proportions = {{FieldLabel::Dosage, 100.0}, {FieldLabel::Mode, 100.0}};
  cfg.annotated_docs = 1;
  cfg.unannotated_docs = 0;
  cfg.min_entries_per_doc = cfg.max_entries_per_doc = 1;
  cfg.min_filler_lines = cfg.max_filler_lines = 0;
  auto corpus = gen_synthetic(cfg, 1);
  REQUIRE(corpus.annotated.size() == 1);
  const auto& doc = corpus.annotated[0];
  REQUIRE(doc.lines.size() == 1);
  REQUIRE(doc.lines[0] == std::vector<std::string>{"started", "NAME", "DOSE", "mg", "po"});
  REQUIRE(doc.entries.size() == 1);
  const auto& e = doc.entries[0];
  REQUIRE(e.medication.surface == "NAME");
  REQUIRE(e.medication.spans == std::vector<TokenSpan>{{1, 1, 1}});
  REQUIRE(e.related.size() == 2);
  REQUIRE(e.related[0].label == FieldLabel::Dosage);
  REQUIRE(e.related[0].surface == "DOSE mg");
  REQUIRE(e.related[0].spans == std::vector<TokenSpan>{{1, 2, 3}});
  REQUIRE(e.related[1].label == FieldLabel::Mode);
  REQUIRE(e.related[1].surface == "po");
}

TEST_CASE("same seed gives a byte-identical corpus") {
  GeneratorConfig cfg;
  cfg.annotated_docs = 5;
  cfg.unannotated_docs = 5;
  auto a = gen_synthetic(cfg, 99);
  auto b = gen_synthetic(cfg, 99);
  REQUIRE(a.annotated.size() == b.annotated.size());
  for (std::size_t i = 0; i < a.annotated.size(); ++i) {
    REQUIRE(serialize_doc_text(a.annotated[i]) == serialize_doc_text(b.annotated[i]));
    REQUIRE(serialize_ann_text(a.annotated[i]) == serialize_ann_text(b.annotated[i]));
  }
  for (std::size_t i = 0; i < a.unannotated.size(); ++i)
    REQUIRE(serialize_doc_text(a.unannotated[i]) == serialize_doc_text(b.unannotated[i]));
  auto c = gen_synthetic(cfg, 100);
  REQUIRE(serialize_doc_text(a.annotated[0]) != serialize_doc_text(c.annotated[0]));
}

TEST_CASE("field proportions land near the configured targets") {
  GeneratorConfig cfg;
  cfg.annotated_docs = 1500;
  cfg.unannotated_docs = 0;
  cfg.min_entries_per_doc = 6;
  cfg.max_entries_per_doc = 8;
  auto corpus = gen_synthetic(cfg, 7);
  auto report = label_metrics(corpus.annotated);
  REQUIRE(report.entries >= 9000);
  REQUIRE(report.percent[FieldLabel::Medication] == 100.0);
  for (auto [field, target] : cfg.field_proportions) {
    INFO(field_name(field) << " measured " << report.percent[field] << " target " << target);
    REQUIRE(std::fabs(report.percent[field] - target) <= 1.5);
  }
}

TEST_CASE("empty lexicons are rejected") {
  GeneratorConfig cfg;
  cfg.drugs.clear();
  REQUIRE_THROWS_AS(gen_synthetic(cfg, 1), EmptyLexicon);

  GeneratorConfig cfg2;
  cfg2.doses.clear();
  cfg2.field_proportions[FieldLabel::Dosage] = 100.0;
  REQUIRE_THROWS_AS(gen_synthetic(cfg2, 1), EmptyLexicon);
}

TEST_CASE("generated documents satisfy the corpus invariants") {
  GeneratorConfig cfg;
  cfg.annotated_docs = 30;
  cfg.unannotated_docs = 5;
  auto corpus = gen_synthetic(cfg, 13);
  for (const auto& doc : corpus.annotated) {
    REQUIRE(!doc.entries.empty());
    for (const auto& e : doc.entries) {
      REQUIRE(e.medication.label == FieldLabel::Medication);
      std::vector<const Annotation*> anns{&e.medication};
      for (const auto& a : e.related) {
        REQUIRE(a.label != FieldLabel::Medication);
        anns.push_back(&a);
      }
      for (const auto* a : anns) {
        for (const auto& s : a->spans) REQUIRE(doc.span_in_bounds(s));
        REQUIRE(a->surface == join(doc.annotation_tokens(*a), " "));
      }
    }
    // serialization round-trip
    auto back = parse_i2b2(serialize_doc_text(doc), serialize_ann_text(doc), doc.doc_id);
    back.source_year = doc.source_year;
    REQUIRE(back == doc);
  }
}

TEST_CASE("generator numbers normalize to <num> and spans stay valid") {
  GeneratorConfig cfg;
  cfg.annotated_docs = 40;
  cfg.unannotated_docs = 0;
  auto corpus = gen_synthetic(cfg, 3);
  long numbers = 0;
  for (const auto& doc : corpus.annotated) {
    auto norm = normalize_tokens(doc);
    for (std::size_t li = 0; li < doc.lines.size(); ++li) {
      REQUIRE(norm.lines[li].size() == doc.lines[li].size());
      for (std::size_t t = 0; t < doc.lines[li].size(); ++t)
        if (plain_number(doc.lines[li][t])) {
          ++numbers;
          REQUIRE(norm.lines[li][t] == kNumToken);
        }
    }
    for (const auto& e : norm.entries) {
      for (const auto& s : e.medication.spans) REQUIRE(norm.span_in_bounds(s));
      for (const auto& a : e.related)
        for (const auto& s : a.spans) REQUIRE(norm.span_in_bounds(s));
    }
    // idempotence on full documents
    auto twice = normalize_tokens(norm);
    REQUIRE(twice.lines == norm.lines);
  }
  REQUIRE(numbers > 100);
}
