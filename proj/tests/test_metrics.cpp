#include <catch2/catch_amalgamated.hpp>

#include "medner/metrics.hpp"
#include "medner/synthetic.hpp"

using namespace medner;

namespace {

AnnotatedDocument doc_with_med(const std::string& line, TokenSpan med) {
  AnnotatedDocument d;
  d.doc_id = "m";
  d.lines.push_back(split_whitespace(line));
  Entry e;
  e.medication = Annotation{FieldLabel::Medication, {med}, ""};
  e.medication.surface = join(d.span_tokens(med), " ");
  d.entries.push_back(e);
  return d;
}

// independent brute-force matcher: walks every token position and every
// span one by one
ConfusionCounts brute_force_score(const AnnotatedDocument& gold,
                                  const std::vector<LabeledSpan>& pred) {
  ConfusionCounts c;
  for (FieldLabel f : all_fields()) {
    std::vector<std::pair<int, int>> gold_pos, pred_pos;
    std::vector<TokenSpan> gold_spans, pred_spans;
    for (const auto& e : gold.entries) {
      std::vector<const Annotation*> anns{&e.medication};
      for (const auto& a : e.related) anns.push_back(&a);
      for (const auto* a : anns) {
        if (a->label != f) continue;
        for (const auto& s : a->spans) {
          gold_spans.push_back(s);
          for (int t = s.start; t <= s.end; ++t) gold_pos.emplace_back(s.line, t);
        }
      }
    }
    for (const auto& ps : pred) {
      if (ps.label != f) continue;
      pred_spans.push_back(ps.span);
      for (int t = ps.span.start; t <= ps.span.end; ++t) pred_pos.emplace_back(ps.span.line, t);
    }
    std::sort(gold_pos.begin(), gold_pos.end());
    gold_pos.erase(std::unique(gold_pos.begin(), gold_pos.end()), gold_pos.end());
    std::sort(pred_pos.begin(), pred_pos.end());
    pred_pos.erase(std::unique(pred_pos.begin(), pred_pos.end()), pred_pos.end());
    for (const auto& p : pred_pos) {
      bool hit = false;
      for (const auto& g : gold_pos) hit |= g == p;
      (hit ? c.token[f].tp : c.token[f].fp)++;
    }
    for (const auto& g : gold_pos) {
      bool hit = false;
      for (const auto& p : pred_pos) hit |= g == p;
      if (!hit) c.token[f].fn++;
    }
    std::vector<bool> used(gold_spans.size(), false);
    for (const auto& p : pred_spans) {
      bool matched = false;
      for (std::size_t i = 0; i < gold_spans.size() && !matched; ++i)
        if (!used[i] && gold_spans[i] == p) {
          used[i] = true;
          matched = true;
        }
      (matched ? c.phrase[f].tp : c.phrase[f].fp)++;
    }
    for (std::size_t i = 0; i < gold_spans.size(); ++i)
      if (!used[i]) c.phrase[f].fn++;
  }
  return c;
}

bool counts_equal(const ConfusionCounts& a, const ConfusionCounts& b) {
  for (FieldLabel f : all_fields()) {
    if (a.token.at(f).tp != b.token.at(f).tp || a.token.at(f).fp != b.token.at(f).fp ||
        a.token.at(f).fn != b.token.at(f).fn)
      return false;
    if (a.phrase.at(f).tp != b.phrase.at(f).tp || a.phrase.at(f).fp != b.phrase.at(f).fp ||
        a.phrase.at(f).fn != b.phrase.at(f).fn)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("perfect predictions give F1 of one") {
  auto d = doc_with_med("took aspirin today", {1, 1, 1});
  std::vector<LabeledSpan> pred = {{FieldLabel::Medication, {1, 1, 1}}};
  auto counts = score_tokens(d, pred);
  auto report = f1(counts.token);
  REQUIRE(report.per_field[FieldLabel::Medication].f1 == Catch::Approx(1.0));
  REQUIRE(counts.phrase[FieldLabel::Medication].tp == 1);
}

TEST_CASE("hand-checked offset confusion") {
  // gold Med tokens {3,4}, pred Med {4,5}
  auto d = doc_with_med("a b c aspirin extra more words", {1, 3, 4});
  std::vector<LabeledSpan> pred = {{FieldLabel::Medication, {1, 4, 5}}};
  auto counts = score_tokens(d, pred);
  REQUIRE(counts.token[FieldLabel::Medication].tp == 1);
  REQUIRE(counts.token[FieldLabel::Medication].fp == 1);
  REQUIRE(counts.token[FieldLabel::Medication].fn == 1);
  auto row = f1(counts.token).per_field[FieldLabel::Medication];
  REQUIRE(row.precision == Catch::Approx(0.5));
  REQUIRE(row.recall == Catch::Approx(0.5));
  REQUIRE(row.f1 == Catch::Approx(0.5));
  REQUIRE(counts.phrase[FieldLabel::Medication].tp == 0);
}

TEST_CASE("empty predictions mean zero recall with zero false positives") {
  auto d = doc_with_med("took aspirin", {1, 1, 1});
  auto counts = score_tokens(d, {});
  REQUIRE(counts.token[FieldLabel::Medication].fp == 0);
  auto row = f1(counts.token).per_field[FieldLabel::Medication];
  REQUIRE(row.recall == 0.0);
  REQUIRE(row.precision == 0.0);
}

TEST_CASE("f1 formula and degenerate conventions") {
  auto row = prf(2, 1, 1);
  REQUIRE(row.precision == Catch::Approx(2.0 / 3));
  REQUIRE(row.recall == Catch::Approx(2.0 / 3));
  REQUIRE(row.f1 == Catch::Approx(2.0 / 3));
  auto zero = prf(0, 0, 0);
  REQUIRE(zero.precision == 0.0);
  REQUIRE(zero.recall == 0.0);
  REQUIRE(zero.f1 == 0.0);

  // swapping fp and fn swaps precision and recall
  medner::Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    long tp = static_cast<long>(rng.uniform_int(10));
    long fp = static_cast<long>(rng.uniform_int(10));
    long fn = static_cast<long>(rng.uniform_int(10));
    auto a = prf(tp, fp, fn);
    auto b = prf(tp, fn, fp);
    REQUIRE(a.precision == Catch::Approx(b.recall).margin(1e-12));
    REQUIRE(a.recall == Catch::Approx(b.precision).margin(1e-12));
    REQUIRE(a.f1 == Catch::Approx(b.f1).margin(1e-12));
  }
}

TEST_CASE("micro average uses summed counts") {
  std::map<FieldLabel, FieldCounts> counts;
  for (FieldLabel f : all_fields()) counts[f] = {};
  counts[FieldLabel::Medication] = {8, 2, 0};
  counts[FieldLabel::Dosage] = {0, 0, 10};
  auto report = f1(counts);
  REQUIRE(report.micro.precision == Catch::Approx(0.8));
  REQUIRE(report.micro.recall == Catch::Approx(8.0 / 18));
}

TEST_CASE("token and phrase F1 are both perfect iff predictions equal gold") {
  Rng rng(77);
  GeneratorConfig gc;
  gc.annotated_docs = 20;
  gc.unannotated_docs = 0;
  auto corpus = gen_synthetic(gc, 51);
  for (const auto& doc : corpus.annotated) {
    // exact predictions
    std::vector<LabeledSpan> exact;
    for (const auto& e : doc.entries) {
      for (const auto& s : e.medication.spans) exact.push_back({FieldLabel::Medication, s});
      for (const auto& a : e.related)
        for (const auto& s : a.spans) exact.push_back({a.label, s});
    }
    auto counts = score_tokens(doc, exact);
    for (FieldLabel f : all_fields()) {
      REQUIRE(counts.token.at(f).fp == 0);
      REQUIRE(counts.token.at(f).fn == 0);
      REQUIRE(counts.phrase.at(f).fp == 0);
      REQUIRE(counts.phrase.at(f).fn == 0);
    }
    // a perturbed prediction cannot keep both levels perfect
    if (!exact.empty()) {
      auto broken = exact;
      auto& span = broken[rng.uniform_int(broken.size())].span;
      span.end = std::min(span.end + 1,
                          static_cast<int>(doc.lines[static_cast<std::size_t>(span.line - 1)].size()) - 1);
      if (broken != exact) {
        auto c2 = score_tokens(doc, broken);
        bool perfect = true;
        for (FieldLabel f : all_fields())
          perfect &= c2.token.at(f).fp == 0 && c2.token.at(f).fn == 0 &&
                     c2.phrase.at(f).fp == 0 && c2.phrase.at(f).fn == 0;
        REQUIRE_FALSE(perfect);
      }
    }
  }
}

TEST_CASE("score_tokens agrees exactly with the brute-force matcher") {
  Rng rng(404);
  GeneratorConfig gc;
  gc.annotated_docs = 30;
  gc.unannotated_docs = 0;
  auto corpus = gen_synthetic(gc, 8);
  for (const auto& doc : corpus.annotated) {
    // random predictions: some real spans, some noise
    std::vector<LabeledSpan> pred;
    for (const auto& e : doc.entries) {
      if (rng.bernoulli(0.7)) pred.push_back({FieldLabel::Medication, e.medication.spans[0]});
      for (const auto& a : e.related)
        if (rng.bernoulli(0.6)) pred.push_back({a.label, a.spans[0]});
    }
    for (int i = 0; i < 4; ++i) {
      int line = 1 + static_cast<int>(rng.uniform_int(doc.lines.size()));
      int len = static_cast<int>(doc.lines[static_cast<std::size_t>(line - 1)].size());
      if (len == 0) continue;
      int start = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(len)));
      int end = std::min(len - 1, start + static_cast<int>(rng.uniform_int(2)));
      pred.push_back({all_fields()[rng.uniform_int(6)], {line, start, end}});
    }
    auto fast = score_tokens(doc, pred);
    auto brute = brute_force_score(doc, pred);
    REQUIRE(counts_equal(fast, brute));
  }
}

TEST_CASE("out-of-document predictions are rejected") {
  auto d = doc_with_med("took aspirin", {1, 1, 1});
  std::vector<LabeledSpan> pred = {{FieldLabel::Medication, {5, 0, 0}}};
  REQUIRE_THROWS_AS(score_tokens(d, pred), DocumentMismatch);
}

TEST_CASE("field lookup maps tokens to their most frequent field") {
  AnnotatedDocument d;
  d.doc_id = "lk";
  d.lines = {split_whitespace("took aspirin 81 mg po daily"),
             split_whitespace("also mg dose aspirin now")};
  Entry e1;
  e1.medication = Annotation{FieldLabel::Medication, {{1, 1, 1}}, "aspirin"};
  e1.related.push_back(Annotation{FieldLabel::Dosage, {{1, 2, 3}}, "81 mg"});
  e1.related.push_back(Annotation{FieldLabel::Mode, {{1, 4, 4}}, "po"});
  Entry e2;
  e2.medication = Annotation{FieldLabel::Medication, {{2, 3, 3}}, "aspirin"};
  e2.related.push_back(Annotation{FieldLabel::Dosage, {{2, 1, 1}}, "mg"});
  d.entries = {e1, e2};

  auto lookup = build_field_lookup({d});
  REQUIRE(lookup.at("aspirin") == FieldLabel::Medication);
  REQUIRE(lookup.at("mg") == FieldLabel::Dosage);
  REQUIRE(lookup.at("po") == FieldLabel::Mode);
  REQUIRE(lookup.count("took") == 0);
}

TEST_CASE("attribute_fields keeps gold fields for matches and uses the lookup for extras") {
  FieldLookup lookup{{"po", FieldLabel::Mode}, {"mg", FieldLabel::Dosage}};
  std::map<FieldLabel, std::multiset<std::string>> gold;
  gold[FieldLabel::Dosage] = {"81", "mg"};
  auto attributed = attribute_fields({"81", "po", "mystery"}, gold, lookup);
  REQUIRE(attributed[FieldLabel::Dosage] == std::vector<std::string>{"81"});
  REQUIRE(attributed[FieldLabel::Mode] == std::vector<std::string>{"po"});
  // "mystery" is absent from the lookup and drops out
  long total = 0;
  for (const auto& [f, toks] : attributed) total += static_cast<long>(toks.size());
  REQUIRE(total == 2);
}

TEST_CASE("score_relations multiset comparison per entry and field") {
  auto doc = doc_with_med("took aspirin 81 mg po", {1, 1, 1});
  auto& entry = doc.entries[0];
  entry.related.push_back(Annotation{FieldLabel::Dosage, {{1, 2, 3}}, "81 mg"});
  FieldLookup lookup{{"po", FieldLabel::Mode}};

  SECTION("perfect tagged extraction") {
    ExtractedRelations ex;
    ex.tagged[FieldLabel::Dosage] = {"81", "mg"};
    auto counts = score_relations(doc, {&entry}, {ex}, lookup);
    REQUIRE(counts.token[FieldLabel::Dosage].tp == 2);
    REQUIRE(counts.token[FieldLabel::Dosage].fp == 0);
    REQUIRE(counts.token[FieldLabel::Dosage].fn == 0);
  }
  SECTION("missing token counts as fn") {
    ExtractedRelations ex;
    ex.tagged[FieldLabel::Dosage] = {"81"};
    auto counts = score_relations(doc, {&entry}, {ex}, lookup);
    REQUIRE(counts.token[FieldLabel::Dosage].tp == 1);
    REQUIRE(counts.token[FieldLabel::Dosage].fn == 1);
  }
  SECTION("generated extra token attributes through the lookup") {
    ExtractedRelations ex;
    ex.generated = true;
    ex.tokens = {"81", "mg", "po"};
    auto counts = score_relations(doc, {&entry}, {ex}, lookup);
    REQUIRE(counts.token[FieldLabel::Dosage].tp == 2);
    REQUIRE(counts.token[FieldLabel::Mode].fp == 1);
  }
  SECTION("entry count mismatch") {
    REQUIRE_THROWS_AS(score_relations(doc, {&entry}, {}, lookup), EntryMismatch);
  }
}
