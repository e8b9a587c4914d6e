#include <catch2/catch_amalgamated.hpp>

#include "medner/corpus.hpp"

using namespace medner;

namespace {

AnnotatedDocument make_doc(const std::string& id, const std::vector<std::string>& lines) {
  AnnotatedDocument d;
  d.doc_id = id;
  for (const auto& l : lines) d.lines.push_back(split_whitespace(l));
  return d;
}

Entry simple_entry(const std::string& med, TokenSpan mspan,
                   std::vector<std::pair<FieldLabel, std::pair<std::string, TokenSpan>>> rel = {}) {
  Entry e;
  e.medication = Annotation{FieldLabel::Medication, {mspan}, med};
  for (auto& [f, sv] : rel) e.related.push_back(Annotation{f, {sv.second}, sv.first});
  return e;
}

// random documents with valid annotations, for round-trip properties
AnnotatedDocument random_doc(Rng& rng, int id) {
  AnnotatedDocument d;
  d.doc_id = "r" + std::to_string(id);
  const int n_lines = 2 + static_cast<int>(rng.uniform_int(4));
  for (int l = 0; l < n_lines; ++l) {
    std::vector<std::string> line;
    const int n_tok = 3 + static_cast<int>(rng.uniform_int(6));
    for (int t = 0; t < n_tok; ++t)
      line.push_back("w" + std::to_string(rng.uniform_int(50)));
    d.lines.push_back(line);
  }
  const int n_entries = 1 + static_cast<int>(rng.uniform_int(3));
  for (int e = 0; e < n_entries; ++e) {
    int line = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_lines)));
    int len = static_cast<int>(d.lines[static_cast<std::size_t>(line - 1)].size());
    int start = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(len)));
    int end = std::min(len - 1, start + static_cast<int>(rng.uniform_int(2)));
    TokenSpan ms{line, start, end};
    Entry entry;
    entry.medication = Annotation{FieldLabel::Medication, {ms}, join(d.span_tokens(ms), " ")};
    if (rng.bernoulli(0.7)) {
      int rl = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_lines)));
      int rlen = static_cast<int>(d.lines[static_cast<std::size_t>(rl - 1)].size());
      int rs = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(rlen)));
      TokenSpan span{rl, rs, rs};
      FieldLabel f = all_fields()[1 + rng.uniform_int(5)];
      entry.related.push_back(Annotation{f, {span}, join(d.span_tokens(span), " ")});
    }
    d.entries.push_back(entry);
  }
  return d;
}

}  // namespace

TEST_CASE("field codes follow the 1..6 coding with 0 for none") {
  REQUIRE(field_code(FieldLabel::None) == 0);
  REQUIRE(field_code(FieldLabel::Medication) == 1);
  REQUIRE(field_code(FieldLabel::Dosage) == 2);
  REQUIRE(field_code(FieldLabel::Mode) == 3);
  REQUIRE(field_code(FieldLabel::Frequency) == 4);
  REQUIRE(field_code(FieldLabel::Duration) == 5);
  REQUIRE(field_code(FieldLabel::Reason) == 6);
  for (int c = 0; c <= 6; ++c) REQUIRE(field_code(field_from_code(c)) == c);
}

TEST_CASE("parse_i2b2 resolves offsets against the document") {
  const std::string doc_text = "first line here\nsecond line\naspirin po daily\n";
  const std::string ann =
      "m=\"aspirin\" 3:0 3:0||do=\"nm\"||mo=\"po\" 3:1 3:1||f=\"nm\"||du=\"nm\"||r=\"nm\"\n";
  auto doc = parse_i2b2(doc_text, ann, "d1");
  REQUIRE(doc.entries.size() == 1);
  const auto& e = doc.entries[0];
  REQUIRE(e.medication.surface == "aspirin");
  REQUIRE(e.medication.spans == std::vector<TokenSpan>{{3, 0, 0}});
  REQUIRE(e.related.size() == 1);
  REQUIRE(e.related[0].label == FieldLabel::Mode);
  REQUIRE(e.related[0].surface == "po");
  REQUIRE(e.related[0].spans == std::vector<TokenSpan>{{3, 1, 1}});
  REQUIRE(doc.annotation_tokens(e.medication) == std::vector<std::string>{"aspirin"});
}

TEST_CASE("empty annotation text yields zero entries") {
  auto doc = parse_i2b2("a b c\n", "", "d2");
  REQUIRE(doc.entries.empty());
  REQUIRE(doc.lines.size() == 1);
}

TEST_CASE("out of range spans raise SpanOutOfBounds") {
  const std::string ann = "m=\"x\" 99:0 99:0||do=\"nm\"||mo=\"nm\"||f=\"nm\"||du=\"nm\"||r=\"nm\"\n";
  REQUIRE_THROWS_AS(parse_i2b2("a b\nc d\n", ann, "d3"), SpanOutOfBounds);
}

TEST_CASE("grammar violations raise MalformedAnnotation with the line number") {
  REQUIRE_THROWS_AS(parse_i2b2("a b\n", "zz=\"a\" 1:0 1:0\n", "d"), MalformedAnnotation);
  REQUIRE_THROWS_AS(parse_i2b2("a b\n", "m=aspirin 1:0 1:0\n", "d"), MalformedAnnotation);
  REQUIRE_THROWS_AS(parse_i2b2("a b\n", "m=\"a\" 1:0\n", "d"), MalformedAnnotation);
  REQUIRE_THROWS_AS(parse_i2b2("a b\n", "do=\"a\" 1:0 1:0\n", "d"), MalformedAnnotation);
  try {
    parse_i2b2("a b\n", "m=\"a\" 1:0 1:0\nm=\"b\" 1:zz 1:0\n", "d");
    FAIL("expected MalformedAnnotation");
  } catch (const MalformedAnnotation& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("serialize then parse round-trips documents") {
  Rng rng(404);
  for (int i = 0; i < 50; ++i) {
    auto doc = random_doc(rng, i);
    auto text = serialize_doc_text(doc);
    auto ann = serialize_ann_text(doc);
    auto back = parse_i2b2(text, ann, doc.doc_id);
    back.source_year = doc.source_year;
    REQUIRE(back == doc);
  }
}

TEST_CASE("dedup keeps the first occurrence of identical content") {
  auto d1 = make_doc("a", {"hello world"});
  auto d2 = make_doc("b", {"hello   world"});  // same after whitespace normalization
  d1.source_year = 2007;
  d2.source_year = 2008;
  auto pool = dedup_pool({{2007, {d1}}, {2008, {d2}}});
  REQUIRE(pool.size() == 1);
  REQUIRE(pool.unannotated[0].doc_id == "a");
  REQUIRE(pool.per_year[1].unique_unannotated == 0);
}

TEST_CASE("dedup is idempotent") {
  Rng rng(7);
  std::vector<AnnotatedDocument> docs;
  for (int i = 0; i < 20; ++i) {
    auto d = random_doc(rng, i);
    d.source_year = 2007 + i % 3;
    docs.push_back(d);
  }
  docs.push_back(docs[3]);  // duplicate
  std::vector<std::pair<int, std::vector<AnnotatedDocument>>> corpora(3);
  for (int y = 0; y < 3; ++y) corpora[static_cast<std::size_t>(y)].first = 2007 + y;
  for (auto& d : docs)
    corpora[static_cast<std::size_t>(*d.source_year - 2007)].second.push_back(d);
  auto pool = dedup_pool(corpora);
  auto pool2 = dedup_pool(pool.as_corpora());
  REQUIRE(pool.size() == pool2.size());
  REQUIRE(pool.annotated.size() == pool2.annotated.size());
}

TEST_CASE("dedup at the published scale: 7889 totals reduce to 4347 + 258") {
  // per year: (total, unique unannotated, unique annotated)
  const std::vector<std::array<int, 4>> table = {
      {2007, 2886, 926, 0},  {2008, 1267, 1237, 0}, {2009, 1945, 991, 258},
      {2010, 696, 694, 0},   {2011, 424, 188, 0},   {2012, 671, 311, 0},
  };
  std::vector<std::pair<int, std::vector<AnnotatedDocument>>> corpora;
  std::vector<AnnotatedDocument> seen;  // sources for duplicate content
  int counter = 0;
  for (const auto& [year, total, uniq_un, uniq_ann] : table) {
    std::vector<AnnotatedDocument> docs;
    for (int i = 0; i < uniq_un; ++i) {
      auto d = make_doc("u" + std::to_string(counter), {"note " + std::to_string(counter)});
      ++counter;
      d.source_year = year;
      docs.push_back(d);
      seen.push_back(d);
    }
    for (int i = 0; i < uniq_ann; ++i) {
      auto d = make_doc("a" + std::to_string(counter),
                        {"took aspirin" + std::to_string(counter) + " today"});
      ++counter;
      d.source_year = year;
      d.entries.push_back(simple_entry("aspirin" + std::to_string(counter - 1), {1, 1, 1}));
      docs.push_back(d);
      seen.push_back(d);
    }
    int dups = total - uniq_un - uniq_ann;
    for (int i = 0; i < dups; ++i) {
      auto d = seen[static_cast<std::size_t>(i) % seen.size()];
      d.doc_id = "dup" + std::to_string(counter++);
      d.source_year = year;
      docs.push_back(d);
    }
    corpora.emplace_back(year, std::move(docs));
  }
  auto pool = dedup_pool(corpora);
  REQUIRE(pool.unannotated.size() == 4347);
  REQUIRE(pool.annotated.size() == 258);
  REQUIRE(pool.size() == 4605);
  int total_docs = 0;
  for (const auto& c : pool.per_year) total_docs += c.total;
  REQUIRE(total_docs == 7889);
}

TEST_CASE("split_corpus produces the configured partition") {
  Rng rng(5);
  CorpusPool pool;
  for (int i = 0; i < 258; ++i) {
    auto d = random_doc(rng, i);
    d.doc_id = "ann" + std::to_string(i);
    pool.annotated.push_back(d);
  }
  for (int i = 0; i < 100; ++i) pool.unannotated.push_back(make_doc("un" + std::to_string(i), {"x y"}));

  auto split = split_corpus(pool, {238, 10, 10}, 42);
  REQUIRE(split.model_train.size() == 238);
  REQUIRE(split.validation.size() == 10);
  REQUIRE(split.test.size() == 10);
  REQUIRE(split.embedding_train.size() == 100);

  // pairwise disjoint and covering
  std::set<std::string> all;
  for (const auto* s : {&split.embedding_train, &split.model_train, &split.validation, &split.test})
    for (const auto& id : *s) REQUIRE(all.insert(id).second);
  REQUIRE(all.size() == pool.size());

  auto split2 = split_corpus(pool, {238, 10, 10}, 42);
  REQUIRE(split.validation == split2.validation);
  REQUIRE(split.test == split2.test);
  REQUIRE(split.model_train == split2.model_train);

  REQUIRE_THROWS_AS(split_corpus(pool, {300, 10, 10}, 1), InsufficientDocuments);
}

TEST_CASE("leftover annotated documents join embedding_train") {
  Rng rng(6);
  CorpusPool pool;
  for (int i = 0; i < 20; ++i) {
    auto d = random_doc(rng, i);
    d.doc_id = "ann" + std::to_string(i);
    pool.annotated.push_back(d);
  }
  auto split = split_corpus(pool, {10, 2, 2}, 9);
  REQUIRE(split.embedding_train.size() == 6);
}

TEST_CASE("corpus_metrics hand-counted example") {
  auto d = make_doc("m1", {"gave baby aspirin 81 mg"});
  Entry e;
  e.medication = Annotation{FieldLabel::Medication, {{1, 1, 2}}, "baby aspirin"};
  e.related.push_back(Annotation{FieldLabel::Dosage, {{1, 3, 3}}, "81"});
  d.entries.push_back(e);
  auto r = corpus_metrics({d});
  REQUIRE(r.documents == 1);
  REQUIRE(r.entries == 1);
  REQUIRE(r.phrases == 2);
  REQUIRE(r.tokens == 3);
  REQUIRE(r.mean_tokens_per_phrase == Catch::Approx(1.5));
  REQUIRE(r.mean_phrases_per_entry == Catch::Approx(2.0));
  REQUIRE(r.target_vocabulary == 3);
}

TEST_CASE("corpus_metrics of an empty list is all zero") {
  auto r = corpus_metrics({});
  REQUIRE(r.documents == 0);
  REQUIRE(r.entries == 0);
  REQUIRE(r.phrases == 0);
  REQUIRE(r.tokens == 0);
  REQUIRE(r.mean_tokens_per_entry == 0.0);
}

TEST_CASE("corpus_metrics totals equal a brute-force recount") {
  Rng rng(31);
  std::vector<AnnotatedDocument> docs;
  for (int i = 0; i < 40; ++i) docs.push_back(random_doc(rng, i));
  auto r = corpus_metrics(docs);
  long entries = 0, phrases = 0, tokens = 0;
  for (const auto& d : docs)
    for (const auto& e : d.entries) {
      ++entries;
      ++phrases;
      for (const auto& s : e.medication.spans) tokens += s.length();
      for (const auto& a : e.related) {
        ++phrases;
        for (const auto& s : a.spans) tokens += s.length();
      }
    }
  REQUIRE(r.entries == entries);
  REQUIRE(r.phrases == phrases);
  REQUIRE(r.tokens == tokens);
}

TEST_CASE("label_metrics reports medication at 100 percent and hand-counted shares") {
  auto d = make_doc("l1", {"took aspirin 81 mg", "also tylenol"});
  Entry e1;
  e1.medication = Annotation{FieldLabel::Medication, {{1, 1, 1}}, "aspirin"};
  e1.related.push_back(Annotation{FieldLabel::Dosage, {{1, 2, 3}}, "81 mg"});
  Entry e2;
  e2.medication = Annotation{FieldLabel::Medication, {{2, 1, 1}}, "tylenol"};
  d.entries = {e1, e2};
  auto r = label_metrics({d});
  REQUIRE(r.percent[FieldLabel::Medication] == Catch::Approx(100.0));
  REQUIRE(r.percent[FieldLabel::Dosage] == Catch::Approx(50.0));
  REQUIRE(r.percent[FieldLabel::Reason] == Catch::Approx(0.0));
}
