#include <catch2/catch_amalgamated.hpp>

#include "medner/preprocess.hpp"

using namespace medner;

namespace {

AnnotatedDocument doc_from(const std::vector<std::string>& lines) {
  AnnotatedDocument d;
  d.doc_id = "p";
  for (const auto& l : lines) d.lines.push_back(split_whitespace(l));
  return d;
}

}  // namespace

TEST_CASE("sentence boundary after dot followed by a capital") {
  auto d = doc_from({"Took aspirin. Then slept"});
  auto map = split_sentences(d);
  REQUIRE(map.starts[0] == std::vector<int>{0, 2});
  REQUIRE(map.sentence_index(0, 1) == 0);
  REQUIRE(map.sentence_index(0, 2) == 1);
  auto [b, e] = map.sentence_range(0, 3, 4);
  REQUIRE(b == 2);
  REQUIRE(e == 4);
}

TEST_CASE("decimal point is not a sentence boundary") {
  auto d = doc_from({"took 2.5 mg"});
  auto map = split_sentences(d);
  REQUIRE(map.starts[0] == std::vector<int>{0});
}

TEST_CASE("single-token line is one sentence") {
  auto d = doc_from({"aspirin"});
  auto map = split_sentences(d);
  REQUIRE(map.starts[0] == std::vector<int>{0});
}

TEST_CASE("normalize_token applies the documented rules") {
  REQUIRE(normalize_token("Took") == "took");
  REQUIRE(normalize_token("2.0") == "<num>");
  REQUIRE(normalize_token("81") == "<num>");
  REQUIRE(normalize_token("1/2") == "<num>");
  REQUIRE(normalize_token("8:00") == "<num>");
  REQUIRE(normalize_token("-5") == "<num>");
  REQUIRE(normalize_token("2.") == "<num>");
  REQUIRE(normalize_token(".5") == "<num>");
  REQUIRE(normalize_token("mgs") == "mgs");
  REQUIRE(normalize_token("PO.") == "po");      // '.' not letter-surrounded, not after a digit
  REQUIRE(normalize_token("q.i.d") == "q.i.d"); // letter-surrounded dots are kept
  REQUIRE(normalize_token("hello") == "hello");
  REQUIRE(normalize_token("a:5") == "a5");
  REQUIRE(normalize_token("<num>") == "<num>");
}

TEST_CASE("normalize_tokens preserves token counts and refreshes surfaces") {
  auto d = doc_from({"Took 2.0 mgs PO.", "q.i.d as needed"});
  Entry e;
  e.medication = Annotation{FieldLabel::Medication, {{1, 2, 2}}, "mgs"};
  e.related.push_back(Annotation{FieldLabel::Dosage, {{1, 1, 1}}, "2.0"});
  d.entries.push_back(e);
  auto n = normalize_tokens(d);
  REQUIRE(n.lines[0] == std::vector<std::string>{"took", "<num>", "mgs", "po"});
  REQUIRE(n.lines[1] == std::vector<std::string>{"q.i.d", "as", "needed"});
  REQUIRE(n.lines[0].size() == d.lines[0].size());
  REQUIRE(n.entries[0].related[0].surface == "<num>");
  REQUIRE(n.entries[0].medication.surface == "mgs");
  REQUIRE(n.entries[0].medication.spans == d.entries[0].medication.spans);
}

TEST_CASE("normalization is idempotent on random junk tokens") {
  Rng rng(55);
  const std::string alphabet = "aBc123.:;/-+<>,";
  for (int i = 0; i < 5000; ++i) {
    std::string t;
    const int len = 1 + static_cast<int>(rng.uniform_int(8));
    for (int k = 0; k < len; ++k) t += alphabet[rng.uniform_int(alphabet.size())];
    auto once = normalize_token(t);
    auto twice = normalize_token(once);
    INFO("token '" << t << "' -> '" << once << "' -> '" << twice << "'");
    REQUIRE(once == twice);
  }
}

TEST_CASE("oov_count is type-level") {
  struct Vocab {
    bool contains(const std::string& t) const { return t == "a" || t == "b" || t == "<num>"; }
  } vocab;
  auto d1 = doc_from({"a c c"});
  REQUIRE(oov_count({d1}, vocab) == 1);
  auto d2 = doc_from({"a b a"});
  REQUIRE(oov_count({d2}, vocab) == 0);
  auto d3 = doc_from({"<num>"});
  REQUIRE(oov_count({d3}, vocab) == 0);
}
