#include <catch2/catch_amalgamated.hpp>

#include "medner/embed_eval.hpp"

using namespace medner;

namespace {

EmbeddingMatrix matrix_from(std::vector<std::vector<float>> rows) {
  EmbeddingMatrix E;
  E.dim = static_cast<int>(rows[0].size());
  E.weights = Tensor<float>({static_cast<std::int64_t>(rows.size()), E.dim});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < E.dim; ++j) E.weights.at(static_cast<std::int64_t>(i), j) = rows[i][j];
  return E;
}

// independent brute-force implementations for the metric oracle
double brute_euclid(const EmbeddingMatrix& E, const std::vector<int>& ids) {
  double total = 0;
  int n = 0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j <= i) continue;
      double acc = 0;
      for (int k = 0; k < E.dim; ++k) {
        double d = E.row(ids[i])[k] - E.row(ids[j])[k];
        acc += d * d;
      }
      total += std::sqrt(acc);
      n++;
    }
  return total / n;
}

double brute_cosine(const EmbeddingMatrix& E, const std::vector<int>& ids) {
  double total = 0;
  int n = 0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j <= i) continue;
      double dot = 0, na = 0, nb = 0;
      for (int k = 0; k < E.dim; ++k) {
        dot += static_cast<double>(E.row(ids[i])[k]) * E.row(ids[j])[k];
        na += static_cast<double>(E.row(ids[i])[k]) * E.row(ids[i])[k];
        nb += static_cast<double>(E.row(ids[j])[k]) * E.row(ids[j])[k];
      }
      total += dot / std::sqrt(na * nb);
      n++;
    }
  return total / n;
}

}  // namespace

TEST_CASE("avg_euclid hand-checked values") {
  auto E = matrix_from({{0, 0}, {3, 4}, {3, 4}});
  REQUIRE(avg_euclid(E, {1, 2}) == Catch::Approx(0.0));
  REQUIRE(avg_euclid(E, {0, 1, 2}) == Catch::Approx(10.0 / 3).epsilon(1e-9));
  REQUIRE_THROWS_AS(avg_euclid(E, {0}), TooFewWords);
}

TEST_CASE("avg_cosine hand-checked values") {
  float r = static_cast<float>(1.0 / std::sqrt(2.0));
  auto E = matrix_from({{1, 0}, {0, 1}, {r, r}, {2, 0}, {0, 0}});
  REQUIRE(avg_cosine(E, {0, 3}) == Catch::Approx(1.0).epsilon(1e-6));
  REQUIRE(avg_cosine(E, {0, 1}) == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(avg_cosine(E, {0, 1, 2}) == Catch::Approx((0.0 + r + r) / 3).epsilon(1e-6));
  REQUIRE_THROWS_AS(avg_cosine(E, {0, 4}), ZeroVector);
  REQUIRE_THROWS_AS(avg_cosine(E, {0}), TooFewWords);
}

TEST_CASE("pairwise means agree with brute force and are invariant") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4 + static_cast<int>(rng.uniform_int(8));
    const int m = 3 + static_cast<int>(rng.uniform_int(5));
    EmbeddingMatrix E;
    E.dim = m;
    E.weights = Tensor<float>::uniform({n, m}, rng, -2, 2);
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) ids.push_back(i);
    REQUIRE(avg_euclid(E, ids) == Catch::Approx(brute_euclid(E, ids)).margin(1e-9));
    REQUIRE(avg_cosine(E, ids) == Catch::Approx(brute_cosine(E, ids)).margin(1e-9));

    // translation invariance of distances, scale invariance of cosine
    EmbeddingMatrix shifted = E;
    EmbeddingMatrix scaled = E;
    for (std::int64_t i = 0; i < E.weights.size(); ++i) {
      shifted.weights[i] += 3.25f;
      scaled.weights[i] *= 2.5f;
    }
    double base_euclid = avg_euclid(E, ids);
    bool has_zero = false;
    for (int id : ids) {
      double norm = 0;
      for (int k = 0; k < m; ++k) norm += static_cast<double>(E.row(id)[k]) * E.row(id)[k];
      has_zero |= norm == 0;
    }
    REQUIRE(avg_euclid(shifted, ids) == Catch::Approx(base_euclid).margin(1e-5));
    if (!has_zero)
      REQUIRE(avg_cosine(scaled, ids) == Catch::Approx(avg_cosine(E, ids)).margin(1e-6));
  }
}

TEST_CASE("class partition separates annotated and none types") {
  AnnotatedDocument d;
  d.doc_id = "p";
  d.lines = {{"took", "aspirin", "81", "mg", "po"}};
  Entry e;
  e.medication = Annotation{FieldLabel::Medication, {{1, 1, 1}}, "aspirin"};
  e.related.push_back(Annotation{FieldLabel::Dosage, {{1, 2, 3}}, "81 mg"});
  d.entries.push_back(e);

  auto vocab = build_vocab({d}, {});
  auto part = build_class_partition({d}, vocab);
  REQUIRE(part.field_tokens[FieldLabel::Medication] == std::vector<int>{vocab.id_of("aspirin")});
  REQUIRE(part.field_tokens[FieldLabel::Dosage].size() == 2);
  // "took" and "po" are never annotated
  REQUIRE(part.none_tokens.size() == 2);
}

TEST_CASE("sweep on separable toy embeddings reaches high F1 and is deterministic") {
  // positives near +1^m, negatives near -1^m
  Rng rng(4);
  const int m = 8, n_pos = 30, n_neg = 120;
  EmbeddingMatrix E;
  E.dim = m;
  E.weights = Tensor<float>({4 + n_pos + n_neg, m});
  ClassPartition part;
  for (int i = 0; i < n_pos; ++i) {
    int id = 4 + i;
    for (int j = 0; j < m; ++j)
      E.weights.at(id, j) = 1.0f + 0.1f * static_cast<float>(rng.normal());
    for (FieldLabel f : all_fields()) part.field_tokens[f].push_back(id);
  }
  for (int i = 0; i < n_neg; ++i) {
    int id = 4 + n_pos + i;
    for (int j = 0; j < m; ++j)
      E.weights.at(id, j) = -1.0f + 0.1f * static_cast<float>(rng.normal());
    part.none_tokens.push_back(id);
  }

  std::vector<SweepPoint> sweep = {
      {EmbedAlgo::Cbow, 1, Activation::Sigmoid, 0.0, 0.01},
      {EmbedAlgo::Csg, 2, Activation::Relu, 0.2, 0.01},
  };
  SweepConfig cfg;
  cfg.n_train = 800;
  cfg.n_test = 200;
  cfg.hidden = {16, 16};
  cfg.threads = 2;
  auto report = extrinsic_sweep(E, E, part, sweep, cfg, 5);
  for (FieldLabel f : all_fields()) {
    REQUIRE(report.cells[f].size() == 2);
    for (const auto& cell : report.cells[f]) {
      INFO(field_name(f) << " lr " << cell.point.lr);
      REQUIRE(cell.f1 >= 0.99);
    }
  }
  auto report2 = extrinsic_sweep(E, E, part, sweep, cfg, 5);
  for (FieldLabel f : all_fields()) {
    REQUIRE(report.best[f].f1 == report2.best[f].f1);
    REQUIRE(report.best[f].point.layers == report2.best[f].point.layers);
    for (std::size_t i = 0; i < report.cells[f].size(); ++i)
      REQUIRE(report.cells[f][i].f1 == report2.cells[f][i].f1);
  }

  SweepConfig bad = cfg;
  bad.positive_proportion = 0.0;
  REQUIRE_THROWS_AS(extrinsic_sweep(E, E, part, sweep, bad, 5), InsufficientClassWords);

  ClassPartition empty_part = part;
  empty_part.field_tokens[FieldLabel::Reason].clear();
  REQUIRE_THROWS_AS(extrinsic_sweep(E, E, empty_part, sweep, cfg, 5), InsufficientClassWords);
}

TEST_CASE("sweep tie-breaking prefers fewer layers then lower dropout") {
  SweepCell a{{EmbedAlgo::Csg, 1, Activation::Tanh, 0.2, 0.01}, 0.9};
  SweepCell b{{EmbedAlgo::Cbow, 2, Activation::Tanh, 0.0, 0.001}, 0.9};
  REQUIRE(detail::sweep_point_preferred(a, b));
  SweepCell c{{EmbedAlgo::Cbow, 1, Activation::Tanh, 0.0, 0.01}, 0.9};
  REQUIRE(detail::sweep_point_preferred(c, a));
}
