#pragma once

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "medner/embedding.hpp"
#include "medner/metrics.hpp"
#include "medner/ner.hpp"

namespace medner {

// Token types appearing inside annotations of each field (a type may belong
// to several fields) plus the "none" set of never-annotated types.
struct ClassPartition {
  std::map<FieldLabel, std::vector<int>> field_tokens;
  std::vector<int> none_tokens;
};

inline ClassPartition build_class_partition(const std::vector<AnnotatedDocument>& train_docs,
                                            const Vocabulary& vocab) {
  std::map<FieldLabel, std::set<int>> fields;
  std::set<int> annotated_ids, all_ids;
  for (const auto& d : train_docs) {
    for (const auto& line : d.lines)
      for (const auto& tok : line) {
        int id = vocab.id_or_unk(tok);
        if (id != Vocabulary::kUnk) all_ids.insert(id);
      }
    for (const auto& e : d.entries) {
      std::vector<const Annotation*> anns{&e.medication};
      for (const auto& a : e.related) anns.push_back(&a);
      for (const auto* a : anns)
        for (const auto& tok : d.annotation_tokens(*a)) {
          int id = vocab.id_or_unk(tok);
          if (id == Vocabulary::kUnk) continue;
          fields[a->label].insert(id);
          annotated_ids.insert(id);
        }
    }
  }
  ClassPartition part;
  for (FieldLabel f : all_fields())
    part.field_tokens[f] = std::vector<int>(fields[f].begin(), fields[f].end());
  for (int id : all_ids)
    if (!annotated_ids.count(id)) part.none_tokens.push_back(id);
  return part;
}

// mean over all unordered pairs of ||e_i - e_j||
inline double avg_euclid(const EmbeddingMatrix& E, const std::vector<int>& tokens) {
  if (tokens.size() < 2) throw TooFewWords("avg_euclid needs at least two words");
  double sum = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = i + 1; j < tokens.size(); ++j) {
      const float* a = E.row(tokens[i]);
      const float* b = E.row(tokens[j]);
      double acc = 0;
      for (int k = 0; k < E.dim; ++k) {
        const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        acc += d * d;
      }
      sum += std::sqrt(acc);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

// mean pairwise cosine similarity
inline double avg_cosine(const EmbeddingMatrix& E, const std::vector<int>& tokens) {
  if (tokens.size() < 2) throw TooFewWords("avg_cosine needs at least two words");
  std::vector<double> norms(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const float* a = E.row(tokens[i]);
    double acc = 0;
    for (int k = 0; k < E.dim; ++k) acc += static_cast<double>(a[k]) * a[k];
    norms[i] = std::sqrt(acc);
    if (norms[i] == 0) throw ZeroVector("avg_cosine: zero embedding for token id " +
                                        std::to_string(tokens[i]));
  }
  double sum = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t j = i + 1; j < tokens.size(); ++j) {
      const float* a = E.row(tokens[i]);
      const float* b = E.row(tokens[j]);
      double dot = 0;
      for (int k = 0; k < E.dim; ++k) dot += static_cast<double>(a[k]) * b[k];
      sum += dot / (norms[i] * norms[j]);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

struct IntrinsicReport {
  // per field and algorithm: average Euclidean distance / cosine similarity
  std::map<FieldLabel, double> aed_cbow, acs_cbow, aed_csg, acs_csg;
};

inline IntrinsicReport intrinsic_eval(const EmbeddingMatrix& cbow, const EmbeddingMatrix& csg,
                                      const ClassPartition& part) {
  IntrinsicReport r;
  for (FieldLabel f : all_fields()) {
    const auto& toks = part.field_tokens.at(f);
    if (toks.size() < 2) throw TooFewWords(std::string("field ") + field_name(f) +
                                           " has fewer than two word types");
    r.aed_cbow[f] = avg_euclid(cbow, toks);
    r.acs_cbow[f] = avg_cosine(cbow, toks);
    r.aed_csg[f] = avg_euclid(csg, toks);
    r.acs_csg[f] = avg_cosine(csg, toks);
  }
  return r;
}

// ---- extrinsic evaluation (Table 6 sweep) -------------------------------------

struct SweepPoint {
  EmbedAlgo algorithm = EmbedAlgo::Cbow;
  int layers = 1;
  Activation activation = Activation::Sigmoid;
  double dropout = 0.0;
  double lr = 0.01;
};

// the full explored grid: 2 algorithms x 2 layer counts x 3 activations x
// 3 dropout rates x 2 learning rates
inline std::vector<SweepPoint> default_sweep() {
  std::vector<SweepPoint> out;
  for (auto algo : {EmbedAlgo::Cbow, EmbedAlgo::Csg})
    for (int layers : {1, 2})
      for (auto act : {Activation::Tanh, Activation::Sigmoid, Activation::Relu})
        for (double d : {0.0, 0.2, 0.4})
          for (double lr : {0.001, 0.01}) out.push_back({algo, layers, act, d, lr});
  return out;
}

struct SweepCell {
  SweepPoint point;
  double f1 = 0;
};

struct SweepReport {
  std::map<FieldLabel, std::vector<SweepCell>> cells;
  std::map<FieldLabel, SweepCell> best;
};

struct SweepConfig {
  int n_train = 10000;
  int n_test = 1000;
  double positive_proportion = 0.1;
  int epochs = 5;
  int batch = 50;
  std::vector<int> hidden = {100, 100};  // truncated to the point's layer count
  int threads = 1;
};

namespace detail {

// ties break toward fewer layers, lower dropout, lower lr, CBOW first
inline bool sweep_point_preferred(const SweepCell& a, const SweepCell& b) {
  if (a.f1 != b.f1) return a.f1 > b.f1;
  if (a.point.layers != b.point.layers) return a.point.layers < b.point.layers;
  if (a.point.dropout != b.point.dropout) return a.point.dropout < b.point.dropout;
  if (a.point.lr != b.point.lr) return a.point.lr < b.point.lr;
  return a.point.algorithm == EmbedAlgo::Cbow && b.point.algorithm == EmbedAlgo::Csg;
}

inline std::vector<NerInstance> sample_word_instances(const std::vector<int>& positives,
                                                      const std::vector<int>& negatives, int n,
                                                      double p, Rng& rng) {
  const int n_pos = static_cast<int>(static_cast<double>(n) * p + 0.5);
  std::vector<NerInstance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n_pos; ++i)
    out.push_back({{positives[rng.uniform_int(positives.size())]}, 1});
  for (int i = n_pos; i < n; ++i)
    out.push_back({{negatives[rng.uniform_int(negatives.size())]}, 0});
  rng.shuffle(out);
  return out;
}

}  // namespace detail

// Context-free binary classification of sampled words, one run per sweep
// point and field; returns every cell plus the per-field argmax.
inline SweepReport extrinsic_sweep(const EmbeddingMatrix& E_cbow, const EmbeddingMatrix& E_csg,
                                   const ClassPartition& part,
                                   const std::vector<SweepPoint>& sweep, const SweepConfig& cfg,
                                   std::uint64_t seed) {
  if (cfg.positive_proportion <= 0)
    throw InsufficientClassWords("positive proportion must be positive");
  if (part.none_tokens.empty())
    throw InsufficientClassWords("no unannotated word types to sample negatives from");
  for (FieldLabel f : all_fields())
    if (part.field_tokens.at(f).empty())
      throw InsufficientClassWords(std::string("no word types for field ") + field_name(f));

  struct Job {
    FieldLabel field;
    std::size_t point_index;
  };
  std::vector<Job> jobs;
  for (FieldLabel f : all_fields())
    for (std::size_t pi = 0; pi < sweep.size(); ++pi) jobs.push_back({f, pi});

  SweepReport report;
  for (FieldLabel f : all_fields()) report.cells[f].resize(sweep.size());

  parallel_for(jobs.size(), cfg.threads, [&](std::size_t ji) {
    const auto& job = jobs[ji];
    const auto& point = sweep[job.point_index];
    const EmbeddingMatrix& E = point.algorithm == EmbedAlgo::Cbow ? E_cbow : E_csg;
    Rng rng(Rng::derive(seed, "sweep",
                        job.point_index * 16 + static_cast<std::uint64_t>(field_code(job.field))));
    auto train = detail::sample_word_instances(part.field_tokens.at(job.field), part.none_tokens,
                                               cfg.n_train, cfg.positive_proportion, rng);
    auto test = detail::sample_word_instances(part.field_tokens.at(job.field), part.none_tokens,
                                              cfg.n_test, cfg.positive_proportion, rng);
    NerConfig nc;
    nc.arch = NerArch::ContextFree;
    nc.m = E.dim;
    nc.w = 0;
    nc.hidden.assign(cfg.hidden.begin(), cfg.hidden.begin() + point.layers);
    nc.dropout = point.dropout;
    nc.lr = point.lr;
    nc.decay = 0.0;
    nc.epochs = cfg.epochs;
    nc.batch = cfg.batch;
    nc.activation = point.activation;
    FfnModel<float> model(nc, E.weights, rng.next_u64());
    model.train(train, rng.next_u64());
    auto probs = model.predict(test);
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const bool hit = probs[i] > 0.5;
      if (hit && test[i].label) ++tp;
      if (hit && !test[i].label) ++fp;
      if (!hit && test[i].label) ++fn;
    }
    report.cells[job.field][job.point_index] = {point, prf(tp, fp, fn).f1};
  });

  for (FieldLabel f : all_fields()) {
    SweepCell best = report.cells[f][0];
    for (const auto& cell : report.cells[f])
      if (detail::sweep_point_preferred(cell, best)) best = cell;
    report.best[f] = best;
  }
  return report;
}

}  // namespace medner
