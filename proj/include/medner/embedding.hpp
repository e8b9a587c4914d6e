#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "medner/preprocess.hpp"
#include "medner/tensor.hpp"

namespace medner {

// Token table with dense ids. Reserved entries occupy the first four ids.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kNum = 1;
  static constexpr int kUnk = 2;
  static constexpr int kEndOfOutput = 3;

  static const std::string& pad_token() {
    static const std::string t = "PAD";
    return t;
  }
  static const std::string& unk_token() {
    static const std::string t = "<unk>";
    return t;
  }
  static const std::string& end_of_output_token() {
    static const std::string t = "<end-of-output>";
    return t;
  }

  Vocabulary() {
    add(pad_token());
    add(kNumToken);
    add(unk_token());
    add(end_of_output_token());
    counts_.assign(4, 0);  // reserved tokens carry no corpus counts by default
  }

  int add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    ids_.emplace(token, id);
    tokens_.push_back(token);
    counts_.push_back(0);
    return id;
  }

  int add_occurrence(const std::string& token) {
    int id = add(token);
    counts_[static_cast<std::size_t>(id)] += 1;
    return id;
  }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  int id_or_unk(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  int id_of(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw ConfigInvalid("token not in vocabulary: " + token);
    return it->second;
  }

  const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
  long count(int id) const { return counts_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> tokens_;
  std::vector<long> counts_;
};

// Vocabulary over the embedding and model-train texts; held-out words stay
// out and resolve to <unk> downstream.
inline Vocabulary build_vocab(const std::vector<AnnotatedDocument>& embedding_docs,
                              const std::vector<AnnotatedDocument>& train_docs) {
  Vocabulary vocab;
  for (const auto* docs : {&embedding_docs, &train_docs})
    for (const auto& d : *docs)
      for (const auto& line : d.lines)
        for (const auto& tok : line) vocab.add_occurrence(tok);
  return vocab;
}

enum class EmbedAlgo { Cbow, Csg };

inline const char* embed_algo_name(EmbedAlgo a) { return a == EmbedAlgo::Cbow ? "cbow" : "csg"; }

struct EmbeddingMatrix {
  Tensor<float> weights;  // V x m
  int dim = 0;
  EmbedAlgo algorithm = EmbedAlgo::Cbow;
  double lr0 = 0.025;
  double lr_min = 0.0001;
  int epochs = 5;
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;  // mean per epoch, filled by training

  std::int64_t vocab_size() const { return weights.rank() ? weights.dim(0) : 0; }
  const float* row(int id) const { return weights.data() + static_cast<std::int64_t>(id) * dim; }
};

// Fixed-length context around a center token; PAD marks positions outside
// the center's sentence.
struct ContextWindow {
  int center = Vocabulary::kPad;
  std::vector<int> context;  // size window-1, PAD-filled
};

inline std::vector<ContextWindow> make_windows(const std::vector<AnnotatedDocument>& docs,
                                               const std::vector<SentenceMap>& maps,
                                               const Vocabulary& vocab, int size = 11) {
  if (size < 1 || size % 2 == 0) throw ConfigInvalid("window size must be odd");
  const int half = size / 2;
  std::vector<ContextWindow> out;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    const auto& doc = docs[di];
    const auto& map = maps[di];
    for (std::size_t li = 0; li < doc.lines.size(); ++li) {
      const auto& line = doc.lines[li];
      const int len = static_cast<int>(line.size());
      for (int t = 0; t < len; ++t) {
        auto [sb, se] = map.sentence_range(static_cast<int>(li), t, len);
        ContextWindow w;
        w.center = vocab.id_or_unk(line[static_cast<std::size_t>(t)]);
        w.context.reserve(static_cast<std::size_t>(size) - 1);
        for (int k = t - half; k <= t + half; ++k) {
          if (k == t) continue;
          if (k < sb || k >= se)
            w.context.push_back(Vocabulary::kPad);
          else
            w.context.push_back(vocab.id_or_unk(line[static_cast<std::size_t>(k)]));
        }
        out.push_back(std::move(w));
      }
    }
  }
  return out;
}

struct EmbedTrainConfig {
  int dim = 100;
  double lr0 = 0.025;
  double lr_min = 0.0001;
  int epochs = 5;
  int negatives = 5;       // 0 selects the full-softmax path
  bool paper_init = true;  // Gaussian(0,1); false: uniform +/-0.5/m
  std::uint64_t seed = 1;
};

namespace detail {

// unigram^(3/4) sampling distribution as a cumulative table
class UnigramTable {
 public:
  UnigramTable(const Vocabulary& vocab) {
    cdf_.resize(static_cast<std::size_t>(vocab.size()));
    double acc = 0;
    for (int i = 0; i < vocab.size(); ++i) {
      acc += std::pow(static_cast<double>(vocab.count(i)), 0.75);
      cdf_[static_cast<std::size_t>(i)] = acc;
    }
    total_ = acc;
  }

  bool empty() const { return total_ <= 0; }

  int draw(Rng& rng) const {
    const double u = rng.uniform() * total_;
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
  double total_ = 0;
};

inline double stable_sigmoid(double z) {
  if (z > 30) z = 30;
  if (z < -30) z = -30;
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace detail

namespace detail {

// Shared CBOW/CSG trainer. CBOW averages the context and predicts the
// center; CSG predicts each non-PAD context word from the center.
inline EmbeddingMatrix train_word2vec(const std::vector<ContextWindow>& windows,
                                      const Vocabulary& vocab, const EmbedTrainConfig& cfg,
                                      EmbedAlgo algo) {
  if (windows.empty() && cfg.epochs > 0) throw EmptyWindowStream("no context windows to train on");
  const int V = vocab.size();
  const int m = cfg.dim;
  if (m < 1) throw ConfigInvalid("embedding dim must be >= 1");

  EmbeddingMatrix E;
  E.dim = m;
  E.algorithm = algo;
  E.lr0 = cfg.lr0;
  E.lr_min = cfg.lr_min;
  E.epochs = cfg.epochs;
  E.seed = cfg.seed;

  Rng init_rng(Rng::derive(cfg.seed, "embeddings/init"));
  E.weights = Tensor<float>({V, m});
  for (int i = 0; i < V; ++i) {
    if (i == Vocabulary::kPad) continue;  // PAD row stays zero and is never updated
    for (int j = 0; j < m; ++j)
      E.weights[static_cast<std::int64_t>(i) * m + j] =
          cfg.paper_init ? static_cast<float>(init_rng.normal())
                         : static_cast<float>(init_rng.uniform(-0.5 / m, 0.5 / m));
  }
  if (cfg.epochs == 0) return E;

  std::vector<float> syn1(static_cast<std::size_t>(V) * static_cast<std::size_t>(m), 0.0f);
  UnigramTable table(vocab);
  Rng rng(Rng::derive(cfg.seed, "embeddings/train"));

  // one update per window (CBOW) or per (window, context word) (CSG); lr
  // decays linearly over all window visits
  const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(windows.size());
  double step = 0;
  std::vector<double> h(static_cast<std::size_t>(m));
  std::vector<double> neu1e(static_cast<std::size_t>(m));
  std::vector<int> ctx;

  auto neg_sample_update = [&](float* input_row, int positive, double lr, double scale_in,
                               double& loss, long& terms) {
    std::fill(neu1e.begin(), neu1e.end(), 0.0);
    const int rounds = cfg.negatives + 1;
    for (int r = 0; r < rounds; ++r) {
      int target;
      double label;
      if (r == 0) {
        target = positive;
        label = 1.0;
      } else {
        if (table.empty()) break;
        target = table.draw(rng);
        if (target == positive) continue;
        label = 0.0;
      }
      float* w = syn1.data() + static_cast<std::size_t>(target) * static_cast<std::size_t>(m);
      double z = 0;
      for (int j = 0; j < m; ++j) z += h[static_cast<std::size_t>(j)] * w[j];
      const double p = stable_sigmoid(z);
      loss += label > 0.5 ? -std::log(std::max(p, 1e-12)) : -std::log(std::max(1.0 - p, 1e-12));
      ++terms;
      const double g = (label - p) * lr;
      for (int j = 0; j < m; ++j) {
        neu1e[static_cast<std::size_t>(j)] += g * w[j];
        w[j] += static_cast<float>(g * h[static_cast<std::size_t>(j)]);
      }
    }
    for (int j = 0; j < m; ++j)
      input_row[j] += static_cast<float>(neu1e[static_cast<std::size_t>(j)] * scale_in);
  };

  auto softmax_update = [&](float* input_row, int positive, double lr, double scale_in,
                            double& loss, long& terms) {
    // full-softmax path for tiny-vocabulary oracle tests
    std::vector<double> z(static_cast<std::size_t>(V));
    double mx = -1e300;
    for (int t = 0; t < V; ++t) {
      const float* w = syn1.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(m);
      double acc = 0;
      for (int j = 0; j < m; ++j) acc += h[static_cast<std::size_t>(j)] * w[j];
      z[static_cast<std::size_t>(t)] = acc;
      mx = std::max(mx, acc);
    }
    double sum = 0;
    for (auto& v : z) {
      v = std::exp(v - mx);
      sum += v;
    }
    loss += -std::log(std::max(z[static_cast<std::size_t>(positive)] / sum, 1e-300));
    ++terms;
    std::fill(neu1e.begin(), neu1e.end(), 0.0);
    for (int t = 0; t < V; ++t) {
      const double p = z[static_cast<std::size_t>(t)] / sum;
      const double g = ((t == positive ? 1.0 : 0.0) - p) * lr;
      float* w = syn1.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(m);
      for (int j = 0; j < m; ++j) {
        neu1e[static_cast<std::size_t>(j)] += g * w[j];
        w[j] += static_cast<float>(g * h[static_cast<std::size_t>(j)]);
      }
    }
    for (int j = 0; j < m; ++j)
      input_row[j] += static_cast<float>(neu1e[static_cast<std::size_t>(j)] * scale_in);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0;
    long terms = 0;
    for (const auto& win : windows) {
      const double frac = step / std::max(total_steps, 1.0);
      const double lr = std::max(cfg.lr0 - (cfg.lr0 - cfg.lr_min) * frac, cfg.lr_min);
      step += 1;

      ctx.clear();
      for (int c : win.context)
        if (c != Vocabulary::kPad) ctx.push_back(c);
      if (ctx.empty()) continue;

      if (algo == EmbedAlgo::Cbow) {
        std::fill(h.begin(), h.end(), 0.0);
        for (int c : ctx) {
          const float* row = E.weights.data() + static_cast<std::int64_t>(c) * m;
          for (int j = 0; j < m; ++j) h[static_cast<std::size_t>(j)] += row[j];
        }
        const double inv = 1.0 / static_cast<double>(ctx.size());
        for (auto& v : h) v *= inv;
        // gradient of the mean distributes 1/n to each context row; the
        // update lands in a scratch row first, then scatters
        std::vector<float> scratch(static_cast<std::size_t>(m), 0.0f);
        if (cfg.negatives > 0)
          neg_sample_update(scratch.data(), win.center, lr, 1.0, loss, terms);
        else
          softmax_update(scratch.data(), win.center, lr, 1.0, loss, terms);
        for (int c : ctx) {
          float* row = E.weights.data() + static_cast<std::int64_t>(c) * m;
          for (int j = 0; j < m; ++j) row[j] += scratch[static_cast<std::size_t>(j)] * static_cast<float>(inv);
        }
      } else {
        float* center_row = E.weights.data() + static_cast<std::int64_t>(win.center) * m;
        for (int c : ctx) {
          for (int j = 0; j < m; ++j) h[static_cast<std::size_t>(j)] = center_row[j];
          if (cfg.negatives > 0)
            neg_sample_update(center_row, c, lr, 1.0, loss, terms);
          else
            softmax_update(center_row, c, lr, 1.0, loss, terms);
        }
      }
    }
    E.epoch_loss.push_back(terms ? loss / static_cast<double>(terms) : 0.0);
  }
  if (!E.weights.all_finite()) throw NonFiniteValue("embedding training diverged");
  return E;
}

}  // namespace detail

inline EmbeddingMatrix train_cbow(const std::vector<ContextWindow>& windows,
                                  const Vocabulary& vocab, const EmbedTrainConfig& cfg) {
  return detail::train_word2vec(windows, vocab, cfg, EmbedAlgo::Cbow);
}

inline EmbeddingMatrix train_csg(const std::vector<ContextWindow>& windows,
                                 const Vocabulary& vocab, const EmbedTrainConfig& cfg) {
  return detail::train_word2vec(windows, vocab, cfg, EmbedAlgo::Csg);
}

// Sets the <unk> row to the mean of all trained (non-reserved) rows so that
// out-of-vocabulary tokens map to a distribution-centered vector.
inline void set_unk_to_mean(EmbeddingMatrix& E) {
  const std::int64_t V = E.vocab_size();
  const int m = E.dim;
  if (V <= 4) return;
  std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
  for (std::int64_t i = 4; i < V; ++i)
    for (int j = 0; j < m; ++j) mean[static_cast<std::size_t>(j)] += E.weights[i * m + j];
  for (int j = 0; j < m; ++j)
    E.weights[static_cast<std::int64_t>(Vocabulary::kUnk) * m + j] =
        static_cast<float>(mean[static_cast<std::size_t>(j)] / static_cast<double>(V - 4));
}

// Text format: first line "V m", then one line per token with 6-decimal
// fixed-point values. Round-trips exactly at that precision.
inline void save_embeddings(const EmbeddingMatrix& E, const Vocabulary& vocab,
                            const std::string& path) {
  if (static_cast<int>(E.vocab_size()) != vocab.size())
    throw DimensionMismatch("embedding rows do not match vocabulary size");
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path);
  if (!os) throw ConfigInvalid("cannot write embeddings: " + path);
  os << E.vocab_size() << " " << E.dim << "\n";
  char buf[32];
  for (int i = 0; i < vocab.size(); ++i) {
    os << vocab.token(i);
    const float* row = E.row(i);
    for (int j = 0; j < E.dim; ++j) {
      std::snprintf(buf, sizeof(buf), " %.6f", static_cast<double>(row[j]));
      os << buf;
    }
    os << "\n";
  }
}

struct LoadedEmbeddings {
  EmbeddingMatrix matrix;
  Vocabulary vocab;
};

inline LoadedEmbeddings load_embeddings(const std::string& path,
                                        EmbedAlgo algo = EmbedAlgo::Cbow) {
  std::ifstream is(path);
  if (!is) throw ConfigInvalid("cannot open embeddings: " + path);
  std::string header;
  if (!std::getline(is, header)) throw MalformedHeader("empty embeddings file: " + path);
  auto parts = split_whitespace(header);
  long V = 0, m = 0;
  try {
    if (parts.size() != 2) throw std::invalid_argument("header");
    V = std::stol(parts[0]);
    m = std::stol(parts[1]);
  } catch (const std::exception&) {
    throw MalformedHeader("bad embeddings header '" + header + "'");
  }
  if (V < 4 || m < 1) throw MalformedHeader("implausible embeddings header '" + header + "'");

  LoadedEmbeddings out;
  out.matrix.dim = static_cast<int>(m);
  out.matrix.algorithm = algo;
  out.matrix.weights = Tensor<float>({V, m});
  std::string line;
  long row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto toks = split_whitespace(line);
    if (static_cast<long>(toks.size()) != m + 1)
      throw DimensionMismatch("row " + std::to_string(row) + " has " +
                              std::to_string(toks.size() - 1) + " values, expected " +
                              std::to_string(m));
    if (row >= V) throw MalformedHeader("more rows than declared in header");
    int id = out.vocab.add(toks[0]);
    if (id != row)
      throw MalformedHeader("duplicate or misplaced token '" + toks[0] + "' at row " +
                            std::to_string(row));
    for (long j = 0; j < m; ++j) {
      try {
        out.matrix.weights[row * m + j] = std::stof(toks[static_cast<std::size_t>(j) + 1]);
      } catch (const std::exception&) {
        throw DimensionMismatch("bad value in embeddings row " + std::to_string(row));
      }
    }
    ++row;
  }
  if (row != V)
    throw MalformedHeader("header declares " + std::to_string(V) + " rows, file has " +
                          std::to_string(row));
  // the first four rows must be the reserved tokens in canonical order
  if (out.vocab.token(Vocabulary::kPad) != Vocabulary::pad_token() ||
      out.vocab.token(Vocabulary::kNum) != kNumToken ||
      out.vocab.token(Vocabulary::kUnk) != Vocabulary::unk_token() ||
      out.vocab.token(Vocabulary::kEndOfOutput) != Vocabulary::end_of_output_token())
    throw MalformedHeader("reserved tokens missing or misplaced in " + path);
  return out;
}

}  // namespace medner
