#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "medner/checkpoint.hpp"
#include "medner/embedding.hpp"
#include "medner/optim.hpp"
#include "medner/tape.hpp"

namespace medner {

enum class Activation { Tanh, Sigmoid, Relu };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid" || s == "logistic") return Activation::Sigmoid;
  if (s == "relu") return Activation::Relu;
  throw ConfigInvalid("unknown activation: " + s);
}

enum class NerArch { ContextFree, ContextAware, Rnn };

inline const char* ner_arch_name(NerArch a) {
  switch (a) {
    case NerArch::ContextFree: return "cf-ffn";
    case NerArch::ContextAware: return "ca-ffn";
    case NerArch::Rnn: return "rnn";
  }
  return "?";
}

inline NerArch ner_arch_from_name(const std::string& s) {
  if (s == "cf-ffn") return NerArch::ContextFree;
  if (s == "ca-ffn") return NerArch::ContextAware;
  if (s == "rnn") return NerArch::Rnn;
  throw ConfigInvalid("unknown ner architecture: " + s);
}

struct NerConfig {
  NerArch arch = NerArch::ContextFree;
  int m = 100;    // embedding dimension
  int w = 0;      // half window in tokens
  std::vector<int> hidden = {100, 100};
  double dropout = 0.0;
  double positive_proportion = 0.1;
  int epochs = 5;
  double lr = 0.01;
  double decay = 0.002;
  int batch = 50;
  Activation activation = Activation::Sigmoid;
  bool fine_tune_embeddings = false;

  int window_len() const { return 2 * w + 1; }

  void validate() const {
    if (hidden.empty() && arch != NerArch::Rnn)
      throw ConfigInvalid("ffn needs at least one hidden layer");
    if (dropout < 0 || dropout >= 1) throw ConfigInvalid("dropout must be in [0,1)");
    if (m < 1 || batch < 1 || epochs < 0) throw ConfigInvalid("bad ner config");
    if (positive_proportion <= 0 || positive_proportion > 1)
      throw ConfigInvalid("positive proportion must be in (0,1]");
  }

  static NerConfig context_free() {
    NerConfig c;
    c.arch = NerArch::ContextFree;
    c.w = 0;
    c.hidden = {100, 100};
    c.epochs = 5;
    c.lr = 0.01;
    c.decay = 0.002;
    return c;
  }

  static NerConfig context_aware() {
    NerConfig c;
    c.arch = NerArch::ContextAware;
    c.w = 5;
    c.hidden = {500, 100};
    c.epochs = 5;
    c.lr = 0.001;
    c.decay = 0.0;
    return c;
  }

  static NerConfig rnn() {
    NerConfig c;
    c.arch = NerArch::Rnn;
    c.w = 15;
    c.hidden = {100};
    c.epochs = 3;
    c.lr = 0.001;
    c.decay = 0.0;
    c.fine_tune_embeddings = true;
    return c;
  }
};

// One training/prediction instance: the token-id window and a class label
// (binary for the per-field FFNs, field code for the RNN).
struct NerInstance {
  std::vector<int> ids;
  int label = 0;
};

struct TrainStats {
  std::vector<double> epoch_loss;
};

// ---- window assembly ---------------------------------------------------------

// token ids of the sentence-bounded window around (line, tok); PAD outside
inline std::vector<int> window_ids(const AnnotatedDocument& doc, const SentenceMap& map,
                                   const Vocabulary& vocab, int line, int tok, int half) {
  const auto& toks = doc.lines[static_cast<std::size_t>(line)];
  auto [sb, se] = map.sentence_range(line, tok, static_cast<int>(toks.size()));
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(2 * half + 1));
  for (int k = tok - half; k <= tok + half; ++k) {
    if (k < sb || k >= se)
      ids.push_back(Vocabulary::kPad);
    else
      ids.push_back(vocab.id_or_unk(toks[static_cast<std::size_t>(k)]));
  }
  return ids;
}

// per-token field codes; overlapping annotations resolve to the lowest code
inline std::vector<std::vector<int>> label_grid(const AnnotatedDocument& doc) {
  std::vector<std::vector<int>> grid;
  for (const auto& line : doc.lines) grid.emplace_back(line.size(), 0);
  auto paint = [&](const Annotation& a) {
    for (const auto& s : a.spans)
      for (int t = s.start; t <= s.end; ++t) {
        int& cell = grid[static_cast<std::size_t>(s.line - 1)][static_cast<std::size_t>(t)];
        if (cell == 0 || field_code(a.label) < cell) cell = field_code(a.label);
      }
  };
  for (const auto& e : doc.entries) {
    paint(e.medication);
    for (const auto& a : e.related) paint(a);
  }
  return grid;
}

// every annotated-positive token of the field, plus negatives sampled with
// replacement until positives make up proportion p
inline std::vector<NerInstance> ffn_field_instances(const std::vector<AnnotatedDocument>& docs,
                                                    const std::vector<SentenceMap>& maps,
                                                    const Vocabulary& vocab, FieldLabel field,
                                                    int half, double p, Rng& rng) {
  std::vector<NerInstance> positives;
  std::vector<std::pair<std::size_t, std::pair<int, int>>> negative_pool;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    const auto& doc = docs[di];
    std::vector<std::vector<bool>> in_field;
    for (const auto& line : doc.lines) in_field.emplace_back(line.size(), false);
    for (const auto& e : doc.entries) {
      std::vector<const Annotation*> anns{&e.medication};
      for (const auto& a : e.related) anns.push_back(&a);
      for (const auto* a : anns) {
        if (a->label != field) continue;
        for (const auto& s : a->spans)
          for (int t = s.start; t <= s.end; ++t)
            in_field[static_cast<std::size_t>(s.line - 1)][static_cast<std::size_t>(t)] = true;
      }
    }
    for (std::size_t li = 0; li < doc.lines.size(); ++li)
      for (std::size_t t = 0; t < doc.lines[li].size(); ++t) {
        if (in_field[li][t])
          positives.push_back(
              {window_ids(doc, maps[di], vocab, static_cast<int>(li), static_cast<int>(t), half), 1});
        else
          negative_pool.emplace_back(di, std::make_pair(static_cast<int>(li), static_cast<int>(t)));
      }
  }
  if (positives.empty())
    throw NoPositiveInstances(std::string("no training tokens for field ") + field_name(field));

  std::vector<NerInstance> out = positives;
  if (!negative_pool.empty()) {
    const auto n_neg = static_cast<std::size_t>(
        static_cast<double>(positives.size()) * (1.0 - p) / p + 0.5);
    for (std::size_t i = 0; i < n_neg; ++i) {
      const auto& [di, pos] = negative_pool[rng.uniform_int(negative_pool.size())];
      out.push_back({window_ids(docs[di], maps[di], vocab, pos.first, pos.second, half), 0});
    }
  }
  rng.shuffle(out);
  return out;
}

// one instance per token of the annotated documents, labelled with the
// token's field code; the window slides over every position so training
// matches the inference distribution
inline std::vector<NerInstance> rnn_instances(const std::vector<AnnotatedDocument>& docs,
                                              const std::vector<SentenceMap>& maps,
                                              const Vocabulary& vocab, int half) {
  std::vector<NerInstance> out;
  bool any_positive = false;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    const auto& doc = docs[di];
    auto grid = label_grid(doc);
    for (std::size_t li = 0; li < doc.lines.size(); ++li) {
      const int len = static_cast<int>(doc.lines[li].size());
      for (int t = 0; t < len; ++t) {
        int label = grid[li][static_cast<std::size_t>(t)];
        any_positive |= label != 0;
        out.push_back({window_ids(doc, maps[di], vocab, static_cast<int>(li), t, half), label});
      }
    }
  }
  if (!any_positive) throw NoPositiveInstances("no annotated tokens in the training documents");
  return out;
}

// ---- FFN core ------------------------------------------------------------------

namespace detail {

template <class T>
void init_ffn_params(ParamStore<T>& ps, int input_dim, const std::vector<int>& hidden,
                     int out_dim, Rng& rng) {
  int in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    ps.add("dense" + std::to_string(i) + "/W", glorot_uniform<T>({in, hidden[i]}, rng));
    ps.add("dense" + std::to_string(i) + "/b", Tensor<T>::zeros({hidden[i]}));
    in = hidden[i];
  }
  ps.add("head/W", glorot_uniform<T>({in, out_dim}, rng));
  ps.add("head/b", Tensor<T>::zeros({out_dim}));
}

template <class T>
typename Graph<T>::Var apply_activation(Graph<T>& g, typename Graph<T>::Var x, Activation a) {
  switch (a) {
    case Activation::Tanh: return g.tanh_(x);
    case Activation::Sigmoid: return g.sigmoid(x);
    case Activation::Relu: return g.relu(x);
  }
  throw ConfigInvalid("bad activation");
}

template <class T>
typename Graph<T>::Var ffn_logits(Graph<T>& g,
                                  std::map<std::string, typename Graph<T>::Var>& vars,
                                  typename Graph<T>::Var x, std::size_t layers, Activation act,
                                  double dropout, bool train, Rng* rng) {
  for (std::size_t i = 0; i < layers; ++i) {
    x = g.affine(x, vars["dense" + std::to_string(i) + "/W"], vars["dense" + std::to_string(i) + "/b"]);
    x = apply_activation(g, x, act);
    if (dropout > 0 && rng) x = g.dropout(x, dropout, train, *rng);
  }
  return g.affine(x, vars["head/W"], vars["head/b"]);
}

// flattens a window of embeddings into one input row per instance
template <class T>
typename Graph<T>::Var assemble_inputs(Graph<T>& g, typename Graph<T>::Var E,
                                       const std::vector<const NerInstance*>& batch) {
  const std::size_t L = batch.front()->ids.size();
  std::vector<typename Graph<T>::Var> cols;
  cols.reserve(L);
  for (std::size_t pos = 0; pos < L; ++pos) {
    std::vector<int> ids;
    ids.reserve(batch.size());
    for (const auto* inst : batch) ids.push_back(inst->ids[pos]);
    cols.push_back(g.embedding_lookup(E, std::move(ids)));
  }
  return cols.size() == 1 ? cols[0] : g.concat_cols(cols);
}

}  // namespace detail

// One feed-forward classifier head (binary for per-field NER and for the
// extrinsic sweep). Works over sentence-bounded windows of token ids.
template <class T>
class FfnModel {
 public:
  FfnModel(NerConfig cfg, Tensor<T> embeddings, std::uint64_t seed)
      : cfg_(std::move(cfg)), embeddings_(std::move(embeddings)) {
    cfg_.validate();
    const int input_dim = cfg_.m * cfg_.window_len();
    Rng rng(Rng::derive(seed, "ffn/init"));
    detail::init_ffn_params(params_, input_dim, cfg_.hidden, 2, rng);
    if (cfg_.fine_tune_embeddings) params_.add("E", embeddings_);
  }

  const NerConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  std::size_t parameter_count(bool include_embeddings = false) const {
    std::size_t n = 0;
    for (const auto& [k, s] : params_.slots)
      if (include_embeddings || k != "E") n += static_cast<std::size_t>(s.value.size());
    return n;
  }

  typename Graph<T>::Var loss_on_batch(Graph<T>& g,
                                       std::map<std::string, typename Graph<T>::Var>& vars,
                                       const std::vector<const NerInstance*>& batch, bool train,
                                       Rng* rng) const {
    auto E = cfg_.fine_tune_embeddings ? vars["E"] : g.input(embeddings_);
    auto x = detail::assemble_inputs(g, E, batch);
    auto logits = detail::ffn_logits(g, vars, x, cfg_.hidden.size(), cfg_.activation,
                                     cfg_.dropout, train, rng);
    std::vector<int> labels;
    for (const auto* inst : batch) labels.push_back(inst->label);
    return g.mean(g.cross_entropy(logits, std::move(labels)));
  }

  TrainStats train(const std::vector<NerInstance>& instances, std::uint64_t seed) {
    if (instances.empty()) throw NoPositiveInstances("empty training set");
    Rng order_rng(Rng::derive(seed, "ffn/order"));
    Rng dropout_rng(Rng::derive(seed, "ffn/dropout"));
    TrainStats stats;
    std::vector<const NerInstance*> pool;
    pool.reserve(instances.size());
    for (const auto& inst : instances) pool.push_back(&inst);

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const T lr = static_cast<T>(lr_schedule(cfg_.lr, cfg_.decay, epoch));
      order_rng.shuffle(pool);
      double total = 0;
      long batches = 0;
      for (std::size_t off = 0; off < pool.size(); off += static_cast<std::size_t>(cfg_.batch)) {
        std::vector<const NerInstance*> batch(
            pool.begin() + static_cast<std::ptrdiff_t>(off),
            pool.begin() + static_cast<std::ptrdiff_t>(
                               std::min(off + static_cast<std::size_t>(cfg_.batch), pool.size())));
        Graph<T> g;
        std::map<std::string, typename Graph<T>::Var> vars;
        for (auto& [name, slot] : params_.slots) vars[name] = g.input(slot.value, true);
        auto loss = loss_on_batch(g, vars, batch, true, &dropout_rng);
        g.backward(loss);
        GradMap<T> grads;
        for (auto& [name, var] : vars) grads[name] = g.grad(var);
        if (cfg_.fine_tune_embeddings) {
          auto& dE = grads["E"];
          for (int j = 0; j < cfg_.m; ++j) dE[Vocabulary::kPad * cfg_.m + j] = T(0);
        }
        adam_step(params_, grads, lr);
        total += static_cast<double>(g.value(loss)[0]);
        ++batches;
      }
      stats.epoch_loss.push_back(batches ? total / static_cast<double>(batches) : 0.0);
    }
    return stats;
  }

  // probability of the positive class per instance
  std::vector<double> predict(const std::vector<NerInstance>& instances) const {
    std::vector<double> out;
    out.reserve(instances.size());
    const std::size_t chunk = 256;
    for (std::size_t off = 0; off < instances.size(); off += chunk) {
      std::vector<const NerInstance*> batch;
      for (std::size_t i = off; i < std::min(off + chunk, instances.size()); ++i)
        batch.push_back(&instances[i]);
      if (batch.empty()) break;
      Graph<T> g;
      std::map<std::string, typename Graph<T>::Var> vars;
      for (const auto& [name, slot] : params_.slots) vars[name] = g.input(slot.value, false);
      auto E = cfg_.fine_tune_embeddings ? vars["E"] : g.input(embeddings_);
      auto x = detail::assemble_inputs(g, E, batch);
      auto logits = detail::ffn_logits(g, vars, x, cfg_.hidden.size(), cfg_.activation, 0.0,
                                       false, nullptr);
      auto probs = g.softmax(logits);
      for (std::size_t b = 0; b < batch.size(); ++b)
        out.push_back(static_cast<double>(g.value(probs).at(static_cast<std::int64_t>(b), 1)));
    }
    return out;
  }

 private:
  NerConfig cfg_;
  Tensor<T> embeddings_;
  ParamStore<T> params_;
};

// Unidirectional LSTM over the token window; the final hidden state feeds a
// 7-way softmax (six fields plus none).
template <class T>
class RnnModel {
 public:
  static constexpr int kClasses = kNumFields + 1;

  RnnModel(NerConfig cfg, Tensor<T> embeddings, std::uint64_t seed)
      : cfg_(std::move(cfg)), embeddings_(std::move(embeddings)) {
    cfg_.validate();
    if (cfg_.hidden.size() != 1) throw ConfigInvalid("rnn expects exactly one hidden size");
    const int H = cfg_.hidden[0];
    Rng rng(Rng::derive(seed, "rnn/init"));
    params_.add("lstm/W", glorot_uniform<T>({cfg_.m + H, 4 * H}, rng));
    // forget-gate bias starts at one
    Tensor<T> bias({4 * H});
    for (int j = H; j < 2 * H; ++j) bias[j] = T(1);
    params_.add("lstm/b", std::move(bias));
    params_.add("head/W", glorot_uniform<T>({H, kClasses}, rng));
    params_.add("head/b", Tensor<T>::zeros({kClasses}));
    if (cfg_.fine_tune_embeddings) params_.add("E", embeddings_);
  }

  const NerConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  std::size_t parameter_count(bool include_embeddings = false) const {
    std::size_t n = 0;
    for (const auto& [k, s] : params_.slots)
      if (include_embeddings || k != "E") n += static_cast<std::size_t>(s.value.size());
    return n;
  }

  typename Graph<T>::Var logits_on_batch(Graph<T>& g,
                                         std::map<std::string, typename Graph<T>::Var>& vars,
                                         const std::vector<const NerInstance*>& batch) const {
    const int H = cfg_.hidden[0];
    const std::size_t L = batch.front()->ids.size();
    const auto B = static_cast<std::int64_t>(batch.size());
    auto E = cfg_.fine_tune_embeddings ? vars["E"] : g.input(embeddings_);

    // the readout takes each instance's state at its last non-PAD position,
    // so trailing padding does not dilute the window
    std::vector<std::size_t> last_real(batch.size(), L - 1);
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (std::size_t pos = 0; pos < L; ++pos)
        if (batch[b]->ids[pos] != Vocabulary::kPad) last_real[b] = pos;

    typename Graph<T>::LstmState state{g.input(Tensor<T>({B, H})), g.input(Tensor<T>({B, H}))};
    typename Graph<T>::Var final_h;
    for (std::size_t pos = 0; pos < L; ++pos) {
      std::vector<int> ids;
      ids.reserve(batch.size());
      for (const auto* inst : batch) ids.push_back(inst->ids[pos]);
      auto x = g.embedding_lookup(E, std::move(ids));
      state = g.lstm_cell_step(x, state, vars["lstm/W"], vars["lstm/b"]);
      Tensor<T> pick({B, 1});
      bool any = false;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const bool here = last_real[b] == pos;
        pick.at(static_cast<std::int64_t>(b), 0) = here ? T(1) : T(0);
        any |= here;
      }
      if (!any) continue;
      auto contrib = g.bmul(state.h, g.input(std::move(pick)));
      final_h = final_h.valid() ? g.add(final_h, contrib) : contrib;
    }
    return g.affine(final_h, vars["head/W"], vars["head/b"]);
  }

  typename Graph<T>::Var loss_on_batch(Graph<T>& g,
                                       std::map<std::string, typename Graph<T>::Var>& vars,
                                       const std::vector<const NerInstance*>& batch, bool /*train*/,
                                       Rng* /*rng*/) const {
    auto logits = logits_on_batch(g, vars, batch);
    std::vector<int> labels;
    for (const auto* inst : batch) labels.push_back(inst->label);
    return g.mean(g.cross_entropy(logits, std::move(labels)));
  }

  TrainStats train(const std::vector<NerInstance>& instances, std::uint64_t seed) {
    if (instances.empty()) throw NoPositiveInstances("empty training set");
    Rng order_rng(Rng::derive(seed, "rnn/order"));
    TrainStats stats;
    std::vector<const NerInstance*> pool;
    for (const auto& inst : instances) pool.push_back(&inst);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const T lr = static_cast<T>(lr_schedule(cfg_.lr, cfg_.decay, epoch));
      order_rng.shuffle(pool);
      double total = 0;
      long batches = 0;
      for (std::size_t off = 0; off < pool.size(); off += static_cast<std::size_t>(cfg_.batch)) {
        std::vector<const NerInstance*> batch(
            pool.begin() + static_cast<std::ptrdiff_t>(off),
            pool.begin() + static_cast<std::ptrdiff_t>(
                               std::min(off + static_cast<std::size_t>(cfg_.batch), pool.size())));
        Graph<T> g;
        std::map<std::string, typename Graph<T>::Var> vars;
        for (auto& [name, slot] : params_.slots) vars[name] = g.input(slot.value, true);
        auto loss = loss_on_batch(g, vars, batch, true, nullptr);
        g.backward(loss);
        GradMap<T> grads;
        for (auto& [name, var] : vars) grads[name] = g.grad(var);
        if (cfg_.fine_tune_embeddings) {
          auto& dE = grads["E"];
          for (int j = 0; j < cfg_.m; ++j) dE[Vocabulary::kPad * cfg_.m + j] = T(0);
        }
        adam_step(params_, grads, lr);
        total += static_cast<double>(g.value(loss)[0]);
        ++batches;
      }
      stats.epoch_loss.push_back(batches ? total / static_cast<double>(batches) : 0.0);
    }
    return stats;
  }

  // per instance: class scores (softmax over 7)
  std::vector<std::vector<double>> predict(const std::vector<NerInstance>& instances) const {
    std::vector<std::vector<double>> out;
    const std::size_t chunk = 256;
    for (std::size_t off = 0; off < instances.size(); off += chunk) {
      std::vector<const NerInstance*> batch;
      for (std::size_t i = off; i < std::min(off + chunk, instances.size()); ++i)
        batch.push_back(&instances[i]);
      if (batch.empty()) break;
      Graph<T> g;
      std::map<std::string, typename Graph<T>::Var> vars;
      for (const auto& [name, slot] : params_.slots) vars[name] = g.input(slot.value, false);
      auto probs = g.softmax(logits_on_batch(g, vars, batch));
      for (std::size_t b = 0; b < batch.size(); ++b) {
        std::vector<double> row(kClasses);
        for (int c = 0; c < kClasses; ++c)
          row[static_cast<std::size_t>(c)] =
              static_cast<double>(g.value(probs).at(static_cast<std::int64_t>(b), c));
        out.push_back(std::move(row));
      }
    }
    return out;
  }

 private:
  NerConfig cfg_;
  Tensor<T> embeddings_;
  ParamStore<T> params_;
};

// ---- span reconstruction -----------------------------------------------------

struct PredictedSpan {
  FieldLabel label = FieldLabel::None;
  TokenSpan span;
  double score = 0;
};

// merges maximal runs of the same non-None label, never crossing sentences
inline std::vector<PredictedSpan> spans_from_grid(
    const std::vector<std::vector<std::pair<FieldLabel, double>>>& grid, const SentenceMap& map) {
  std::vector<PredictedSpan> out;
  for (std::size_t li = 0; li < grid.size(); ++li) {
    const auto& row = grid[li];
    const int len = static_cast<int>(row.size());
    int t = 0;
    while (t < len) {
      const FieldLabel label = row[static_cast<std::size_t>(t)].first;
      if (label == FieldLabel::None) {
        ++t;
        continue;
      }
      const int sentence = map.sentence_index(static_cast<int>(li), t);
      int end = t;
      double score = row[static_cast<std::size_t>(t)].second;
      while (end + 1 < len && row[static_cast<std::size_t>(end) + 1].first == label &&
             map.sentence_index(static_cast<int>(li), end + 1) == sentence) {
        ++end;
        score += row[static_cast<std::size_t>(end)].second;
      }
      out.push_back({label,
                     TokenSpan{static_cast<int>(li) + 1, t, end},
                     score / static_cast<double>(end - t + 1)});
      t = end + 1;
    }
  }
  return out;
}

// Facade over the three architectures: six per-field binary FFNs or one
// 7-way RNN, with shared checkpoint and prediction plumbing.
template <class T>
class NerSystem {
 public:
  NerSystem(NerConfig cfg, const EmbeddingMatrix& E, Vocabulary vocab, std::uint64_t seed)
      : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    cfg_.validate();
    if (static_cast<int>(E.vocab_size()) != vocab_.size())
      throw DimensionMismatch("embedding matrix does not match vocabulary");
    if (E.dim != cfg_.m) throw ConfigInvalid("embedding dim does not match ner config");
    embeddings_ = E.weights.template cast<T>();
    if (cfg_.arch == NerArch::Rnn) {
      rnn_ = std::make_unique<RnnModel<T>>(cfg_, embeddings_, Rng::derive(seed, "ner/rnn"));
    } else {
      for (FieldLabel f : all_fields())
        ffn_.emplace(f, FfnModel<T>(cfg_, embeddings_,
                                    Rng::derive(seed, "ner/ffn", static_cast<std::uint64_t>(
                                                                     field_code(f)))));
    }
  }

  const NerConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  FfnModel<T>& field_model(FieldLabel f) { return ffn_.at(f); }
  RnnModel<T>& rnn_model() { return *rnn_; }

  std::map<std::string, TrainStats> train(const std::vector<AnnotatedDocument>& docs,
                                          const std::vector<SentenceMap>& maps,
                                          std::uint64_t seed) {
    std::map<std::string, TrainStats> stats;
    if (cfg_.arch == NerArch::Rnn) {
      auto instances = rnn_instances(docs, maps, vocab_, cfg_.w);
      stats["rnn"] = rnn_->train(instances, Rng::derive(seed, "ner/train"));
    } else {
      for (FieldLabel f : all_fields()) {
        Rng sample_rng(Rng::derive(seed, "ner/negatives", static_cast<std::uint64_t>(field_code(f))));
        auto instances = ffn_field_instances(docs, maps, vocab_, f, cfg_.w,
                                             cfg_.positive_proportion, sample_rng);
        stats[field_name(f)] = ffn_.at(f).train(
            instances, Rng::derive(seed, "ner/train", static_cast<std::uint64_t>(field_code(f))));
      }
    }
    return stats;
  }

  // per-token (label, score) grid; per-field binary models report the field
  // with the highest positive probability above 0.5
  std::vector<std::vector<std::pair<FieldLabel, double>>> predict_grid(
      const AnnotatedDocument& doc, const SentenceMap& map) const {
    std::vector<NerInstance> instances;
    for (std::size_t li = 0; li < doc.lines.size(); ++li)
      for (std::size_t t = 0; t < doc.lines[li].size(); ++t)
        instances.push_back(
            {window_ids(doc, map, vocab_, static_cast<int>(li), static_cast<int>(t), cfg_.w), 0});

    std::vector<std::vector<std::pair<FieldLabel, double>>> grid;
    for (const auto& line : doc.lines)
      grid.emplace_back(line.size(), std::make_pair(FieldLabel::None, 0.0));
    if (instances.empty()) return grid;

    if (cfg_.arch == NerArch::Rnn) {
      auto scores = rnn_->predict(instances);
      std::size_t i = 0;
      for (std::size_t li = 0; li < doc.lines.size(); ++li)
        for (std::size_t t = 0; t < doc.lines[li].size(); ++t, ++i) {
          int best = 0;
          for (int c = 1; c < RnnModel<T>::kClasses; ++c)
            if (scores[i][static_cast<std::size_t>(c)] > scores[i][static_cast<std::size_t>(best)])
              best = c;  // ties keep the lowest code
          grid[li][t] = {field_from_code(best), scores[i][static_cast<std::size_t>(best)]};
        }
    } else {
      for (FieldLabel f : all_fields()) {
        auto probs = ffn_.at(f).predict(instances);
        std::size_t i = 0;
        for (std::size_t li = 0; li < doc.lines.size(); ++li)
          for (std::size_t t = 0; t < doc.lines[li].size(); ++t, ++i)
            if (probs[i] > 0.5 && probs[i] > grid[li][t].second)
              grid[li][t] = {f, probs[i]};
      }
    }
    return grid;
  }

  std::vector<PredictedSpan> predict_spans(const AnnotatedDocument& doc,
                                           const SentenceMap& map) const {
    if (cfg_.arch == NerArch::Rnn) return spans_from_grid(predict_grid(doc, map), map);
    // per-field runs are computed independently for the binary models
    std::vector<NerInstance> instances;
    for (std::size_t li = 0; li < doc.lines.size(); ++li)
      for (std::size_t t = 0; t < doc.lines[li].size(); ++t)
        instances.push_back(
            {window_ids(doc, map, vocab_, static_cast<int>(li), static_cast<int>(t), cfg_.w), 0});
    std::vector<PredictedSpan> out;
    if (instances.empty()) return out;
    for (FieldLabel f : all_fields()) {
      auto probs = ffn_.at(f).predict(instances);
      std::vector<std::vector<std::pair<FieldLabel, double>>> grid;
      for (const auto& line : doc.lines)
        grid.emplace_back(line.size(), std::make_pair(FieldLabel::None, 0.0));
      std::size_t i = 0;
      for (std::size_t li = 0; li < doc.lines.size(); ++li)
        for (std::size_t t = 0; t < doc.lines[li].size(); ++t, ++i)
          if (probs[i] > 0.5) grid[li][t] = {f, probs[i]};
      auto spans = spans_from_grid(grid, map);
      out.insert(out.end(), spans.begin(), spans.end());
    }
    return out;
  }

  void save(const std::string& path, std::uint64_t seed, const nlohmann::json& extra = {}) const {
    ParamStore<T> merged;
    merged.add("embeddings/E", embeddings_);
    if (cfg_.arch == NerArch::Rnn) {
      for (const auto& [name, slot] : rnn_->params().slots) merged.add("rnn/" + name, slot.value);
    } else {
      for (const auto& [f, model] : ffn_)
        for (const auto& [name, slot] : model.params().slots)
          merged.add(std::string(field_name(f)) + "/" + name, slot.value);
    }
    nlohmann::json meta = extra;
    meta["arch"] = ner_arch_name(cfg_.arch);
    meta["m"] = cfg_.m;
    meta["w"] = cfg_.w;
    meta["hidden"] = cfg_.hidden;
    meta["dropout"] = cfg_.dropout;
    meta["activation"] = activation_name(cfg_.activation);
    meta["fine_tune_embeddings"] = cfg_.fine_tune_embeddings;
    nlohmann::json tokens = nlohmann::json::array();
    for (int i = 0; i < vocab_.size(); ++i) tokens.push_back(vocab_.token(i));
    meta["vocab"] = tokens;
    save_checkpoint(merged, path, seed, 0, meta);
  }

  static NerSystem load(const std::string& path) {
    auto manifest = load_manifest(path);
    const auto& meta = manifest.at("model");
    NerConfig cfg;
    cfg.arch = ner_arch_from_name(meta.at("arch").get<std::string>());
    cfg.m = meta.at("m").get<int>();
    cfg.w = meta.at("w").get<int>();
    cfg.hidden = meta.at("hidden").get<std::vector<int>>();
    cfg.dropout = meta.at("dropout").get<double>();
    cfg.activation = activation_from_name(meta.at("activation").get<std::string>());
    cfg.fine_tune_embeddings = meta.at("fine_tune_embeddings").get<bool>();
    if (cfg.arch == NerArch::Rnn && cfg.hidden.size() != 1)
      throw MalformedHeader("rnn checkpoint with bad hidden sizes");

    Vocabulary vocab;
    for (const auto& tok : meta.at("vocab")) vocab.add(tok.get<std::string>());

    auto merged = load_params<T>(path);
    EmbeddingMatrix E;
    E.dim = cfg.m;
    E.weights = merged.at("embeddings/E").template cast<float>();
    if (static_cast<int>(E.vocab_size()) != vocab.size())
      throw MalformedHeader("checkpoint embeddings do not match the stored vocabulary");

    NerSystem system(cfg, E, std::move(vocab), manifest.at("seed").get<std::uint64_t>());
    auto restore = [&](ParamStore<T>& ps, const std::string& prefix) {
      for (auto& [name, slot] : ps.slots) {
        const std::string key = prefix + name;
        if (!merged.contains(key)) throw MalformedHeader("checkpoint missing parameter " + key);
        if (!merged.at(key).same_shape(slot.value))
          throw MalformedHeader("checkpoint shape mismatch for " + key);
        slot.value = merged.at(key);
      }
    };
    if (cfg.arch == NerArch::Rnn) {
      restore(system.rnn_->params(), "rnn/");
    } else {
      for (auto& [f, model] : system.ffn_) restore(model.params(), std::string(field_name(f)) + "/");
    }
    return system;
  }

 private:
  NerConfig cfg_;
  Vocabulary vocab_;
  Tensor<T> embeddings_;
  std::map<FieldLabel, FfnModel<T>> ffn_;
  std::unique_ptr<RnnModel<T>> rnn_;
};

}  // namespace medner
