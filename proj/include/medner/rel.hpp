#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "medner/checkpoint.hpp"
#include "medner/embedding.hpp"
#include "medner/metrics.hpp"
#include "medner/ner.hpp"
#include "medner/optim.hpp"
#include "medner/tape.hpp"

namespace medner {

enum class AttentionKind { Bahdanau, Luong };

inline const char* attention_name(AttentionKind a) {
  return a == AttentionKind::Bahdanau ? "bahdanau" : "luong";
}

inline AttentionKind attention_from_name(const std::string& s) {
  if (s == "bahdanau") return AttentionKind::Bahdanau;
  if (s == "luong") return AttentionKind::Luong;
  throw ConfigInvalid("unknown attention kind: " + s);
}

enum class RelArch { Seq2Seq, EncDec };

inline const char* rel_arch_name(RelArch a) { return a == RelArch::Seq2Seq ? "seq2seq" : "encdec"; }

inline RelArch rel_arch_from_name(const std::string& s) {
  if (s == "seq2seq") return RelArch::Seq2Seq;
  if (s == "encdec") return RelArch::EncDec;
  throw ConfigInvalid("unknown relation architecture: " + s);
}

struct RelConfig {
  RelArch arch = RelArch::Seq2Seq;
  int m = 100;
  int gru_hidden = 100;   // seq2seq bidirectional GRU units
  int enc_hidden = 128;   // encoder LSTM units per direction
  int attn_dim = 128;     // Bahdanau score dimension
  AttentionKind attention = AttentionKind::Bahdanau;
  int epochs = 100;
  double lr = 0.001;
  double decay = 0.0;
  double clip = 0.0;
  int batch = 50;
  int half_lines = 2;     // window = target line +/- 2 rows
  int decode_margin = 64;

  int dec_hidden() const { return 2 * enc_hidden; }

  void validate() const {
    if (m < 1 || gru_hidden < 1 || enc_hidden < 1 || batch < 1 || epochs < 0)
      throw ConfigInvalid("bad rel config");
  }

  static RelConfig seq2seq() {
    RelConfig c;
    c.arch = RelArch::Seq2Seq;
    return c;
  }

  static RelConfig encdec(AttentionKind attention) {
    RelConfig c;
    c.arch = RelArch::EncDec;
    c.attention = attention;
    c.decay = 0.00001;
    c.clip = 5.0;
    return c;
  }
};

// One relation-extraction example: the line window around a target
// medication, the known entity code per token, and the targets for both
// model families.
struct RelInstance {
  std::vector<int> token_ids;
  std::vector<float> codes;      // 0..6 per token
  std::vector<int> gold_tags;    // per-token codes for the target entry
  std::vector<int> gold_output;  // related tokens in field order, EOS-terminated
  std::vector<int> med_ids;      // the target medication's tokens
  std::size_t doc_index = 0;
  std::size_t entry_index = 0;
};

// sum of the term's embeddings with the medication label code appended
inline Tensor<float> bow_repr(const std::vector<int>& term_ids, const EmbeddingMatrix& E) {
  if (term_ids.empty()) throw EmptyTerm("bow_repr of an empty term");
  Tensor<float> out({1, E.dim + 1});
  for (int id : term_ids) {
    const float* row = E.row(id);
    for (int j = 0; j < E.dim; ++j) out[j] += row[j];
  }
  out[E.dim] = static_cast<float>(field_code(FieldLabel::Medication));
  return out;
}

// Builds one instance per entry. Known codes come from the gold annotations
// (oracle mode) unless a predicted code grid is supplied per document.
inline std::vector<RelInstance> build_rel_instances(
    const std::vector<AnnotatedDocument>& docs, const Vocabulary& vocab, int half_lines,
    const std::vector<std::vector<std::vector<int>>>* predicted_codes = nullptr) {
  std::vector<RelInstance> out;
  for (std::size_t di = 0; di < docs.size(); ++di) {
    const auto& doc = docs[di];
    const auto gold_grid = label_grid(doc);
    const auto* code_grid = predicted_codes ? &(*predicted_codes)[di] : &gold_grid;
    for (std::size_t ei = 0; ei < doc.entries.size(); ++ei) {
      const auto& entry = doc.entries[ei];
      if (entry.medication.spans.empty()) continue;
      const int med_line = entry.medication.spans[0].line;  // 1-based
      const int lo = std::max(1, med_line - half_lines);
      const int hi = std::min(static_cast<int>(doc.lines.size()), med_line + half_lines);

      RelInstance inst;
      inst.doc_index = di;
      inst.entry_index = ei;

      // per-token tags for this entry only
      std::map<std::pair<int, int>, int> entry_tags;
      auto paint = [&](const Annotation& a) {
        for (const auto& s : a.spans)
          for (int t = s.start; t <= s.end; ++t) {
            auto key = std::make_pair(s.line, t);
            auto it = entry_tags.find(key);
            if (it == entry_tags.end() || field_code(a.label) < it->second)
              entry_tags[key] = field_code(a.label);
          }
      };
      paint(entry.medication);
      for (const auto& a : entry.related) paint(a);

      for (int line = lo; line <= hi; ++line) {
        const auto& toks = doc.lines[static_cast<std::size_t>(line - 1)];
        for (std::size_t t = 0; t < toks.size(); ++t) {
          inst.token_ids.push_back(vocab.id_or_unk(toks[t]));
          inst.codes.push_back(static_cast<float>(
              (*code_grid)[static_cast<std::size_t>(line - 1)][t]));
          auto it = entry_tags.find({line, static_cast<int>(t)});
          inst.gold_tags.push_back(it == entry_tags.end() ? 0 : it->second);
        }
      }

      for (const auto& s : entry.medication.spans)
        for (int t = s.start; t <= s.end; ++t)
          inst.med_ids.push_back(vocab.id_or_unk(
              doc.lines[static_cast<std::size_t>(s.line - 1)][static_cast<std::size_t>(t)]));

      // gold output: dosage, mode, frequency, duration, reason; document
      // order within each field
      for (FieldLabel f : {FieldLabel::Dosage, FieldLabel::Mode, FieldLabel::Frequency,
                           FieldLabel::Duration, FieldLabel::Reason}) {
        std::vector<const Annotation*> anns;
        for (const auto& a : entry.related)
          if (a.label == f) anns.push_back(&a);
        std::stable_sort(anns.begin(), anns.end(), [](const Annotation* a, const Annotation* b) {
          auto ka = std::make_pair(a->spans[0].line, a->spans[0].start);
          auto kb = std::make_pair(b->spans[0].line, b->spans[0].start);
          return ka < kb;
        });
        for (const auto* a : anns)
          for (const auto& tok : doc.annotation_tokens(*a))
            inst.gold_output.push_back(vocab.id_or_unk(tok));
      }
      inst.gold_output.push_back(Vocabulary::kEndOfOutput);
      if (!inst.token_ids.empty() && !inst.med_ids.empty()) out.push_back(std::move(inst));
    }
  }
  return out;
}

namespace detail {

// deterministic batches of uniform encoder length
inline std::vector<std::vector<const RelInstance*>> length_batches(
    const std::vector<const RelInstance*>& pool, int batch, Rng* shuffle_rng) {
  std::map<std::size_t, std::vector<const RelInstance*>> by_len;
  for (const auto* inst : pool) by_len[inst->token_ids.size()].push_back(inst);
  std::vector<std::vector<const RelInstance*>> batches;
  for (auto& [len, group] : by_len) {
    if (shuffle_rng) shuffle_rng->shuffle(group);
    for (std::size_t off = 0; off < group.size(); off += static_cast<std::size_t>(batch))
      batches.emplace_back(group.begin() + static_cast<std::ptrdiff_t>(off),
                           group.begin() + static_cast<std::ptrdiff_t>(std::min(
                                               off + static_cast<std::size_t>(batch), group.size())));
  }
  if (shuffle_rng) shuffle_rng->shuffle(batches);
  return batches;
}

template <class T>
Tensor<T> batch_bow(const std::vector<const RelInstance*>& batch, const Tensor<T>& E) {
  const auto B = static_cast<std::int64_t>(batch.size());
  const std::int64_t m = E.dim(1);
  Tensor<T> bow({B, m + 1});
  for (std::int64_t b = 0; b < B; ++b) {
    for (int id : batch[static_cast<std::size_t>(b)]->med_ids)
      for (std::int64_t j = 0; j < m; ++j) bow.at(b, j) += E.at(id, j);
    bow.at(b, m) = static_cast<T>(field_code(FieldLabel::Medication));
  }
  return bow;
}

template <class T>
typename Graph<T>::Var step_input(Graph<T>& g, typename Graph<T>::Var E,
                                  const std::vector<const RelInstance*>& batch, std::size_t pos) {
  std::vector<int> ids;
  Tensor<T> codes({static_cast<std::int64_t>(batch.size()), 1});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ids.push_back(batch[b]->token_ids[pos]);
    codes.at(static_cast<std::int64_t>(b), 0) = static_cast<T>(batch[b]->codes[pos]);
  }
  return g.concat_cols({g.embedding_lookup(E, std::move(ids)), g.input(std::move(codes))});
}

}  // namespace detail

// Bidirectional GRU tagger: both directions start from a learned affine map
// of the BOW representation; each position's concatenated states feed a
// 7-way softmax.
template <class T>
class Seq2SeqTagger {
 public:
  static constexpr int kClasses = kNumFields + 1;

  Seq2SeqTagger(RelConfig cfg, Tensor<T> embeddings, std::uint64_t seed)
      : cfg_(std::move(cfg)), E_(std::move(embeddings)) {
    cfg_.validate();
    const int H = cfg_.gru_hidden;
    const int in = cfg_.m + 1;
    Rng rng(Rng::derive(seed, "seq2seq/init"));
    params_.add("init_f/W", glorot_uniform<T>({in, H}, rng));
    params_.add("init_f/b", Tensor<T>::zeros({H}));
    params_.add("init_b/W", glorot_uniform<T>({in, H}, rng));
    params_.add("init_b/b", Tensor<T>::zeros({H}));
    for (const char* dir : {"f", "b"}) {
      params_.add(std::string("gru_") + dir + "/Wg", glorot_uniform<T>({in + H, 2 * H}, rng));
      params_.add(std::string("gru_") + dir + "/bg", Tensor<T>::zeros({2 * H}));
      params_.add(std::string("gru_") + dir + "/Wc", glorot_uniform<T>({in + H, H}, rng));
      params_.add(std::string("gru_") + dir + "/bc", Tensor<T>::zeros({H}));
    }
    params_.add("head/W", glorot_uniform<T>({2 * H, kClasses}, rng));
    params_.add("head/b", Tensor<T>::zeros({kClasses}));
  }

  const RelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // per-position logits for a batch of equal-length windows
  std::vector<typename Graph<T>::Var> logits_on_batch(
      Graph<T>& g, std::map<std::string, typename Graph<T>::Var>& vars,
      const std::vector<const RelInstance*>& batch) const {
    const std::size_t L = batch.front()->token_ids.size();
    auto E = g.input(E_);
    auto bow = g.input(detail::batch_bow(batch, E_));
    std::vector<typename Graph<T>::Var> inputs;
    inputs.reserve(L);
    for (std::size_t pos = 0; pos < L; ++pos)
      inputs.push_back(detail::step_input(g, E, batch, pos));

    auto hf = g.affine(bow, vars["init_f/W"], vars["init_f/b"]);
    std::vector<typename Graph<T>::Var> fwd(L);
    for (std::size_t pos = 0; pos < L; ++pos) {
      hf = g.gru_cell_step(inputs[pos], hf, vars["gru_f/Wg"], vars["gru_f/bg"], vars["gru_f/Wc"],
                           vars["gru_f/bc"]);
      fwd[pos] = hf;
    }
    auto hb = g.affine(bow, vars["init_b/W"], vars["init_b/b"]);
    std::vector<typename Graph<T>::Var> bwd(L);
    for (std::size_t pos = L; pos-- > 0;) {
      hb = g.gru_cell_step(inputs[pos], hb, vars["gru_b/Wg"], vars["gru_b/bg"], vars["gru_b/Wc"],
                           vars["gru_b/bc"]);
      bwd[pos] = hb;
    }
    std::vector<typename Graph<T>::Var> logits(L);
    for (std::size_t pos = 0; pos < L; ++pos)
      logits[pos] = g.affine(g.concat_cols({fwd[pos], bwd[pos]}), vars["head/W"], vars["head/b"]);
    return logits;
  }

  // per-step cross-entropy summed over the window, averaged per batch
  typename Graph<T>::Var loss_on_batch(Graph<T>& g,
                                       std::map<std::string, typename Graph<T>::Var>& vars,
                                       const std::vector<const RelInstance*>& batch) const {
    auto logits = logits_on_batch(g, vars, batch);
    typename Graph<T>::Var total;
    for (std::size_t pos = 0; pos < logits.size(); ++pos) {
      std::vector<int> targets;
      for (const auto* inst : batch) targets.push_back(inst->gold_tags[pos]);
      auto ce = g.cross_entropy(logits[pos], std::move(targets));
      total = total.valid() ? g.add(total, ce) : ce;
    }
    return g.scale(g.sum(total), T(1) / static_cast<T>(batch.size()));
  }

  TrainStats train(const std::vector<RelInstance>& instances, std::uint64_t seed) {
    return train_model(*this, params_, cfg_, instances, seed, "seq2seq");
  }

  std::vector<int> predict_tags(const RelInstance& inst) const {
    Graph<T> g;
    std::map<std::string, typename Graph<T>::Var> vars;
    for (const auto& [name, slot] : params_.slots) vars[name] = g.input(slot.value, false);
    std::vector<const RelInstance*> batch{&inst};
    auto logits = logits_on_batch(g, vars, batch);
    std::vector<int> tags;
    for (auto lv : logits) {
      const auto& row = g.value(lv);
      int best = 0;
      for (int c = 1; c < kClasses; ++c)
        if (row.at(0, c) > row.at(0, best)) best = c;  // ties keep the lowest code
      tags.push_back(best);
    }
    return tags;
  }

  template <class Model>
  static TrainStats train_model(const Model& model, ParamStore<T>& params, const RelConfig& cfg,
                                const std::vector<RelInstance>& instances, std::uint64_t seed,
                                const char* stream) {
    TrainStats stats;
    std::vector<const RelInstance*> pool;
    for (const auto& inst : instances) pool.push_back(&inst);
    Rng order_rng(Rng::derive(seed, std::string(stream) + "/order"));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const T lr = static_cast<T>(lr_schedule(cfg.lr, cfg.decay, epoch));
      auto batches = detail::length_batches(pool, cfg.batch, &order_rng);
      double total = 0;
      long n = 0;
      for (const auto& batch : batches) {
        Graph<T> g;
        std::map<std::string, typename Graph<T>::Var> vars;
        for (auto& [name, slot] : params.slots) vars[name] = g.input(slot.value, true);
        auto loss = model.loss_on_batch(g, vars, batch);
        g.backward(loss);
        GradMap<T> grads;
        for (auto& [name, var] : vars) grads[name] = g.grad(var);
        if (cfg.clip > 0) clip_gradients(grads, static_cast<T>(cfg.clip));
        adam_step(params, grads, lr);
        total += static_cast<double>(g.value(loss)[0]);
        ++n;
      }
      stats.epoch_loss.push_back(n ? total / static_cast<double>(n) : 0.0);
    }
    return stats;
  }

 private:
  RelConfig cfg_;
  Tensor<T> E_;
  ParamStore<T> params_;
};

// Bidirectional LSTM encoder initialised from the BOW representation; the
// decoder LSTM attends over the encoder outputs (Bahdanau additive or Luong
// general) and emits vocabulary tokens until <end-of-output>.
template <class T>
class EncDecModel {
 public:
  EncDecModel(RelConfig cfg, Tensor<T> embeddings, std::uint64_t seed)
      : cfg_(std::move(cfg)), E_(std::move(embeddings)) {
    cfg_.validate();
    const int in = cfg_.m + 1;
    const int He = cfg_.enc_hidden;
    const int Hd = cfg_.dec_hidden();
    const auto V = E_.dim(0);
    Rng rng(Rng::derive(seed, "encdec/init"));
    for (const char* dir : {"f", "b"}) {
      params_.add(std::string("enc_init_h") + dir + "/W", glorot_uniform<T>({in, He}, rng));
      params_.add(std::string("enc_init_h") + dir + "/b", Tensor<T>::zeros({He}));
      params_.add(std::string("enc_init_c") + dir + "/W", glorot_uniform<T>({in, He}, rng));
      params_.add(std::string("enc_init_c") + dir + "/b", Tensor<T>::zeros({He}));
      params_.add(std::string("enc_") + dir + "/W", glorot_uniform<T>({in + He, 4 * He}, rng));
      // forget-gate bias starts at one
      Tensor<T> eb({4 * He});
      for (int j = He; j < 2 * He; ++j) eb[j] = T(1);
      params_.add(std::string("enc_") + dir + "/b", std::move(eb));
    }
    params_.add("dec/W", glorot_uniform<T>({2 * He + cfg_.m + Hd, 4 * Hd}, rng));
    Tensor<T> db({4 * Hd});
    for (int j = Hd; j < 2 * Hd; ++j) db[j] = T(1);
    params_.add("dec/b", std::move(db));
    params_.add("dec/start_emb", glorot_uniform<T>({1, cfg_.m}, rng));
    if (cfg_.attention == AttentionKind::Bahdanau) {
      params_.add("att/W1", glorot_uniform<T>({2 * He, cfg_.attn_dim}, rng));
      params_.add("att/W2", glorot_uniform<T>({Hd, cfg_.attn_dim}, rng));
      params_.add("att/v", glorot_uniform<T>({cfg_.attn_dim, 1}, rng));
    } else {
      params_.add("att/W", glorot_uniform<T>({Hd, 2 * He}, rng));
    }
    params_.add("head/W", glorot_uniform<T>({Hd, V}, rng));
    params_.add("head/b", Tensor<T>::zeros({V}));
  }

  const RelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  struct Encoded {
    std::vector<typename Graph<T>::Var> outputs;  // per position, [B, 2He]
    typename Graph<T>::LstmState dec_state;       // [B, Hd]
  };

  Encoded encode(Graph<T>& g, std::map<std::string, typename Graph<T>::Var>& vars,
                 const std::vector<const RelInstance*>& batch) const {
    const std::size_t L = batch.front()->token_ids.size();
    auto E = g.input(E_);
    auto bow = g.input(detail::batch_bow(batch, E_));
    std::vector<typename Graph<T>::Var> inputs;
    inputs.reserve(L);
    for (std::size_t pos = 0; pos < L; ++pos)
      inputs.push_back(detail::step_input(g, E, batch, pos));

    typename Graph<T>::LstmState f{
        g.affine(bow, vars["enc_init_hf/W"], vars["enc_init_hf/b"]),
        g.affine(bow, vars["enc_init_cf/W"], vars["enc_init_cf/b"])};
    std::vector<typename Graph<T>::Var> fwd(L);
    for (std::size_t pos = 0; pos < L; ++pos) {
      f = g.lstm_cell_step(inputs[pos], f, vars["enc_f/W"], vars["enc_f/b"]);
      fwd[pos] = f.h;
    }
    typename Graph<T>::LstmState b{
        g.affine(bow, vars["enc_init_hb/W"], vars["enc_init_hb/b"]),
        g.affine(bow, vars["enc_init_cb/W"], vars["enc_init_cb/b"])};
    std::vector<typename Graph<T>::Var> bwd(L);
    for (std::size_t pos = L; pos-- > 0;) {
      b = g.lstm_cell_step(inputs[pos], b, vars["enc_b/W"], vars["enc_b/b"]);
      bwd[pos] = b.h;
    }
    Encoded enc;
    enc.outputs.resize(L);
    for (std::size_t pos = 0; pos < L; ++pos)
      enc.outputs[pos] = g.concat_cols({fwd[pos], bwd[pos]});
    enc.dec_state = {g.concat_cols({f.h, b.h}), g.concat_cols({f.c, b.c})};
    return enc;
  }

  // attention-weighted context for decoder state s; also returns the weights
  std::pair<typename Graph<T>::Var, typename Graph<T>::Var> attend(
      Graph<T>& g, std::map<std::string, typename Graph<T>::Var>& vars, const Encoded& enc,
      typename Graph<T>::Var s, std::vector<typename Graph<T>::Var>* cache) const {
    const std::size_t L = enc.outputs.size();
    std::vector<typename Graph<T>::Var> scores(L);
    if (cfg_.attention == AttentionKind::Bahdanau) {
      auto zb = g.input(Tensor<T>({cfg_.attn_dim}));
      auto zb1 = g.input(Tensor<T>({1}));
      if (cache->empty()) {
        cache->resize(L);
        for (std::size_t i = 0; i < L; ++i)
          (*cache)[i] = g.affine(enc.outputs[i], vars["att/W1"], zb);
      }
      auto ws = g.affine(s, vars["att/W2"], zb);
      for (std::size_t i = 0; i < L; ++i)
        scores[i] = g.affine(g.tanh_(g.add((*cache)[i], ws)), vars["att/v"], zb1);
    } else {
      auto zb = g.input(Tensor<T>({2 * cfg_.enc_hidden}));
      auto sw = g.affine(s, vars["att/W"], zb);
      for (std::size_t i = 0; i < L; ++i) scores[i] = g.row_sum(g.mul(sw, enc.outputs[i]));
    }
    auto alpha = g.softmax(L == 1 ? scores[0] : g.concat_cols(scores));
    typename Graph<T>::Var ctx;
    for (std::size_t i = 0; i < L; ++i) {
      auto contrib = g.bmul(enc.outputs[i], g.slice_cols(alpha, static_cast<std::int64_t>(i),
                                                         static_cast<std::int64_t>(i) + 1));
      ctx = ctx.valid() ? g.add(ctx, contrib) : contrib;
    }
    return {ctx, alpha};
  }

  // teacher-forced loss; targets padded per instance with zero weight
  typename Graph<T>::Var loss_on_batch(Graph<T>& g,
                                       std::map<std::string, typename Graph<T>::Var>& vars,
                                       const std::vector<const RelInstance*>& batch) const {
    auto enc = encode(g, vars, batch);
    auto E = g.input(E_);
    const auto B = static_cast<std::int64_t>(batch.size());
    std::size_t max_t = 0;
    for (const auto* inst : batch) max_t = std::max(max_t, inst->gold_output.size());

    typename Graph<T>::LstmState state = enc.dec_state;
    auto prev = g.embedding_lookup(vars["dec/start_emb"],
                                   std::vector<int>(static_cast<std::size_t>(B), 0));
    std::vector<typename Graph<T>::Var> cache;
    typename Graph<T>::Var total;
    for (std::size_t k = 0; k < max_t; ++k) {
      auto [ctx, alpha] = attend(g, vars, enc, state.h, &cache);
      state = g.lstm_cell_step(g.concat_cols({ctx, prev}), state, vars["dec/W"], vars["dec/b"]);
      auto logits = g.affine(state.h, vars["head/W"], vars["head/b"]);
      std::vector<int> targets;
      Tensor<T> weights({B, 1});
      std::vector<int> next_ids;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& gold = batch[b]->gold_output;
        const bool live = k < gold.size();
        targets.push_back(live ? gold[k] : Vocabulary::kEndOfOutput);
        weights.at(static_cast<std::int64_t>(b), 0) = live ? T(1) : T(0);
        next_ids.push_back(live ? gold[k] : Vocabulary::kEndOfOutput);
      }
      auto ce = g.mul(g.cross_entropy(logits, std::move(targets)), g.input(std::move(weights)));
      total = total.valid() ? g.add(total, ce) : ce;
      prev = g.embedding_lookup(E, std::move(next_ids));  // teacher forcing
    }
    return g.scale(g.sum(total), T(1) / static_cast<T>(batch.size()));
  }

  TrainStats train(const std::vector<RelInstance>& instances, std::uint64_t seed) {
    return Seq2SeqTagger<T>::train_model(*this, params_, cfg_, instances, seed, "encdec");
  }

  struct DecodeResult {
    std::vector<int> tokens;  // without the end-of-output marker
    std::vector<std::vector<double>> attention;
    bool terminated = false;
  };

  // greedy decode with a hard cap of window length + margin
  DecodeResult decode(const RelInstance& inst) const {
    Graph<T> g;
    std::map<std::string, typename Graph<T>::Var> vars;
    for (const auto& [name, slot] : params_.slots) vars[name] = g.input(slot.value, false);
    std::vector<const RelInstance*> batch{&inst};
    auto enc = encode(g, vars, batch);
    auto E = g.input(E_);
    typename Graph<T>::LstmState state = enc.dec_state;
    auto prev = g.embedding_lookup(vars["dec/start_emb"], {0});
    std::vector<typename Graph<T>::Var> cache;
    DecodeResult result;
    const std::size_t cap = inst.token_ids.size() + static_cast<std::size_t>(cfg_.decode_margin);
    for (std::size_t k = 0; k < cap; ++k) {
      auto [ctx, alpha] = attend(g, vars, enc, state.h, &cache);
      std::vector<double> weights;
      for (std::int64_t i = 0; i < g.value(alpha).dim(1); ++i)
        weights.push_back(static_cast<double>(g.value(alpha).at(0, i)));
      result.attention.push_back(std::move(weights));
      state = g.lstm_cell_step(g.concat_cols({ctx, prev}), state, vars["dec/W"], vars["dec/b"]);
      auto logits = g.affine(state.h, vars["head/W"], vars["head/b"]);
      const auto& row = g.value(logits);
      int best = 0;
      for (std::int64_t c = 1; c < row.dim(1); ++c)
        if (row.at(0, c) > row.at(0, best)) best = static_cast<int>(c);
      if (best == Vocabulary::kEndOfOutput) {
        result.terminated = true;
        break;
      }
      result.tokens.push_back(best);
      prev = g.embedding_lookup(E, {best});
    }
    return result;
  }

 private:
  RelConfig cfg_;
  Tensor<T> E_;
  ParamStore<T> params_;
};

// ---- checkpointing -------------------------------------------------------------

template <class T, class Model>
void save_rel_model(const Model& model, const Tensor<T>& embeddings, const Vocabulary& vocab,
                    const std::string& path, std::uint64_t seed) {
  ParamStore<T> merged;
  merged.add("embeddings/E", embeddings);
  for (const auto& [name, slot] : model.params().slots)
    merged.add("model/" + name, slot.value);
  const RelConfig& cfg = model.config();
  nlohmann::json meta;
  meta["arch"] = rel_arch_name(cfg.arch);
  meta["attention"] = attention_name(cfg.attention);
  meta["m"] = cfg.m;
  meta["gru_hidden"] = cfg.gru_hidden;
  meta["enc_hidden"] = cfg.enc_hidden;
  meta["attn_dim"] = cfg.attn_dim;
  meta["half_lines"] = cfg.half_lines;
  meta["decode_margin"] = cfg.decode_margin;
  nlohmann::json tokens = nlohmann::json::array();
  for (int i = 0; i < vocab.size(); ++i) tokens.push_back(vocab.token(i));
  meta["vocab"] = tokens;
  save_checkpoint(merged, path, seed, 0, meta);
}

struct LoadedRelModel {
  RelConfig cfg;
  Vocabulary vocab;
  Tensor<float> embeddings;
  std::unique_ptr<Seq2SeqTagger<float>> tagger;
  std::unique_ptr<EncDecModel<float>> encdec;
};

inline LoadedRelModel load_rel_model(const std::string& path) {
  auto manifest = load_manifest(path);
  const auto& meta = manifest.at("model");
  LoadedRelModel out;
  out.cfg.arch = rel_arch_from_name(meta.at("arch").get<std::string>());
  out.cfg.attention = attention_from_name(meta.at("attention").get<std::string>());
  out.cfg.m = meta.at("m").get<int>();
  out.cfg.gru_hidden = meta.at("gru_hidden").get<int>();
  out.cfg.enc_hidden = meta.at("enc_hidden").get<int>();
  out.cfg.attn_dim = meta.at("attn_dim").get<int>();
  out.cfg.half_lines = meta.at("half_lines").get<int>();
  out.cfg.decode_margin = meta.at("decode_margin").get<int>();
  for (const auto& tok : meta.at("vocab")) out.vocab.add(tok.get<std::string>());

  auto merged = load_params<float>(path);
  out.embeddings = merged.at("embeddings/E");
  if (out.embeddings.dim(0) != out.vocab.size())
    throw MalformedHeader("checkpoint embeddings do not match the stored vocabulary");

  auto restore = [&](ParamStore<float>& ps) {
    for (auto& [name, slot] : ps.slots) {
      const std::string key = "model/" + name;
      if (!merged.contains(key)) throw MalformedHeader("checkpoint missing parameter " + key);
      if (!merged.at(key).same_shape(slot.value))
        throw MalformedHeader("checkpoint shape mismatch for " + key);
      slot.value = merged.at(key);
    }
  };
  const auto seed = manifest.at("seed").get<std::uint64_t>();
  if (out.cfg.arch == RelArch::Seq2Seq) {
    out.tagger = std::make_unique<Seq2SeqTagger<float>>(out.cfg, out.embeddings, seed);
    restore(out.tagger->params());
  } else {
    out.encdec = std::make_unique<EncDecModel<float>>(out.cfg, out.embeddings, seed);
    restore(out.encdec->params());
  }
  return out;
}

// ---- extraction to scoreable relations ----------------------------------------

inline ExtractedRelations extract_tagged(const Seq2SeqTagger<float>& model,
                                         const RelInstance& inst, const Vocabulary& vocab) {
  ExtractedRelations out;
  auto tags = model.predict_tags(inst);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] <= field_code(FieldLabel::Medication)) continue;  // none or the target drug
    out.tagged[field_from_code(tags[i])].push_back(vocab.token(inst.token_ids[i]));
  }
  return out;
}

inline ExtractedRelations extract_generated(const EncDecModel<float>& model,
                                            const RelInstance& inst, const Vocabulary& vocab) {
  ExtractedRelations out;
  out.generated = true;
  for (int id : model.decode(inst).tokens) out.tokens.push_back(vocab.token(id));
  return out;
}

}  // namespace medner
