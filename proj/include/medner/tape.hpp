#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "medner/tensor.hpp"

namespace medner {

// Reverse-mode tape over rank-2 tensors. One Graph records one forward pass;
// backward() walks the recorded nodes in reverse creation order, which is a
// reverse topological order by construction. Graphs are cheap and discarded
// after every batch.
template <class T>
class Graph {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor<T> v, bool requires_grad = false) {
    return make_node(std::move(v), requires_grad, {});
  }

  const Tensor<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

  // Zero tensor if the node never received gradient.
  const Tensor<T>& grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  // ---- ops ----------------------------------------------------------------

  // y = x*W + b with x:[B,I], W:[I,O], b:[O]
  Var affine(Var x, Var W, Var b) {
    const auto& xv = value(x);
    const auto& wv = value(W);
    const auto& bv = value(b);
    require(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1, "affine: ranks");
    require(xv.dim(1) == wv.dim(0) && wv.dim(1) == bv.dim(0),
            "affine: " + shape_str(xv.shape()) + " x " + shape_str(wv.shape()) + " + " +
                shape_str(bv.shape()));
    Tensor<T> out({xv.dim(0), wv.dim(1)});
    out.mat().noalias() = xv.mat() * wv.mat();
    out.mat().rowwise() += bv.mat().row(0);
    Var o = make_node(std::move(out), needs_grad(x) || needs_grad(W) || needs_grad(b), {x, W, b});
    set_back(o, [o, x, W, b](Graph& g) {
      const auto& gv = g.node(o).grad;
      if (g.needs_grad(x)) g.grad_ref(x).mat().noalias() += gv.mat() * g.node(W).value.mat().transpose();
      if (g.needs_grad(W))
        g.grad_ref(W).mat().noalias() += g.node(x).value.mat().transpose() * gv.mat();
      if (g.needs_grad(b)) g.grad_ref(b).mat().row(0) += gv.mat().colwise().sum();
    });
    return o;
  }

  Var add(Var a, Var b) {
    require(value(a).same_shape(value(b)), "add: shape mismatch " + shape_str(value(a).shape()) +
                                               " vs " + shape_str(value(b).shape()));
    Tensor<T> out = value(a);
    out.mat() += value(b).mat();
    Var o = make_node(std::move(out), needs_grad(a) || needs_grad(b), {a, b});
    set_back(o, [o, a, b](Graph& g) {
      const auto& gv = g.node(o).grad;
      if (g.needs_grad(a)) g.grad_ref(a).mat() += gv.mat();
      if (g.needs_grad(b)) g.grad_ref(b).mat() += gv.mat();
    });
    return o;
  }

  Var sub(Var a, Var b) {
    require(value(a).same_shape(value(b)), "sub: shape mismatch");
    Tensor<T> out = value(a);
    out.mat() -= value(b).mat();
    Var o = make_node(std::move(out), needs_grad(a) || needs_grad(b), {a, b});
    set_back(o, [o, a, b](Graph& g) {
      const auto& gv = g.node(o).grad;
      if (g.needs_grad(a)) g.grad_ref(a).mat() += gv.mat();
      if (g.needs_grad(b)) g.grad_ref(b).mat() -= gv.mat();
    });
    return o;
  }

  Var mul(Var a, Var b) {
    require(value(a).same_shape(value(b)), "mul: shape mismatch");
    Tensor<T> out = value(a);
    out.mat().array() *= value(b).mat().array();
    Var o = make_node(std::move(out), needs_grad(a) || needs_grad(b), {a, b});
    set_back(o, [o, a, b](Graph& g) {
      const auto& gv = g.node(o).grad;
      if (g.needs_grad(a)) g.grad_ref(a).mat().array() += gv.mat().array() * g.node(b).value.mat().array();
      if (g.needs_grad(b)) g.grad_ref(b).mat().array() += gv.mat().array() * g.node(a).value.mat().array();
    });
    return o;
  }

  // y = x .* a with a broadcast across columns; x:[B,C], a:[B,1]
  Var bmul(Var x, Var a) {
    const auto& xv = value(x);
    const auto& av = value(a);
    require(xv.rank() == 2 && av.rank() == 2 && av.dim(1) == 1 && av.dim(0) == xv.dim(0),
            "bmul: expects [B,C] and [B,1]");
    Tensor<T> out = xv;
    out.mat().array().colwise() *= av.mat().col(0).array();
    Var o = make_node(std::move(out), needs_grad(x) || needs_grad(a), {x, a});
    set_back(o, [o, x, a](Graph& g) {
      const auto& gv = g.node(o).grad;
      if (g.needs_grad(x))
        g.grad_ref(x).mat().array() += gv.mat().array().colwise() * g.node(a).value.mat().col(0).array();
      if (g.needs_grad(a))
        g.grad_ref(a).mat().col(0).array() +=
            (gv.mat().array() * g.node(x).value.mat().array()).rowwise().sum();
    });
    return o;
  }

  // y = s*x + c elementwise with constants s, c
  Var affine_scalar(Var x, T s, T c) {
    Tensor<T> out = value(x);
    out.mat().array() = out.mat().array() * s + c;
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x, s](Graph& g) {
      if (g.needs_grad(x)) g.grad_ref(x).mat() += g.node(o).grad.mat() * s;
    });
    return o;
  }

  Var scale(Var x, T s) { return affine_scalar(x, s, T(0)); }
  Var one_minus(Var x) { return affine_scalar(x, T(-1), T(1)); }

  Var sigmoid(Var x) {
    Tensor<T> out = value(x);
    out.mat().array() = T(1) / (T(1) + (-out.mat().array()).exp());
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x](Graph& g) {
      if (!g.needs_grad(x)) return;
      const auto y = g.node(o).value.mat().array();
      g.grad_ref(x).mat().array() += g.node(o).grad.mat().array() * y * (T(1) - y);
    });
    return o;
  }

  Var tanh_(Var x) {
    Tensor<T> out = value(x);
    out.mat().array() = out.mat().array().tanh();
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x](Graph& g) {
      if (!g.needs_grad(x)) return;
      const auto y = g.node(o).value.mat().array();
      g.grad_ref(x).mat().array() += g.node(o).grad.mat().array() * (T(1) - y * y);
    });
    return o;
  }

  Var relu(Var x) {
    Tensor<T> out = value(x);
    out.mat().array() = out.mat().array().max(T(0));
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x](Graph& g) {
      if (!g.needs_grad(x)) return;
      const auto xin = g.node(x).value.mat().array();
      g.grad_ref(x).mat().array() +=
          g.node(o).grad.mat().array() * (xin > T(0)).template cast<T>();
    });
    return o;
  }

  // row-wise softmax over [B,C]
  Var softmax(Var x) {
    const auto& xv = value(x);
    require(xv.rank() == 2, "softmax: expects rank-2");
    Tensor<T> out = xv;
    auto m = out.mat();
    for (std::int64_t r = 0; r < out.dim(0); ++r) {
      T mx = m.row(r).maxCoeff();
      m.row(r) = (m.row(r).array() - mx).exp();
      m.row(r) /= m.row(r).sum();
    }
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x](Graph& g) {
      if (!g.needs_grad(x)) return;
      const auto y = g.node(o).value.mat();
      const auto gv = g.node(o).grad.mat();
      auto dx = g.grad_ref(x).mat();
      for (std::int64_t r = 0; r < y.rows(); ++r) {
        T dot = (gv.row(r).array() * y.row(r).array()).sum();
        dx.row(r).array() += y.row(r).array() * (gv.row(r).array() - dot);
      }
    });
    return o;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat: empty");
    std::int64_t rows = value(parts[0]).dim(0), cols = 0;
    bool req = false;
    for (Var p : parts) {
      require(value(p).rank() == 2 && value(p).dim(0) == rows, "concat: row mismatch");
      cols += value(p).dim(1);
      req = req || needs_grad(p);
    }
    Tensor<T> out({rows, cols});
    std::int64_t off = 0;
    for (Var p : parts) {
      out.mat().middleCols(off, value(p).dim(1)) = value(p).mat();
      off += value(p).dim(1);
    }
    Var o = make_node(std::move(out), req, parts);
    std::vector<Var> ps = parts;
    set_back(o, [o, ps](Graph& g) {
      const auto& gv = g.node(o).grad;
      std::int64_t off2 = 0;
      for (Var p : ps) {
        std::int64_t w = g.node(p).value.dim(1);
        if (g.needs_grad(p)) g.grad_ref(p).mat() += gv.mat().middleCols(off2, w);
        off2 += w;
      }
    });
    return o;
  }

  Var slice_cols(Var x, std::int64_t c0, std::int64_t c1) {
    const auto& xv = value(x);
    require(xv.rank() == 2 && c0 >= 0 && c1 <= xv.dim(1) && c0 < c1, "slice_cols: bad range");
    Tensor<T> out({xv.dim(0), c1 - c0});
    out.mat() = xv.mat().middleCols(c0, c1 - c0);
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x, c0, c1](Graph& g) {
      if (g.needs_grad(x)) g.grad_ref(x).mat().middleCols(c0, c1 - c0) += g.node(o).grad.mat();
    });
    return o;
  }

  // [B,C] -> [B,1]
  Var row_sum(Var x) {
    const auto& xv = value(x);
    require(xv.rank() == 2, "row_sum: expects rank-2");
    Tensor<T> out({xv.dim(0), 1});
    out.mat().col(0) = xv.mat().rowwise().sum();
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x](Graph& g) {
      if (g.needs_grad(x))
        g.grad_ref(x).mat().array().colwise() += g.node(o).grad.mat().col(0).array();
    });
    return o;
  }

  // reduce everything to [1,1]
  Var sum(Var x) {
    Tensor<T> out({1, 1});
    out[0] = value(x).mat().sum();
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x](Graph& g) {
      if (g.needs_grad(x)) g.grad_ref(x).mat().array() += g.node(o).grad[0];
    });
    return o;
  }

  Var mean(Var x) {
    const T inv = T(1) / static_cast<T>(value(x).size());
    return scale(sum(x), inv);
  }

  // rows of E selected by ids; E:[V,m] -> [B,m]
  Var embedding_lookup(Var E, std::vector<int> ids) {
    const auto& ev = value(E);
    require(ev.rank() == 2, "embedding_lookup: E must be rank-2");
    const std::int64_t V = ev.dim(0), m = ev.dim(1);
    Tensor<T> out({static_cast<std::int64_t>(ids.size()), m});
    for (std::size_t b = 0; b < ids.size(); ++b) {
      require(ids[b] >= 0 && ids[b] < V, "embedding_lookup: id out of range");
      out.mat().row(static_cast<std::int64_t>(b)) = ev.mat().row(ids[b]);
    }
    Var o = make_node(std::move(out), needs_grad(E), {E});
    set_back(o, [o, E, ids = std::move(ids)](Graph& g) {
      if (!g.needs_grad(E)) return;
      auto dE = g.grad_ref(E).mat();
      const auto& gv = g.node(o).grad;
      for (std::size_t b = 0; b < ids.size(); ++b)
        dE.row(ids[b]) += gv.mat().row(static_cast<std::int64_t>(b));
    });
    return o;
  }

  // inverted dropout; identity when train is false
  Var dropout(Var x, double p, bool train, Rng& rng) {
    require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
    if (!train || p == 0.0) return x;
    const auto& xv = value(x);
    Tensor<T> mask(xv.shape());
    const T inv = T(1) / static_cast<T>(1.0 - p);
    for (std::int64_t i = 0; i < mask.size(); ++i)
      mask[i] = rng.uniform() < p ? T(0) : inv;
    Tensor<T> out = xv;
    out.mat().array() *= mask.mat().array();
    Var o = make_node(std::move(out), needs_grad(x), {x});
    set_back(o, [o, x, mask = std::move(mask)](Graph& g) {
      if (g.needs_grad(x)) g.grad_ref(x).mat().array() += g.node(o).grad.mat().array() * mask.mat().array();
    });
    return o;
  }

  // per-example -log softmax(logits)[target]; logits:[B,C] -> [B,1]
  Var cross_entropy(Var logits, std::vector<int> targets) {
    const auto& lv = value(logits);
    require(lv.rank() == 2, "cross_entropy: logits must be rank-2");
    require(static_cast<std::int64_t>(targets.size()) == lv.dim(0),
            "cross_entropy: batch size mismatch");
    const std::int64_t B = lv.dim(0), C = lv.dim(1);
    Tensor<T> probs = lv;
    Tensor<T> out({B, 1});
    auto pm = probs.mat();
    for (std::int64_t b = 0; b < B; ++b) {
      require(targets[static_cast<std::size_t>(b)] >= 0 &&
                  targets[static_cast<std::size_t>(b)] < C,
              "cross_entropy: target out of range");
      T mx = pm.row(b).maxCoeff();
      pm.row(b) = (pm.row(b).array() - mx).exp();
      T z = pm.row(b).sum();
      pm.row(b) /= z;
      out.at(b, 0) = -std::log(pm(b, targets[static_cast<std::size_t>(b)]));
    }
    Var o = make_node(std::move(out), needs_grad(logits), {logits});
    set_back(o, [o, logits, probs = std::move(probs), targets = std::move(targets)](Graph& g) {
      if (!g.needs_grad(logits)) return;
      auto dl = g.grad_ref(logits).mat();
      const auto& gv = g.node(o).grad;
      for (std::int64_t b = 0; b < dl.rows(); ++b) {
        T gb = gv.at(b, 0);
        dl.row(b).array() += gb * probs.mat().row(b).array();
        dl(b, targets[static_cast<std::size_t>(b)]) -= gb;
      }
    });
    return o;
  }

  // ---- recurrent cells (composed from the primitives above) ---------------

  struct LstmState {
    Var h, c;
  };

  // gates packed as [input, forget, cell, output] along the 4H axis
  LstmState lstm_cell_step(Var x, LstmState s, Var W, Var b) {
    const std::int64_t H = value(s.h).dim(1);
    require(value(W).dim(1) == 4 * H && value(W).dim(0) == value(x).dim(1) + H,
            "lstm_cell_step: weight shape");
    Var z = affine(concat_cols({x, s.h}), W, b);
    Var i = sigmoid(slice_cols(z, 0, H));
    Var f = sigmoid(slice_cols(z, H, 2 * H));
    Var gc = tanh_(slice_cols(z, 2 * H, 3 * H));
    Var o = sigmoid(slice_cols(z, 3 * H, 4 * H));
    Var c = add(mul(f, s.c), mul(i, gc));
    Var h = mul(o, tanh_(c));
    return {h, c};
  }

  // h' = z.*h + (1-z).*cand, so a saturated update gate carries the state
  Var gru_cell_step(Var x, Var h, Var Wg, Var bg, Var Wc, Var bc) {
    const std::int64_t H = value(h).dim(1);
    require(value(Wg).dim(1) == 2 * H && value(Wg).dim(0) == value(x).dim(1) + H,
            "gru_cell_step: gate weight shape");
    require(value(Wc).dim(1) == H && value(Wc).dim(0) == value(x).dim(1) + H,
            "gru_cell_step: candidate weight shape");
    Var zr = sigmoid(affine(concat_cols({x, h}), Wg, bg));
    Var z = slice_cols(zr, 0, H);
    Var r = slice_cols(zr, H, 2 * H);
    Var cand = tanh_(affine(concat_cols({x, mul(r, h)}), Wc, bc));
    return add(mul(z, h), mul(one_minus(z), cand));
  }

  // ---- backward ------------------------------------------------------------

  void backward(Var loss) {
    Node& ln = node(loss);
    require(ln.value.size() == 1, "backward: loss must be scalar");
    grad_ref(loss)[0] = T(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && n.needs && !n.grad.empty()) n.back(*this);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs = false;
    std::function<void(Graph&)> back;
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  bool needs_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs; }

  Tensor<T>& grad_ref(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  Var make_node(Tensor<T> value, bool req, const std::vector<Var>&) {
    if (!value.all_finite())
      throw NonFiniteValue("non-finite value produced at node " + std::to_string(nodes_.size()));
    Node n;
    n.value = std::move(value);
    n.needs = req;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_back(Var v, std::function<void(Graph&)> fn) { node(v).back = std::move(fn); }

  static void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeMismatch(msg);
  }

  std::vector<Node> nodes_;
};

}  // namespace medner
