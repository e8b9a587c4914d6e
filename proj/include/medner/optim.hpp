#pragma once

#include <cmath>
#include <map>
#include <string>

#include "medner/tensor.hpp"

namespace medner {

// Named trainable parameters with per-parameter Adam state.
template <class T>
struct ParamStore {
  struct Slot {
    Tensor<T> value;
    Tensor<T> m;  // first moment
    Tensor<T> v;  // second moment
    long step = 0;
  };

  std::map<std::string, Slot> slots;  // ordered, for deterministic iteration

  Tensor<T>& add(const std::string& name, Tensor<T> init) {
    Slot s;
    s.m = Tensor<T>::zeros(init.shape());
    s.v = Tensor<T>::zeros(init.shape());
    s.value = std::move(init);
    auto [it, fresh] = slots.emplace(name, std::move(s));
    if (!fresh) throw ConfigInvalid("duplicate parameter name: " + name);
    return it->second.value;
  }

  Tensor<T>& operator[](const std::string& name) {
    auto it = slots.find(name);
    if (it == slots.end()) throw ConfigInvalid("unknown parameter: " + name);
    return it->second.value;
  }

  const Tensor<T>& at(const std::string& name) const {
    auto it = slots.find(name);
    if (it == slots.end()) throw ConfigInvalid("unknown parameter: " + name);
    return it->second.value;
  }

  bool contains(const std::string& name) const { return slots.count(name) != 0; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [k, s] : slots) n += static_cast<std::size_t>(s.value.size());
    return n;
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [k, s] : slots) {
      typename ParamStore<U>::Slot slot;
      slot.value = s.value.template cast<U>();
      slot.m = s.m.template cast<U>();
      slot.v = s.v.template cast<U>();
      slot.step = s.step;
      out.slots.emplace(k, std::move(slot));
    }
    return out;
  }
};

template <class T>
using GradMap = std::map<std::string, Tensor<T>>;

// Bias-corrected Adam update. Grads may cover a subset of the parameters.
template <class T>
void adam_step(ParamStore<T>& params, const GradMap<T>& grads, T lr, T beta1 = T(0.9),
               T beta2 = T(0.999), T eps = T(1e-8)) {
  for (const auto& [name, g] : grads) {
    auto it = params.slots.find(name);
    if (it == params.slots.end()) throw ConfigInvalid("adam_step: unknown parameter " + name);
    auto& s = it->second;
    if (!g.same_shape(s.value))
      throw ShapeMismatch("adam_step: gradient shape mismatch for " + name);
    s.step += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), s.step));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), s.step));
    for (std::int64_t i = 0; i < g.size(); ++i) {
      s.m[i] = beta1 * s.m[i] + (T(1) - beta1) * g[i];
      s.v[i] = beta2 * s.v[i] + (T(1) - beta2) * g[i] * g[i];
      const T mhat = s.m[i] / bc1;
      const T vhat = s.v[i] / bc2;
      s.value[i] -= lr * mhat / (static_cast<T>(std::sqrt(static_cast<double>(vhat))) + eps);
    }
    if (!s.value.all_finite()) throw NonFiniteValue("adam_step: parameter " + name);
  }
}

// Power scheduling: lr_t = lr0 / (1 + decay*t), t in epochs.
inline double lr_schedule(double lr0, double decay, double t) { return lr0 / (1.0 + decay * t); }

// Element-wise value clipping to [-c, c].
template <class T>
void clip_gradients(GradMap<T>& grads, T c = T(5)) {
  for (auto& [name, g] : grads)
    for (std::int64_t i = 0; i < g.size(); ++i) {
      if (g[i] > c) g[i] = c;
      if (g[i] < -c) g[i] = -c;
    }
}

template <class T>
Tensor<T> clip_gradients(Tensor<T> g, T c = T(5)) {
  for (std::int64_t i = 0; i < g.size(); ++i) {
    if (g[i] > c) g[i] = c;
    if (g[i] < -c) g[i] = -c;
  }
  return g;
}

// Glorot-style uniform init in +/- sqrt(6/(fan_in+fan_out)).
template <class T>
Tensor<T> glorot_uniform(Shape shape, Rng& rng) {
  double fan_in = static_cast<double>(shape.size() >= 1 ? shape[0] : 1);
  double fan_out = static_cast<double>(shape.size() >= 2 ? shape[1] : shape[0]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  return Tensor<T>::uniform(std::move(shape), rng, static_cast<T>(-bound),
                            static_cast<T>(bound));
}

}  // namespace medner
