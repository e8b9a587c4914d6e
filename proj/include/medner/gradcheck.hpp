#pragma once

#include <functional>
#include <string>

#include "medner/optim.hpp"
#include "medner/tape.hpp"

namespace medner {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
};

// Builds the forward pass for a scalar loss. The callable receives a fresh
// graph plus one leaf Var per parameter (same names as the store) and must
// return the loss Var. It must be deterministic (dropout disabled).
template <class T>
using LossBuilder =
    std::function<typename Graph<T>::Var(Graph<T>&, std::map<std::string, typename Graph<T>::Var>&)>;

// Central finite differences against the tape gradient, parameter by
// parameter. Relative error uses max(|analytic|, |numeric|, 1) as the
// denominator so near-zero gradients are judged on absolute error.
inline double gradcheck_rel_err(double analytic, double numeric) {
  double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1.0});
  return std::fabs(analytic - numeric) / denom;
}

template <class T>
GradCheckResult finite_diff_check(ParamStore<T>& params, const LossBuilder<T>& build,
                                  double h = 1e-5) {
  static_assert(std::is_floating_point_v<T>);
  auto eval = [&](bool want_grads, GradMap<T>* grads) -> double {
    Graph<T> g;
    std::map<std::string, typename Graph<T>::Var> vars;
    for (auto& [name, slot] : params.slots) vars[name] = g.input(slot.value, want_grads);
    auto loss = build(g, vars);
    if (g.value(loss).size() != 1) throw ShapeMismatch("finite_diff_check: loss must be scalar");
    double out = static_cast<double>(g.value(loss)[0]);
    if (!std::isfinite(out)) throw NonFiniteValue("finite_diff_check: loss");
    if (want_grads) {
      g.backward(loss);
      for (auto& [name, var] : vars) (*grads)[name] = g.grad(var);
    }
    return out;
  };

  GradMap<T> analytic;
  eval(true, &analytic);

  GradCheckResult result;
  for (auto& [name, slot] : params.slots) {
    Tensor<T>& p = slot.value;
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const T orig = p[i];
      const double step = h * std::max(1.0, std::fabs(static_cast<double>(orig)));
      p[i] = orig + static_cast<T>(step);
      const double lp = eval(false, nullptr);
      p[i] = orig - static_cast<T>(step);
      const double lm = eval(false, nullptr);
      p[i] = orig;
      const double numeric = (lp - lm) / (2.0 * step);
      const double err = gradcheck_rel_err(static_cast<double>(analytic[name][i]), numeric);
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace medner
