#pragma once

#include <cmath>
#include <vector>

#include "medner/tensor.hpp"

namespace medner {

struct TsneConfig {
  double perplexity = 30.0;
  int iters = 1000;
  double learning_rate = 200.0;
  int exaggeration_iters = 250;   // x12 early exaggeration window
  double exaggeration = 12.0;
  std::uint64_t seed = 1;
};

struct TsneResult {
  Tensor<double> coords;  // N x 2
  double initial_kl = 0;
  double final_kl = 0;
};

namespace detail {

// Per-row binary search on the Gaussian bandwidth until the row entropy
// matches log(perplexity) within 1e-4. Degenerate rows (all equal distances)
// cap out and end up uniform.
inline void gaussian_affinities(const Tensor<double>& D, double perplexity, Tensor<double>& P) {
  const std::int64_t N = D.dim(0);
  const double target_entropy = std::log(perplexity);
  for (std::int64_t i = 0; i < N; ++i) {
    double beta = 1.0, beta_min = -1e300, beta_max = 1e300;
    for (int it = 0; it < 200; ++it) {
      double sum = 0, dot = 0;
      for (std::int64_t j = 0; j < N; ++j) {
        if (j == i) {
          P.at(i, j) = 0;
          continue;
        }
        const double p = std::exp(-beta * D.at(i, j));
        P.at(i, j) = p;
        sum += p;
        dot += p * D.at(i, j);
      }
      const double H = sum > 0 ? std::log(sum) + beta * dot / sum : 0.0;
      const double diff = H - target_entropy;
      if (std::fabs(diff) < 1e-4) break;
      if (diff > 0) {
        beta_min = beta;
        beta = beta_max >= 1e300 ? beta * 2 : (beta + beta_max) / 2;
      } else {
        beta_max = beta;
        beta = beta_min <= -1e300 ? beta / 2 : (beta + beta_min) / 2;
      }
    }
    double sum = 0;
    for (std::int64_t j = 0; j < N; ++j) sum += P.at(i, j);
    if (sum <= 0) {
      // all-identical inputs: fall back to a uniform row
      for (std::int64_t j = 0; j < N; ++j) P.at(i, j) = j == i ? 0.0 : 1.0 / static_cast<double>(N - 1);
    } else {
      for (std::int64_t j = 0; j < N; ++j) P.at(i, j) /= sum;
    }
  }
}

inline double kl_divergence(const Tensor<double>& P, const Tensor<double>& Y) {
  const std::int64_t N = P.dim(0);
  double sum_q = 0;
  Tensor<double> W({N, N});
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j) {
      double d2 = 0;
      for (int k = 0; k < 2; ++k) {
        const double diff = Y.at(i, k) - Y.at(j, k);
        d2 += diff * diff;
      }
      const double w = 1.0 / (1.0 + d2);
      W.at(i, j) = w;
      W.at(j, i) = w;
      sum_q += 2 * w;
    }
  double kl = 0;
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = 0; j < N; ++j) {
      if (i == j) continue;
      const double p = P.at(i, j);
      if (p <= 0) continue;
      const double q = std::max(W.at(i, j) / sum_q, 1e-12);
      kl += p * std::log(p / q);
    }
  return kl;
}

}  // namespace detail

// Exact (non-tree) t-SNE to two dimensions with early exaggeration and the
// usual momentum switch at iteration 250.
inline TsneResult tsne_project(const Tensor<double>& X, const TsneConfig& cfg = {}) {
  if (X.rank() != 2) throw ShapeMismatch("tsne_project: expects an N x d matrix");
  const std::int64_t N = X.dim(0), d = X.dim(1);
  if (static_cast<double>(N) < 3 * cfg.perplexity)
    throw TooFewPoints("tsne_project: need at least 3*perplexity points, have " +
                       std::to_string(N));

  // squared Euclidean distances
  Tensor<double> D({N, N});
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j) {
      double acc = 0;
      for (std::int64_t k = 0; k < d; ++k) {
        const double diff = X.at(i, k) - X.at(j, k);
        acc += diff * diff;
      }
      D.at(i, j) = acc;
      D.at(j, i) = acc;
    }

  Tensor<double> P({N, N});
  detail::gaussian_affinities(D, cfg.perplexity, P);
  // symmetrize and normalize to a joint distribution
  double total = 0;
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j) {
      const double p = P.at(i, j) + P.at(j, i);
      P.at(i, j) = p;
      P.at(j, i) = p;
      total += 2 * p;
    }
  for (std::int64_t i = 0; i < N * N; ++i) P[i] = std::max(P[i] / total, 0.0);

  Rng rng(Rng::derive(cfg.seed, "tsne"));
  Tensor<double> Y({N, 2});
  for (std::int64_t i = 0; i < Y.size(); ++i) Y[i] = rng.normal() * 1e-4;

  TsneResult result;
  result.initial_kl = detail::kl_divergence(P, Y);

  Tensor<double> dY({N, 2}), velocity({N, 2});
  Tensor<double> gains = Tensor<double>::full({N, 2}, 1.0);
  Tensor<double> Q({N, N});

  for (int iter = 0; iter < cfg.iters; ++iter) {
    const double exaggeration = iter < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
    const double momentum = iter < cfg.exaggeration_iters ? 0.5 : 0.8;

    double sum_q = 0;
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t j = i + 1; j < N; ++j) {
        double d2 = 0;
        for (int k = 0; k < 2; ++k) {
          const double diff = Y.at(i, k) - Y.at(j, k);
          d2 += diff * diff;
        }
        const double w = 1.0 / (1.0 + d2);
        Q.at(i, j) = w;
        Q.at(j, i) = w;
        sum_q += 2 * w;
      }

    for (std::int64_t i = 0; i < dY.size(); ++i) dY[i] = 0;
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t j = 0; j < N; ++j) {
        if (i == j) continue;
        const double w = Q.at(i, j);
        const double mult = (exaggeration * P.at(i, j) - w / sum_q) * w;
        for (int k = 0; k < 2; ++k) dY.at(i, k) += 4.0 * mult * (Y.at(i, k) - Y.at(j, k));
      }

    for (std::int64_t i = 0; i < Y.size(); ++i) {
      gains[i] = (dY[i] > 0) != (velocity[i] > 0) ? gains[i] + 0.2 : gains[i] * 0.8;
      if (gains[i] < 0.01) gains[i] = 0.01;
      velocity[i] = momentum * velocity[i] - cfg.learning_rate * gains[i] * dY[i];
      Y[i] += velocity[i];
    }
    // re-center
    for (int k = 0; k < 2; ++k) {
      double mean = 0;
      for (std::int64_t i = 0; i < N; ++i) mean += Y.at(i, k);
      mean /= static_cast<double>(N);
      for (std::int64_t i = 0; i < N; ++i) Y.at(i, k) -= mean;
    }
  }

  if (!Y.all_finite()) throw NonFiniteValue("tsne_project: diverged");
  result.final_kl = detail::kl_divergence(P, Y);
  result.coords = std::move(Y);
  return result;
}

// P-matrix accessor for property tests: symmetric, non-negative, sums to 1.
inline Tensor<double> tsne_joint_probabilities(const Tensor<double>& X, double perplexity) {
  const std::int64_t N = X.dim(0), d = X.dim(1);
  Tensor<double> D({N, N});
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j) {
      double acc = 0;
      for (std::int64_t k = 0; k < d; ++k) {
        const double diff = X.at(i, k) - X.at(j, k);
        acc += diff * diff;
      }
      D.at(i, j) = acc;
      D.at(j, i) = acc;
    }
  Tensor<double> P({N, N});
  detail::gaussian_affinities(D, perplexity, P);
  double total = 0;
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = i + 1; j < N; ++j) {
      const double p = P.at(i, j) + P.at(j, i);
      P.at(i, j) = p;
      P.at(j, i) = p;
      total += 2 * p;
    }
  for (std::int64_t i = 0; i < N * N; ++i) P[i] /= total;
  return P;
}

}  // namespace medner
