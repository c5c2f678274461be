#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "partgait/errors.hpp"
#include "partgait/tensor.hpp"

namespace partgait::finetune {

template <typename T>
struct loss_result {
  T loss = 0;
  tensor<T> grad;
};

// Batch-all triplet loss on per-part embeddings: every (anchor,
// positive, negative) triple contributes max(0, ||a-a+||^2 - ||a-a-||^2
// + margin), averaged over all valid triples and parts. The gradient is
// accumulated through per-pair coefficients, so the O(N^3) triple walk
// stays scalar.
template <typename T>
loss_result<T> triplet_loss(const tensor<T>& a, const std::vector<int>& labels,
                            T margin, bool want_grad = true) {
  if (a.ndim() != 3)
    throw shape_mismatch_error("triplet_loss expects (N,P,C), got " +
                               a.describe());
  const int64_t n = a.dim(0), p = a.dim(1), c = a.dim(2);
  if (static_cast<int64_t>(labels.size()) != n)
    throw shape_mismatch_error("triplet_loss: one label per sample");
  std::map<int, int64_t> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2)
    throw degenerate_batch_error("triplet_loss: need >= 2 distinct labels");
  for (const auto& [l, cnt] : counts)
    if (cnt < 2)
      throw degenerate_batch_error("triplet_loss: label " + std::to_string(l) +
                                   " has a single sample");

  int64_t total_triples = 0;
  for (int64_t i = 0; i < n; ++i) {
    const int64_t same = counts[labels[static_cast<std::size_t>(i)]];
    total_triples += (same - 1) * (n - same);
  }

  loss_result<T> res;
  if (want_grad) res.grad = tensor<T>(a.shape());
  const T scale = T(1) / (static_cast<T>(total_triples) * static_cast<T>(p));

  std::vector<T> d2(static_cast<std::size_t>(n * n));
  std::vector<T> coeff(static_cast<std::size_t>(n * n));
  for (int64_t part = 0; part < p; ++part) {
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        const T* ai = a.data() + (i * p + part) * c;
        const T* aj = a.data() + (j * p + part) * c;
        T sq = 0;
        for (int64_t d = 0; d < c; ++d) {
          const T diff = ai[d] - aj[d];
          sq += diff * diff;
        }
        d2[static_cast<std::size_t>(i * n + j)] = sq;
      }
    }
    std::fill(coeff.begin(), coeff.end(), T(0));
    for (int64_t i = 0; i < n; ++i) {
      const int li = labels[static_cast<std::size_t>(i)];
      for (int64_t j = 0; j < n; ++j) {
        if (j == i || labels[static_cast<std::size_t>(j)] != li) continue;
        for (int64_t k = 0; k < n; ++k) {
          if (labels[static_cast<std::size_t>(k)] == li) continue;
          const T h = d2[static_cast<std::size_t>(i * n + j)] -
                      d2[static_cast<std::size_t>(i * n + k)] + margin;
          if (h <= T(0)) continue;
          res.loss += h * scale;
          if (want_grad) {
            coeff[static_cast<std::size_t>(i * n + j)] += scale;
            coeff[static_cast<std::size_t>(i * n + k)] -= scale;
          }
        }
      }
    }
    if (!want_grad) continue;
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        const T w = coeff[static_cast<std::size_t>(i * n + j)];
        if (w == T(0)) continue;
        const T* ai = a.data() + (i * p + part) * c;
        const T* aj = a.data() + (j * p + part) * c;
        T* gi = res.grad.data() + (i * p + part) * c;
        T* gj = res.grad.data() + (j * p + part) * c;
        for (int64_t d = 0; d < c; ++d) {
          const T g = T(2) * w * (ai[d] - aj[d]);
          gi[d] += g;
          gj[d] -= g;
        }
      }
    }
  }
  return res;
}

template <typename T>
loss_result<T> cross_entropy(const tensor<T>& logits,
                             const std::vector<int>& labels,
                             bool want_grad = true) {
  if (logits.ndim() != 2)
    throw shape_mismatch_error("cross_entropy expects (N,K)");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw shape_mismatch_error("cross_entropy: one label per sample");
  loss_result<T> res;
  if (want_grad) res.grad = tensor<T>(logits.shape());
  for (int64_t i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k)
      throw bad_label_error("cross_entropy: label " + std::to_string(y) +
                            " outside [0," + std::to_string(k) + ")");
    const T* row = logits.data() + i * k;
    T top = row[0];
    for (int64_t j = 1; j < k; ++j) top = std::max(top, row[j]);
    T denom = 0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - top);
    const T log_denom = std::log(denom) + top;
    res.loss += (log_denom - row[y]) / static_cast<T>(n);
    if (want_grad) {
      T* g = res.grad.data() + i * k;
      for (int64_t j = 0; j < k; ++j)
        g[j] = std::exp(row[j] - log_denom) / static_cast<T>(n);
      g[y] -= T(1) / static_cast<T>(n);
    }
  }
  return res;
}

// Mean over samples and attributes of the per-attribute binary
// cross-entropy on sigmoid outputs.
template <typename T>
loss_result<T> multilabel_bce(const tensor<T>& logits,
                              const std::vector<std::vector<int>>& targets,
                              bool want_grad = true) {
  if (logits.ndim() != 2)
    throw shape_mismatch_error("multilabel_bce expects (N,A)");
  const int64_t n = logits.dim(0), a = logits.dim(1);
  if (static_cast<int64_t>(targets.size()) != n)
    throw shape_mismatch_error("multilabel_bce: one target row per sample");
  loss_result<T> res;
  if (want_grad) res.grad = tensor<T>(logits.shape());
  const T inv = T(1) / static_cast<T>(n * a);
  for (int64_t i = 0; i < n; ++i) {
    if (static_cast<int64_t>(targets[static_cast<std::size_t>(i)].size()) != a)
      throw shape_mismatch_error("multilabel_bce: ragged target row");
    for (int64_t j = 0; j < a; ++j) {
      const T z = logits.at(i, j);
      const int yv = targets[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (yv != 0 && yv != 1)
        throw bad_label_error("multilabel_bce: targets must be 0/1");
      const T y = static_cast<T>(yv);
      // max(z,0) - z*y + log(1+exp(-|z|)) is the stable softplus form.
      res.loss += (std::max(z, T(0)) - z * y +
                   std::log1p(std::exp(-std::abs(z)))) *
                  inv;
      if (want_grad)
        res.grad.at(i, j) = (T(1) / (T(1) + std::exp(-z)) - y) * inv;
    }
  }
  return res;
}

}  // namespace partgait::finetune
