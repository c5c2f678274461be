#pragma once

#include <cmath>
#include <vector>

#include "partgait/errors.hpp"
#include "partgait/gemm.hpp"
#include "partgait/tensor.hpp"

namespace partgait::pretrain {

template <typename T>
struct info_nce_result {
  T loss = 0;
  tensor<T> sim;     // (N,N): sim[i][j] = sim(k_i, q_j)
  tensor<T> grad_q;  // (N,P,C), empty unless requested
};

// Contrastive loss over part embeddings. Similarity between two samples
// is the mean over parts of per-part cosine similarity; row i of the
// softmax scores candidate q_j against target k_i, with j = i as the
// positive and the full batch (positive included) in the denominator.
// Gradients flow to q only — the targets come from the no-gradient
// teacher branch.
template <typename T>
info_nce_result<T> info_nce(const tensor<T>& q, const tensor<T>& k, T tau,
                            bool want_grad = true) {
  if (!q.same_shape(k) || q.ndim() != 3)
    throw shape_mismatch_error("info_nce: q " + q.describe() + " vs k " +
                               k.describe());
  if (!(tau > T(0))) throw bad_config_error("info_nce: tau must be positive");
  const int64_t n = q.dim(0), p = q.dim(1), c = q.dim(2);

  const auto normalize = [&](const tensor<T>& x, const char* which) {
    tensor<T> unit(x.shape());
    tensor<T> norms({n, p});
    for (int64_t i = 0; i < n * p; ++i) {
      T sq = 0;
      for (int64_t d = 0; d < c; ++d) sq += x[i * c + d] * x[i * c + d];
      const T nrm = std::sqrt(sq);
      if (!(nrm > T(0)))
        throw zero_vector_error(std::string("info_nce: zero-norm part in ") +
                                which);
      norms[i] = nrm;
      for (int64_t d = 0; d < c; ++d) unit[i * c + d] = x[i * c + d] / nrm;
    }
    return std::pair{std::move(unit), std::move(norms)};
  };
  auto [khat, kn] = normalize(k, "targets");
  auto [qhat, qn] = normalize(q, "queries");

  // Per-part cosine matrices cos_p[i][j], then sim = mean over parts.
  tensor<T> cos({p, n, n});
  std::vector<T> krow(static_cast<size_t>(n * c)), qrow(krow.size());
  for (int64_t pp = 0; pp < p; ++pp) {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < c; ++d) {
        krow[static_cast<size_t>(i * c + d)] = khat[(i * p + pp) * c + d];
        qrow[static_cast<size_t>(i * c + d)] = qhat[(i * p + pp) * c + d];
      }
    gemm<T>(false, true, n, n, c, T(1), krow.data(), qrow.data(), T(0),
            cos.data() + pp * n * n);
  }
  tensor<T> sim({n, n});
  for (int64_t ij = 0; ij < n * n; ++ij) {
    T acc = 0;
    for (int64_t pp = 0; pp < p; ++pp) acc += cos[pp * n * n + ij];
    sim[ij] = acc / static_cast<T>(p);
  }

  // Row-wise stable log-softmax; loss is the mean diagonal NLL.
  tensor<T> soft({n, n});
  T loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    T mx = sim[i * n] / tau;
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, sim[i * n + j] / tau);
    T z = 0;
    for (int64_t j = 0; j < n; ++j) {
      soft[i * n + j] = std::exp(sim[i * n + j] / tau - mx);
      z += soft[i * n + j];
    }
    for (int64_t j = 0; j < n; ++j) soft[i * n + j] /= z;
    loss -= std::log(soft[i * n + i]);
  }
  loss /= static_cast<T>(n);

  info_nce_result<T> out;
  out.loss = loss;
  out.sim = std::move(sim);
  if (!want_grad) return out;

  // dL/dsim[i][j] = (soft[i][j] - [i==j]) / (N * tau)
  tensor<T> g({n, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      g[i * n + j] = (soft[i * n + j] - (i == j ? T(1) : T(0))) /
                     (static_cast<T>(n) * tau);

  out.grad_q = tensor<T>({n, p, c});
  std::vector<T> a(static_cast<size_t>(n * c));
  for (int64_t pp = 0; pp < p; ++pp) {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < c; ++d)
        krow[static_cast<size_t>(i * c + d)] = khat[(i * p + pp) * c + d];
    // a[j] = sum_i g[i][j] * khat[i]
    gemm<T>(true, false, n, c, n, T(1), g.data(), krow.data(), T(0), a.data());
    for (int64_t j = 0; j < n; ++j) {
      T s = 0;
      for (int64_t i = 0; i < n; ++i)
        s += g[i * n + j] * cos[(pp * n + i) * n + j];
      const T inv_norm = T(1) / qn[j * p + pp];
      for (int64_t d = 0; d < c; ++d)
        out.grad_q[(j * p + pp) * c + d] =
            (a[static_cast<size_t>(j * c + d)] -
             s * qhat[(j * p + pp) * c + d]) *
            inv_norm / static_cast<T>(p);
    }
  }
  return out;
}

}  // namespace partgait::pretrain
