#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace partgait {

// C (M x N) = alpha * op(A) * op(B) + beta * C, all row-major with
// explicit leading strides. Thin wrapper so the rest of the code never
// touches Eigen types directly.
template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, int64_t lda, const T* b, int64_t ldb, T beta, T* c,
          int64_t ldc) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<Eigen::Dynamic>;
  using CMap = Eigen::Map<Mat, 0, Stride>;
  using Map = Eigen::Map<const Mat, 0, Stride>;

  Map ma(a, trans_a ? k : m, trans_a ? m : k, Stride(lda));
  Map mb(b, trans_b ? n : k, trans_b ? k : n, Stride(ldb));
  CMap mc(c, m, n, Stride(ldc));

  const auto accumulate = [&](auto&& prod) {
    if (beta == T(0)) {
      mc.noalias() = alpha * prod;
    } else {
      mc *= beta;
      mc.noalias() += alpha * prod;
    }
  };

  if (!trans_a && !trans_b) {
    accumulate(ma * mb);
  } else if (trans_a && !trans_b) {
    accumulate(ma.transpose() * mb);
  } else if (!trans_a && trans_b) {
    accumulate(ma * mb.transpose());
  } else {
    accumulate(ma.transpose() * mb.transpose());
  }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  gemm(trans_a, trans_b, m, n, k, alpha, a, trans_a ? m : k, b, trans_b ? k : n,
       beta, c, n);
}

}  // namespace partgait
