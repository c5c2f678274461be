#pragma once

#include <vector>

#include "partgait/errors.hpp"
#include "partgait/gemm.hpp"
#include "partgait/nn/param.hpp"
#include "partgait/tensor.hpp"

namespace partgait::nn {

// 3-D convolution over (N, C, S, H, W) clips, bias-free, with implicit
// zero padding of (kt/2, kh/2, kw/2) and stride (1, sh, sw). Implemented
// as per-sample im2col + GEMM; the weight is stored flattened as
// (out_ch, in_ch*kt*kh*kw) so the GEMM writes straight into the output
// tensor without a scatter pass.
template <typename T>
struct conv3d {
  int in_ch = 0, out_ch = 0;
  int kt = 1, kh = 1, kw = 1;
  int sh = 1, sw = 1;
  param<T> weight;

  struct state {
    tensor<T> x;
  };

  void init(int in_channels, int out_channels, int kernel_t, int kernel_h,
            int kernel_w, int stride_h, int stride_w, rng_stream& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    kt = kernel_t;
    kh = kernel_h;
    kw = kernel_w;
    sh = stride_h;
    sw = stride_w;
    weight.init({out_ch, static_cast<int64_t>(in_ch) * kt * kh * kw});
    init_kaiming(weight.value, static_cast<int64_t>(in_ch) * kt * kh * kw, rng);
  }

  int64_t out_h(int64_t h) const { return (h + 2 * (kh / 2) - kh) / sh + 1; }
  int64_t out_w(int64_t w) const { return (w + 2 * (kw / 2) - kw) / sw + 1; }

  tensor<T> forward(const tensor<T>& x, state* st) const {
    check_input(x);
    const int64_t n = x.dim(0), s = x.dim(2), h = x.dim(3), w = x.dim(4);
    const int64_t ho = out_h(h), wo = out_w(w);
    const int64_t k = static_cast<int64_t>(in_ch) * kt * kh * kw;
    const int64_t cols = s * ho * wo;

    tensor<T> y({n, out_ch, s, ho, wo});
    std::vector<T> col(static_cast<size_t>(k * cols));
    for (int64_t i = 0; i < n; ++i) {
      im2col(x.data() + i * in_ch * s * h * w, s, h, w, ho, wo, col.data());
      gemm<T>(false, false, out_ch, cols, k, T(1), weight.value.data(),
              col.data(), T(0), y.data() + i * out_ch * cols);
    }
    if (st != nullptr) st->x = x;
    return y;
  }

  tensor<T> backward(const tensor<T>& dy, const state& st) {
    const tensor<T>& x = st.x;
    const int64_t n = x.dim(0), s = x.dim(2), h = x.dim(3), w = x.dim(4);
    const int64_t ho = out_h(h), wo = out_w(w);
    const int64_t k = static_cast<int64_t>(in_ch) * kt * kh * kw;
    const int64_t cols = s * ho * wo;

    tensor<T> dx(x.shape());
    std::vector<T> col(static_cast<size_t>(k * cols));
    std::vector<T> colgrad(static_cast<size_t>(k * cols));
    for (int64_t i = 0; i < n; ++i) {
      const T* dyi = dy.data() + i * out_ch * cols;
      im2col(x.data() + i * in_ch * s * h * w, s, h, w, ho, wo, col.data());
      gemm<T>(false, true, out_ch, k, cols, T(1), dyi, col.data(), T(1),
              weight.grad.data());
      gemm<T>(true, false, k, cols, out_ch, T(1), weight.value.data(), dyi,
              T(0), colgrad.data());
      col2im(colgrad.data(), s, h, w, ho, wo,
             dx.data() + i * in_ch * s * h * w);
    }
    return dx;
  }

  void visit_params(const std::string& prefix, const param_visitor<T>& fn) {
    fn(prefix + ".weight", weight);
  }

 private:
  void check_input(const tensor<T>& x) const {
    if (x.ndim() != 5 || x.dim(1) != in_ch)
      throw shape_mismatch_error("conv3d: expected (N," +
                                 std::to_string(in_ch) + ",S,H,W), got " +
                                 x.describe());
  }

  template <typename Fill>
  void walk(int64_t s, int64_t h, int64_t w, int64_t ho, int64_t wo,
            Fill&& fill) const {
    const int pt = kt / 2, ph = kh / 2, pw = kw / 2;
    int64_t row = 0;
    for (int64_t c = 0; c < in_ch; ++c)
      for (int dt = 0; dt < kt; ++dt)
        for (int dh = 0; dh < kh; ++dh)
          for (int dw = 0; dw < kw; ++dw, ++row) {
            int64_t idx = row * s * ho * wo;
            for (int64_t t = 0; t < s; ++t) {
              const int64_t ts = t - pt + dt;
              for (int64_t y = 0; y < ho; ++y) {
                const int64_t ys = y * sh - ph + dh;
                const bool live = ts >= 0 && ts < s && ys >= 0 && ys < h;
                for (int64_t xo = 0; xo < wo; ++xo, ++idx) {
                  const int64_t xs = xo * sw - pw + dw;
                  if (live && xs >= 0 && xs < w)
                    fill(idx, ((c * s + ts) * h + ys) * w + xs);
                }
              }
            }
          }
  }

  void im2col(const T* x, int64_t s, int64_t h, int64_t w, int64_t ho,
              int64_t wo, T* col) const {
    std::fill(col, col + in_ch * kt * kh * kw * s * ho * wo, T(0));
    walk(s, h, w, ho, wo,
         [&](int64_t ci, int64_t xi) { col[ci] = x[xi]; });
  }

  void col2im(const T* col, int64_t s, int64_t h, int64_t w, int64_t ho,
              int64_t wo, T* dx) const {
    walk(s, h, w, ho, wo,
         [&](int64_t ci, int64_t xi) { dx[xi] += col[ci]; });
  }
};

}  // namespace partgait::nn
