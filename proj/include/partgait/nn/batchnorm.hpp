#pragma once

#include <cmath>
#include <vector>

#include "partgait/errors.hpp"
#include "partgait/nn/param.hpp"
#include "partgait/tensor.hpp"

namespace partgait::nn {

// Batch normalization with per-slot statistics. The input is interpreted
// as (N, C, inner) with C = `channels` and inner inferred from the shape,
// which covers both feature maps (N,C,S,H,W) -> inner = S*H*W and
// per-part feature vectors (N,P,D) -> channels = P*D, inner = 1.
template <typename T>
struct batchnorm {
  int channels = 0;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);
  param<T> gamma, beta;
  tensor<T> running_mean, running_var;

  struct state {
    tensor<T> xhat;
    std::vector<T> invstd;
    int64_t reduce_n = 0;
  };

  void init(int num_channels) {
    channels = num_channels;
    gamma.init({channels}, /*apply_decay=*/false);
    beta.init({channels}, /*apply_decay=*/false);
    gamma.value.fill(T(1));
    running_mean = tensor<T>({channels});
    running_var = tensor<T>::full({channels}, T(1));
  }

  tensor<T> forward(const tensor<T>& x, state* st, bool training) {
    const auto [n, inner] = split_dims(x);
    tensor<T> y(x.shape());

    if (!training) {
      for (int c = 0; c < channels; ++c) {
        const T scale =
            gamma.value[c] / std::sqrt(running_var[c] + eps);
        const T shift = beta.value[c] - running_mean[c] * scale;
        apply_channel(x, y, n, inner, c,
                      [&](T v) { return v * scale + shift; });
      }
      return y;
    }

    const int64_t m = n * inner;
    std::vector<T> mean(channels), var(channels), invstd(channels);
    for (int c = 0; c < channels; ++c) {
      T sum = 0, sq = 0;
      reduce_channel(x, n, inner, c, [&](T v) {
        sum += v;
        sq += v * v;
      });
      mean[c] = sum / static_cast<T>(m);
      var[c] = sq / static_cast<T>(m) - mean[c] * mean[c];
      if (var[c] < T(0)) var[c] = T(0);
      invstd[c] = T(1) / std::sqrt(var[c] + eps);

      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean[c];
      const T unbiased =
          m > 1 ? var[c] * static_cast<T>(m) / static_cast<T>(m - 1) : var[c];
      running_var[c] = (T(1) - momentum) * running_var[c] + momentum * unbiased;
    }

    tensor<T> xhat(x.shape());
    for (int c = 0; c < channels; ++c) {
      const T mu = mean[c], is = invstd[c];
      const T g = gamma.value[c], b = beta.value[c];
      for (int64_t i = 0; i < n; ++i) {
        const int64_t base = (i * channels + c) * inner;
        for (int64_t j = 0; j < inner; ++j) {
          const T h = (x[base + j] - mu) * is;
          xhat[base + j] = h;
          y[base + j] = g * h + b;
        }
      }
    }
    if (st != nullptr) {
      st->xhat = std::move(xhat);
      st->invstd = std::move(invstd);
      st->reduce_n = m;
    }
    return y;
  }

  tensor<T> backward(const tensor<T>& dy, const state& st) {
    const auto [n, inner] = split_dims(dy);
    const int64_t m = st.reduce_n;
    tensor<T> dx(dy.shape());
    for (int c = 0; c < channels; ++c) {
      T sum_dy = 0, sum_dyh = 0;
      for (int64_t i = 0; i < n; ++i) {
        const int64_t base = (i * channels + c) * inner;
        for (int64_t j = 0; j < inner; ++j) {
          sum_dy += dy[base + j];
          sum_dyh += dy[base + j] * st.xhat[base + j];
        }
      }
      gamma.grad[c] += sum_dyh;
      beta.grad[c] += sum_dy;

      const T g = gamma.value[c], is = st.invstd[c];
      const T k = g * is / static_cast<T>(m);
      for (int64_t i = 0; i < n; ++i) {
        const int64_t base = (i * channels + c) * inner;
        for (int64_t j = 0; j < inner; ++j)
          dx[base + j] = k * (static_cast<T>(m) * dy[base + j] - sum_dy -
                              st.xhat[base + j] * sum_dyh);
      }
    }
    return dx;
  }

  void visit_params(const std::string& prefix, const param_visitor<T>& fn) {
    fn(prefix + ".gamma", gamma);
    fn(prefix + ".beta", beta);
  }

  void visit_buffers(const std::string& prefix, const buffer_visitor<T>& fn) {
    fn(prefix + ".running_mean", running_mean);
    fn(prefix + ".running_var", running_var);
  }

 private:
  std::pair<int64_t, int64_t> split_dims(const tensor<T>& x) const {
    const int64_t n = x.dim(0);
    if (n == 0 || x.numel() % (n * channels) != 0)
      throw shape_mismatch_error("batchnorm: input " + x.describe() +
                                 " not divisible into " +
                                 std::to_string(channels) + " channels");
    return {n, x.numel() / (n * channels)};
  }

  template <typename Fn>
  void reduce_channel(const tensor<T>& x, int64_t n, int64_t inner, int c,
                      Fn&& fn) const {
    for (int64_t i = 0; i < n; ++i) {
      const int64_t base = (i * channels + c) * inner;
      for (int64_t j = 0; j < inner; ++j) fn(x[base + j]);
    }
  }

  template <typename Fn>
  void apply_channel(const tensor<T>& x, tensor<T>& y, int64_t n,
                     int64_t inner, int c, Fn&& fn) const {
    for (int64_t i = 0; i < n; ++i) {
      const int64_t base = (i * channels + c) * inner;
      for (int64_t j = 0; j < inner; ++j) y[base + j] = fn(x[base + j]);
    }
  }
};

}  // namespace partgait::nn
