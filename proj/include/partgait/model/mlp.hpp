#pragma once

#include <vector>

#include "partgait/errors.hpp"
#include "partgait/gemm.hpp"
#include "partgait/nn/batchnorm.hpp"
#include "partgait/nn/ops.hpp"
#include "partgait/nn/param.hpp"
#include "partgait/tensor.hpp"

namespace partgait::model {

// Independent linear map per part: (N,P,in) -> (N,P,out) with weights
// (P,out,in). Rows of part p sit at stride P*in apart, handled by GEMM
// leading-dimension arguments instead of repacking.
template <typename T>
struct part_linear {
  int parts = 0, in_dim = 0, out_dim = 0;
  bool has_bias = true;
  nn::param<T> w, b;

  struct state {
    tensor<T> x;
  };

  void init(int num_parts, int in, int out, bool bias, rng_stream& rng) {
    parts = num_parts;
    in_dim = in;
    out_dim = out;
    has_bias = bias;
    w.init({parts, out, in});
    nn::init_kaiming(w.value, in, rng);
    if (has_bias) b.init({parts, out}, /*apply_decay=*/false);
  }

  tensor<T> forward(const tensor<T>& x, state* st) const {
    if (x.ndim() != 3 || x.dim(1) != parts || x.dim(2) != in_dim)
      throw shape_mismatch_error("part_linear: expected (N," +
                                 std::to_string(parts) + "," +
                                 std::to_string(in_dim) + "), got " +
                                 x.describe());
    const int64_t n = x.dim(0);
    tensor<T> y({n, parts, out_dim});
    for (int p = 0; p < parts; ++p) {
      gemm<T>(false, true, n, out_dim, in_dim, T(1),
              x.data() + p * in_dim, static_cast<int64_t>(parts) * in_dim,
              w.value.data() + static_cast<int64_t>(p) * out_dim * in_dim,
              in_dim, T(0), y.data() + p * out_dim,
              static_cast<int64_t>(parts) * out_dim);
      if (has_bias)
        for (int64_t i = 0; i < n; ++i)
          for (int o = 0; o < out_dim; ++o)
            y.at(i, p, o) += b.value[p * out_dim + o];
    }
    if (st != nullptr) st->x = x;
    return y;
  }

  tensor<T> backward(const tensor<T>& dy, const state& st) {
    const int64_t n = dy.dim(0);
    tensor<T> dx({n, parts, in_dim});
    for (int p = 0; p < parts; ++p) {
      // dW_p += dy_p^T x_p ; dx_p = dy_p W_p
      gemm<T>(true, false, out_dim, in_dim, n, T(1), dy.data() + p * out_dim,
              static_cast<int64_t>(parts) * out_dim,
              st.x.data() + p * in_dim, static_cast<int64_t>(parts) * in_dim,
              T(1), w.grad.data() + static_cast<int64_t>(p) * out_dim * in_dim,
              in_dim);
      gemm<T>(false, false, n, in_dim, out_dim, T(1), dy.data() + p * out_dim,
              static_cast<int64_t>(parts) * out_dim,
              w.value.data() + static_cast<int64_t>(p) * out_dim * in_dim,
              in_dim, T(0), dx.data() + p * in_dim,
              static_cast<int64_t>(parts) * in_dim);
      if (has_bias)
        for (int64_t i = 0; i < n; ++i)
          for (int o = 0; o < out_dim; ++o)
            b.grad[p * out_dim + o] += dy.at(i, p, o);
    }
    return dx;
  }

  void visit_params(const std::string& prefix, const nn::param_visitor<T>& fn) {
    fn(prefix + ".weight", w);
    if (has_bias) fn(prefix + ".bias", b);
  }
};

// Per-part MLP: linear layers with batch-norm + relu between them (none
// after the last). dims = {in, hidden..., out}; norms use per-(part,
// channel) statistics over the batch.
template <typename T>
struct part_mlp {
  std::vector<part_linear<T>> linears;
  std::vector<nn::batchnorm<T>> norms;
  int parts = 0;

  struct state {
    std::vector<typename part_linear<T>::state> lin_s;
    std::vector<typename nn::batchnorm<T>::state> bn_s;
    std::vector<typename nn::relu<T>::state> relu_s;
  };

  void init(int num_parts, const std::vector<int>& dims, rng_stream& rng) {
    parts = num_parts;
    linears.clear();
    norms.clear();
    const size_t layers = dims.size() - 1;
    for (size_t i = 0; i < layers; ++i) {
      linears.emplace_back();
      linears.back().init(parts, dims[i], dims[i + 1], /*bias=*/true, rng);
      if (i + 1 < layers) {
        norms.emplace_back();
        norms.back().init(parts * dims[i + 1]);
      }
    }
  }

  int out_dim() const { return linears.back().out_dim; }
  int in_dim() const { return linears.front().in_dim; }

  tensor<T> forward(const tensor<T>& x, state* st, bool training) {
    if (st != nullptr) {
      st->lin_s.resize(linears.size());
      st->bn_s.resize(norms.size());
      st->relu_s.resize(norms.size());
    }
    tensor<T> h = x;
    for (size_t i = 0; i < linears.size(); ++i) {
      h = linears[i].forward(h, st ? &st->lin_s[i] : nullptr);
      if (i < norms.size()) {
        h = norms[i].forward(h, st ? &st->bn_s[i] : nullptr, training);
        h = nn::relu<T>::forward(h, st ? &st->relu_s[i] : nullptr);
      }
    }
    return h;
  }

  tensor<T> backward(const tensor<T>& dy, const state& st) {
    tensor<T> d = dy;
    for (size_t i = linears.size(); i-- > 0;) {
      if (i < norms.size()) {
        d = nn::relu<T>::backward(d, st.relu_s[i]);
        d = norms[i].backward(d, st.bn_s[i]);
      }
      d = linears[i].backward(d, st.lin_s[i]);
    }
    return d;
  }

  void visit_params(const std::string& p, const nn::param_visitor<T>& fn) {
    for (size_t i = 0; i < linears.size(); ++i)
      linears[i].visit_params(p + ".fc" + std::to_string(i), fn);
    for (size_t i = 0; i < norms.size(); ++i)
      norms[i].visit_params(p + ".bn" + std::to_string(i), fn);
  }

  void visit_buffers(const std::string& p, const nn::buffer_visitor<T>& fn) {
    for (size_t i = 0; i < norms.size(); ++i)
      norms[i].visit_buffers(p + ".bn" + std::to_string(i), fn);
  }
};

}  // namespace partgait::model
