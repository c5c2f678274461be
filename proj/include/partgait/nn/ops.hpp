#pragma once

#include <vector>

#include "partgait/tensor.hpp"

namespace partgait::nn {

template <typename T>
struct relu {
  struct state {
    std::vector<uint8_t> mask;
  };

  static tensor<T> forward(const tensor<T>& x, state* st) {
    tensor<T> y(x.shape());
    if (st != nullptr) st->mask.assign(static_cast<size_t>(x.numel()), 0);
    for (int64_t i = 0; i < x.numel(); ++i) {
      const bool live = x[i] > T(0);
      y[i] = live ? x[i] : T(0);
      if (st != nullptr) st->mask[static_cast<size_t>(i)] = live;
    }
    return y;
  }

  static tensor<T> backward(const tensor<T>& dy, const state& st) {
    tensor<T> dx(dy.shape());
    for (int64_t i = 0; i < dy.numel(); ++i)
      dx[i] = st.mask[static_cast<size_t>(i)] ? dy[i] : T(0);
    return dx;
  }
};

template <typename T>
void add_inplace(tensor<T>& a, const tensor<T>& b) {
  for (int64_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

}  // namespace partgait::nn
