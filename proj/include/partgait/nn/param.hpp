#pragma once

#include <functional>
#include <string>

#include "partgait/rng.hpp"
#include "partgait/tensor.hpp"

namespace partgait::nn {

// Trainable value plus its gradient accumulator. `decay` marks whether the
// optimizer applies weight decay (off for norm scales and biases).
template <typename T>
struct param {
  tensor<T> value;
  tensor<T> grad;
  bool decay = true;

  void init(std::vector<int64_t> shape, bool apply_decay = true) {
    value = tensor<T>(shape);
    grad = tensor<T>(std::move(shape));
    decay = apply_decay;
  }

  void zero_grad() { grad.zero(); }
};

template <typename T>
using param_visitor = std::function<void(const std::string&, param<T>&)>;

// Non-trainable persistent state (batch-norm running statistics).
template <typename T>
using buffer_visitor = std::function<void(const std::string&, tensor<T>&)>;

// Kaiming-style fan-in scaled normal init used for all conv / linear weights.
template <typename T>
void init_kaiming(tensor<T>& w, int64_t fan_in, rng_stream& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<T>(rng.normal() * scale);
}

}  // namespace partgait::nn
