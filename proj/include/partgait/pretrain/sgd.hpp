#pragma once

#include <deque>
#include <string>
#include <vector>

#include "partgait/nn/param.hpp"
#include "partgait/tensor.hpp"

namespace partgait::pretrain {

// SGD with momentum and decoupled-by-flag weight decay: decay is added
// to the gradient (so one step from rest scales a decay-eligible
// parameter by exactly 1 - lr*wd) and skipped for parameters flagged
// decay=false (norm scales, biases). Parameters live in groups with
// their own base rates; `step` scales every group by a common schedule
// factor.
template <typename T>
struct sgd {
  struct entry {
    std::string name;
    nn::param<T>* p = nullptr;
    tensor<T> velocity;
  };
  struct group {
    T base_lr = T(0);
    std::vector<entry> entries;
  };

  T momentum = static_cast<T>(0.9);
  T weight_decay = static_cast<T>(5e-4);
  std::deque<group> groups;  // deque: add_group hands out stable references

  group& add_group(T base_lr) {
    groups.push_back(group{base_lr, {}});
    return groups.back();
  }

  void add_param(group& g, const std::string& name, nn::param<T>& p) {
    entry e;
    e.name = name;
    e.p = &p;
    e.velocity = tensor<T>(p.value.shape());
    g.entries.push_back(std::move(e));
  }

  void zero_grad() {
    for (auto& g : groups)
      for (auto& e : g.entries) e.p->zero_grad();
  }

  void step(T factor) {
    for (auto& g : groups) {
      const T lr = g.base_lr * factor;
      for (auto& e : g.entries) {
        nn::param<T>& p = *e.p;
        for (int64_t i = 0; i < p.value.numel(); ++i) {
          T grad = p.grad[i];
          if (p.decay) grad += weight_decay * p.value[i];
          e.velocity[i] = momentum * e.velocity[i] + grad;
          p.value[i] -= lr * e.velocity[i];
        }
      }
    }
  }

  int64_t optimized_count() const {
    int64_t total = 0;
    for (const auto& g : groups)
      for (const auto& e : g.entries) total += e.p->value.numel();
    return total;
  }

  template <typename Fn>
  void visit_velocity(Fn&& fn) {
    for (size_t gi = 0; gi < groups.size(); ++gi)
      for (auto& e : groups[gi].entries)
        fn("opt.g" + std::to_string(gi) + "." + e.name, e.velocity);
  }
};

}  // namespace partgait::pretrain
