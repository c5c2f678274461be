#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "partgait/errors.hpp"

namespace partgait::pretrain {

struct lr_schedule {
  enum class kind { cosine, multistep };

  kind mode = kind::cosine;
  double lr0 = 0.05;
  // cosine
  int64_t t_max = 80000;
  double eta_min = 1e-5;
  // multistep
  std::vector<int64_t> milestones{20000, 30000};
  double gamma = 0.1;

  double at(int64_t t) const {
    if (t < 0) throw bad_step_error("lr_schedule: negative step");
    if (mode == kind::cosine) {
      if (t > t_max)
        throw bad_step_error("lr_schedule: step " + std::to_string(t) +
                             " beyond T_max " + std::to_string(t_max));
      const double x = std::cos(std::numbers::pi * static_cast<double>(t) /
                                static_cast<double>(t_max));
      return eta_min + (lr0 - eta_min) * (1.0 + x) / 2.0;
    }
    double lr = lr0;
    for (int64_t m : milestones)
      if (t >= m) lr *= gamma;
    return lr;
  }

  // Multiplicative factor relative to the base rate, used to scale
  // layer-wise group rates uniformly.
  double factor(int64_t t) const { return at(t) / lr0; }
};

}  // namespace partgait::pretrain
