#pragma once

#include "partgait/rng.hpp"
#include "partgait/tensor.hpp"

namespace partgait::data {

struct augmentation_policy {
  double flip_prob = 0.0;
  double rotate_max_degrees = 0.0;
  double perspective_strength = 0.0;  // in [0,1]
  double erase_prob = 0.0;
  double erase_area_min = 0.02, erase_area_max = 0.33;
};

// One random parameterization per clip, applied identically to every
// frame: horizontal flip -> rotation -> perspective warp -> rectangular
// erase. The identity policy is a bit-exact no-op.
tensorf augment_clip(const tensorf& clip,  // (S,H,W)
                     const augmentation_policy& policy, rng_stream& rng);

}  // namespace partgait::data
