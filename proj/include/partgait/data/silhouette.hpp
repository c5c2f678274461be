#pragma once

#include "partgait/tensor.hpp"

namespace partgait::data {

inline constexpr int kFrameHeight = 64;
inline constexpr int kFrameWidth = 44;
inline constexpr int kCenterColumn = 22;

// Size-normalize a raw silhouette of any dimensions to the canonical
// binary 64x44 frame: binarize at 0.5, crop to the vertical extent,
// resize to height 64 (aspect preserved), re-binarize, and place the
// horizontal center of mass at column 22 of a 44-wide canvas. The
// procedure is run to a fixed point so normalizing an already-normalized
// frame reproduces it bit-exactly.
tensorf normalize_silhouette(const tensorf& raw);  // empty_silhouette_error

}  // namespace partgait::data
