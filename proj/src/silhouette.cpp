#include "partgait/data/silhouette.hpp"

#include <cmath>

#include "partgait/errors.hpp"

namespace partgait::data {

namespace {

tensorf binarize(const tensorf& x) {
  tensorf out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.5f ? 1.0f : 0.0f;
  return out;
}

// Bilinear resize with half-pixel sample centers; scale 1 is an exact
// identity, which the idempotence guarantee relies on.
tensorf resize_bilinear(const tensorf& x, int64_t oh, int64_t ow) {
  const int64_t h = x.dim(0), w = x.dim(1);
  if (h == oh && w == ow) return x;
  tensorf out({oh, ow});
  const double sy = static_cast<double>(h) / static_cast<double>(oh);
  const double sx = static_cast<double>(w) / static_cast<double>(ow);
  for (int64_t r = 0; r < oh; ++r) {
    double src_y = (static_cast<double>(r) + 0.5) * sy - 0.5;
    src_y = std::min(std::max(src_y, 0.0), static_cast<double>(h - 1));
    const int64_t y0 = static_cast<int64_t>(src_y);
    const int64_t y1 = std::min(y0 + 1, h - 1);
    const double fy = src_y - static_cast<double>(y0);
    for (int64_t c = 0; c < ow; ++c) {
      double src_x = (static_cast<double>(c) + 0.5) * sx - 0.5;
      src_x = std::min(std::max(src_x, 0.0), static_cast<double>(w - 1));
      const int64_t x0 = static_cast<int64_t>(src_x);
      const int64_t x1 = std::min(x0 + 1, w - 1);
      const double fx = src_x - static_cast<double>(x0);
      const double v =
          (1 - fy) * ((1 - fx) * x.at(y0, x0) + fx * x.at(y0, x1)) +
          fy * ((1 - fx) * x.at(y1, x0) + fx * x.at(y1, x1));
      out.at(r, c) = static_cast<float>(v);
    }
  }
  return out;
}

tensorf normalize_once(const tensorf& raw) {
  if (raw.ndim() != 2)
    throw shape_mismatch_error("normalize_silhouette: expected (H,W), got " +
                               raw.describe());
  const tensorf mask = binarize(raw);
  const int64_t h = mask.dim(0), w = mask.dim(1);

  int64_t top = -1, bottom = -1;
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c)
      if (mask.at(r, c) > 0) {
        if (top < 0) top = r;
        bottom = r;
        break;
      }
  if (top < 0)
    throw empty_silhouette_error("no pixel above threshold 0.5");

  const int64_t crop_h = bottom - top + 1;
  tensorf cropped({crop_h, w});
  std::copy(mask.data() + top * w, mask.data() + (bottom + 1) * w,
            cropped.data());

  const int64_t rw = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(
             static_cast<double>(w) * kFrameHeight /
             static_cast<double>(crop_h))));
  const tensorf resized = binarize(resize_bilinear(cropped, kFrameHeight, rw));

  double mass = 0, moment = 0;
  for (int64_t r = 0; r < kFrameHeight; ++r)
    for (int64_t c = 0; c < rw; ++c)
      if (resized.at(r, c) > 0) {
        mass += 1;
        moment += static_cast<double>(c);
      }
  if (mass == 0)
    throw empty_silhouette_error("silhouette vanished during resize");
  const double com = moment / mass;
  const int64_t shift =
      static_cast<int64_t>(std::floor(com + 0.5)) - kCenterColumn;

  tensorf out({kFrameHeight, kFrameWidth});
  for (int64_t r = 0; r < kFrameHeight; ++r)
    for (int64_t c = 0; c < kFrameWidth; ++c) {
      const int64_t src = c + shift;
      out.at(r, c) = (src >= 0 && src < rw) ? resized.at(r, src) : 0.0f;
    }
  return out;
}

}  // namespace

tensorf normalize_silhouette(const tensorf& raw) {
  tensorf cur = normalize_once(raw);
  // Cropping to the 44-column window can empty edge rows or move the
  // center of mass; rerun until stable (a few passes at most).
  for (int iter = 0; iter < 16; ++iter) {
    tensorf next = normalize_once(cur);
    bool same = true;
    for (int64_t i = 0; i < cur.numel() && same; ++i)
      same = cur[i] == next[i];
    if (same) break;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace partgait::data
