#pragma once

#include <cstdint>
#include <vector>

#include "partgait/errors.hpp"
#include "partgait/rng.hpp"
#include "partgait/tensor.hpp"

namespace partgait::parts {

// Horizontal bands of a clip (or feature map) batch, stacked along the
// batch axis sample-major: row b*p + j holds band j (top to bottom after
// the circular shift) of sample b.
template <typename T>
struct part_bundle {
  tensor<T> parts;              // (N*p, C, S, H/p, W)
  int p = 1;
  std::vector<int> shift_rows;  // per original sample, in input rows
  int64_t in_height = 0;

  int64_t num_samples() const { return parts.dim(0) / p; }
};

namespace detail {

// y[...,r,:] = x[...,(r - shift) mod H,:] — circular shift downward.
template <typename T>
void copy_shifted_rows(const T* src, T* dst, int64_t planes, int64_t h,
                       int64_t w, int shift) {
  for (int64_t pl = 0; pl < planes; ++pl) {
    const T* sp = src + pl * h * w;
    T* dp = dst + pl * h * w;
    for (int64_t r = 0; r < h; ++r) {
      const int64_t src_r = (r - shift % h + h) % h;
      std::copy(sp + src_r * w, sp + (src_r + 1) * w, dp + r * w);
    }
  }
}

}  // namespace detail

template <typename T>
void check_split_args(const tensor<T>& x, int p, int shift_rows) {
  if (x.ndim() != 5)
    throw shape_mismatch_error("split: expected (N,C,S,H,W), got " +
                               x.describe());
  const int64_t h = x.dim(3);
  if (p < 1 || h % p != 0)
    throw indivisible_height_error("split: p=" + std::to_string(p) +
                                   " does not divide height " +
                                   std::to_string(h));
  if (shift_rows < 0 || shift_rows >= h / p)
    throw bad_shift_error("split: shift " + std::to_string(shift_rows) +
                          " outside [0, " + std::to_string(h / p) + ")");
}

// Circularly shift each sample downward by its shift, then cut into p
// contiguous bands. Band j of sample b lands at stacked row b*p + j.
template <typename T>
part_bundle<T> split(const tensor<T>& x, int p,
                     const std::vector<int>& shifts) {
  for (int s : shifts) check_split_args(x, p, s);
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), h = x.dim(3),
                w = x.dim(4);
  if (static_cast<int64_t>(shifts.size()) != n)
    throw shape_mismatch_error("split: one shift per sample required");

  const int64_t hp = h / p;
  part_bundle<T> out;
  out.p = p;
  out.shift_rows = shifts;
  out.in_height = h;
  out.parts = tensor<T>({n * p, c, t, hp, w});

  tensor<T> shifted({c, t, h, w});
  for (int64_t b = 0; b < n; ++b) {
    detail::copy_shifted_rows(x.data() + b * c * t * h * w, shifted.data(),
                              c * t, h, w, shifts[static_cast<size_t>(b)]);
    for (int64_t j = 0; j < p; ++j) {
      T* dst = out.parts.data() + (b * p + j) * c * t * hp * w;
      for (int64_t pl = 0; pl < c * t; ++pl)
        std::copy(shifted.data() + (pl * h + j * hp) * w,
                  shifted.data() + (pl * h + (j + 1) * hp) * w,
                  dst + pl * hp * w);
    }
  }
  return out;
}

template <typename T>
part_bundle<T> split(const tensor<T>& x, int p, int shift_rows) {
  return split(x, p, std::vector<int>(static_cast<size_t>(x.dim(0)),
                                      shift_rows));
}

// Concatenate bands back along height (in recorded order), then undo the
// circular shift at feature resolution: round(shift * H_feat / H_in).
template <typename T>
tensor<T> reassemble(const part_bundle<T>& bundle) {
  const tensor<T>& f = bundle.parts;
  if (f.ndim() != 5)
    throw shape_mismatch_error("reassemble: expected stacked (N*p,C,S,h,W)");
  const int p = bundle.p;
  const int64_t n = f.dim(0) / p, c = f.dim(1), t = f.dim(2), hp = f.dim(3),
                w = f.dim(4);
  const int64_t h = hp * p;

  tensor<T> out({n, c, t, h, w});
  tensor<T> cat({c, t, h, w});
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t j = 0; j < p; ++j) {
      const T* src = f.data() + (b * p + j) * c * t * hp * w;
      for (int64_t pl = 0; pl < c * t; ++pl)
        std::copy(src + pl * hp * w, src + (pl + 1) * hp * w,
                  cat.data() + (pl * h + j * hp) * w);
    }
    const double scale = static_cast<double>(h) /
                         static_cast<double>(bundle.in_height);
    const int inv = static_cast<int>(std::llround(
        bundle.shift_rows[static_cast<size_t>(b)] * scale));
    detail::copy_shifted_rows(cat.data(), out.data() + b * c * t * h * w,
                              c * t, h, w, -inv);
  }
  return out;
}

// Gradient of reassemble with respect to the stacked parts: apply the
// forward circular shift to the incoming gradient, then cut into bands.
template <typename T>
tensor<T> reassemble_backward(const tensor<T>& dy,
                              const part_bundle<T>& bundle) {
  const int p = bundle.p;
  const int64_t n = dy.dim(0), c = dy.dim(1), t = dy.dim(2), h = dy.dim(3),
                w = dy.dim(4);
  const int64_t hp = h / p;

  tensor<T> dparts({n * p, c, t, hp, w});
  tensor<T> shifted({c, t, h, w});
  for (int64_t b = 0; b < n; ++b) {
    const double scale = static_cast<double>(h) /
                         static_cast<double>(bundle.in_height);
    const int inv = static_cast<int>(std::llround(
        bundle.shift_rows[static_cast<size_t>(b)] * scale));
    detail::copy_shifted_rows(dy.data() + b * c * t * h * w, shifted.data(),
                              c * t, h, w, inv);
    for (int64_t j = 0; j < p; ++j) {
      T* dst = dparts.data() + (b * p + j) * c * t * hp * w;
      for (int64_t pl = 0; pl < c * t; ++pl)
        std::copy(shifted.data() + (pl * h + j * hp) * w,
                  shifted.data() + (pl * h + (j + 1) * hp) * w,
                  dst + pl * hp * w);
    }
  }
  return dparts;
}

// Gradient of split with respect to its input batch.
template <typename T>
tensor<T> split_backward(const tensor<T>& dparts,
                         const part_bundle<T>& bundle) {
  const int p = bundle.p;
  const int64_t n = dparts.dim(0) / p, c = dparts.dim(1), t = dparts.dim(2),
                hp = dparts.dim(3), w = dparts.dim(4);
  const int64_t h = hp * p;

  tensor<T> dx({n, c, t, h, w});
  tensor<T> cat({c, t, h, w});
  for (int64_t b = 0; b < n; ++b) {
    for (int64_t j = 0; j < p; ++j) {
      const T* src = dparts.data() + (b * p + j) * c * t * hp * w;
      for (int64_t pl = 0; pl < c * t; ++pl)
        std::copy(src + pl * hp * w, src + (pl + 1) * hp * w,
                  cat.data() + (pl * h + j * hp) * w);
    }
    detail::copy_shifted_rows(cat.data(), dx.data() + b * c * t * h * w,
                              c * t, h, w,
                              -bundle.shift_rows[static_cast<size_t>(b)]);
  }
  return dx;
}

struct sub_batch {
  int64_t begin = 0, end = 0;  // sample index range within the batch
  int p = 1;
  std::vector<int> shifts;     // per sample in [begin, end)
};

// Partition N samples into len(P) contiguous equal sub-batches, the k-th
// encoded with P[k] parts; the first half of each sub-batch gets a
// half-part-height shift so band boundaries vary across samples.
inline std::vector<sub_batch> assign_part_schedule(int64_t n,
                                                   const std::vector<int>& p_list,
                                                   int64_t height) {
  if (p_list.empty()) throw bad_config_error("part schedule is empty");
  const int64_t k = static_cast<int64_t>(p_list.size());
  if (n % k != 0)
    throw indivisible_batch_error("batch of " + std::to_string(n) +
                                  " not divisible into " + std::to_string(k) +
                                  " sub-batches");
  const int64_t per = n / k;
  std::vector<sub_batch> out;
  for (int64_t i = 0; i < k; ++i) {
    sub_batch sb;
    sb.begin = i * per;
    sb.end = (i + 1) * per;
    sb.p = p_list[static_cast<size_t>(i)];
    if (sb.p < 1 || height % sb.p != 0)
      throw indivisible_height_error("schedule p=" + std::to_string(sb.p) +
                                     " does not divide height " +
                                     std::to_string(height));
    const int64_t part_h = height / sb.p;
    const int shift =
        (sb.p == 1 || part_h < 2) ? 0 : static_cast<int>(part_h / 2);
    sb.shifts.assign(static_cast<size_t>(per), 0);
    for (int64_t j = 0; j < per / 2; ++j)
      sb.shifts[static_cast<size_t>(j)] = shift;
    out.push_back(std::move(sb));
  }
  return out;
}

// Ablation view: keep one uniformly chosen band, zero the rest.
template <typename T>
tensor<T> part_crop_baseline(const tensor<T>& clip, int p, rng_stream& rng) {
  check_split_args(clip, p, 0);
  const int64_t band = rng.uniform_int(p);
  const int64_t h = clip.dim(3), hp = h / p, w = clip.dim(4);
  const int64_t planes = clip.numel() / (h * w);
  tensor<T> out(clip.shape());
  for (int64_t pl = 0; pl < planes; ++pl)
    std::copy(clip.data() + (pl * h + band * hp) * w,
              clip.data() + (pl * h + (band + 1) * hp) * w,
              out.data() + (pl * h + band * hp) * w);
  return out;
}

// Ablation view: zero one uniformly chosen band, keep the rest.
template <typename T>
tensor<T> part_mask_baseline(const tensor<T>& clip, int p, rng_stream& rng) {
  check_split_args(clip, p, 0);
  const int64_t band = rng.uniform_int(p);
  const int64_t h = clip.dim(3), hp = h / p, w = clip.dim(4);
  const int64_t planes = clip.numel() / (h * w);
  tensor<T> out = clip;
  for (int64_t pl = 0; pl < planes; ++pl)
    std::fill(out.data() + (pl * h + band * hp) * w,
              out.data() + (pl * h + (band + 1) * hp) * w, T(0));
  return out;
}

}  // namespace partgait::parts
