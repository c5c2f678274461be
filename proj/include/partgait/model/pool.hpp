#pragma once

#include <vector>

#include "partgait/errors.hpp"
#include "partgait/tensor.hpp"

namespace partgait::model {

inline constexpr int kNumParts = 16;

// Spatiotemporal aggregation: max over the time axis, then 16 horizontal
// strips, each reduced by (max + mean) over its rows × width. Strip s
// covers feature rows [floor(s*H/16), ceil((s+1)*H/16)), which equals
// exact H/16-row bands whenever 16 | H and stays well-defined for the
// short feature maps that show up in small test models.
template <typename T>
struct gait_pool {
  struct state {
    std::vector<int64_t> t_arg;   // temporal argmax per (n,c,h,w)
    std::vector<int64_t> hw_arg;  // strip argmax per (n,strip,c)
    std::vector<int64_t> dims;    // n,c,s,h,w
  };

  static void strip_bounds(int64_t h, int strip, int64_t& lo, int64_t& hi) {
    lo = strip * h / kNumParts;
    hi = ((strip + 1) * h + kNumParts - 1) / kNumParts;
    if (hi <= lo) hi = lo + 1;
  }

  static tensor<T> forward(const tensor<T>& v, state* st) {
    if (v.ndim() != 5)
      throw shape_mismatch_error("pool: expected (N,C,S,H,W), got " +
                                 v.describe());
    const int64_t n = v.dim(0), c = v.dim(1), s = v.dim(2), h = v.dim(3),
                  w = v.dim(4);

    tensor<T> tm({n, c, h, w});
    std::vector<int64_t> t_arg(static_cast<size_t>(n * c * h * w), 0);
    for (int64_t i = 0; i < n * c; ++i) {
      const T* src = v.data() + i * s * h * w;
      T* dst = tm.data() + i * h * w;
      std::copy(src, src + h * w, dst);
      for (int64_t t = 1; t < s; ++t)
        for (int64_t x = 0; x < h * w; ++x)
          if (src[t * h * w + x] > dst[x]) {
            dst[x] = src[t * h * w + x];
            t_arg[static_cast<size_t>(i * h * w + x)] = t;
          }
    }

    tensor<T> out({n, kNumParts, c});
    std::vector<int64_t> hw_arg(static_cast<size_t>(n * kNumParts * c), 0);
    for (int64_t i = 0; i < n; ++i)
      for (int strip = 0; strip < kNumParts; ++strip) {
        int64_t lo, hi;
        strip_bounds(h, strip, lo, hi);
        for (int64_t ch = 0; ch < c; ++ch) {
          const T* plane = tm.data() + (i * c + ch) * h * w;
          T best = plane[lo * w];
          int64_t best_at = lo * w;
          T sum = 0;
          for (int64_t r = lo; r < hi; ++r)
            for (int64_t x = 0; x < w; ++x) {
              const T val = plane[r * w + x];
              sum += val;
              if (val > best) {
                best = val;
                best_at = r * w + x;
              }
            }
          out.at(i, strip, ch) = best + sum / static_cast<T>((hi - lo) * w);
          hw_arg[static_cast<size_t>((i * kNumParts + strip) * c + ch)] =
              best_at;
        }
      }

    if (st != nullptr) {
      st->t_arg = std::move(t_arg);
      st->hw_arg = std::move(hw_arg);
      st->dims = {n, c, s, h, w};
    }
    return out;
  }

  static tensor<T> backward(const tensor<T>& dy, const state& st) {
    const int64_t n = st.dims[0], c = st.dims[1], s = st.dims[2],
                  h = st.dims[3], w = st.dims[4];
    tensor<T> dtm({n, c, h, w});
    for (int64_t i = 0; i < n; ++i)
      for (int strip = 0; strip < kNumParts; ++strip) {
        int64_t lo, hi;
        strip_bounds(h, strip, lo, hi);
        for (int64_t ch = 0; ch < c; ++ch) {
          const T g = dy.at(i, strip, ch);
          T* plane = dtm.data() + (i * c + ch) * h * w;
          plane[st.hw_arg[static_cast<size_t>((i * kNumParts + strip) * c +
                                              ch)]] += g;
          const T share = g / static_cast<T>((hi - lo) * w);
          for (int64_t r = lo; r < hi; ++r)
            for (int64_t x = 0; x < w; ++x) plane[r * w + x] += share;
        }
      }

    tensor<T> dv({n, c, s, h, w});
    for (int64_t i = 0; i < n * c; ++i)
      for (int64_t x = 0; x < h * w; ++x)
        dv[(i * s + st.t_arg[static_cast<size_t>(i * h * w + x)]) * h * w +
           x] = dtm[i * h * w + x];
    return dv;
  }
};

}  // namespace partgait::model
