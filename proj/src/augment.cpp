#include "partgait/data/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "partgait/errors.hpp"

namespace partgait::data {
namespace {

constexpr double kPi = 3.14159265358979323846;

float sample_bilinear(const tensorf& clip, int64_t s, double y, double x) {
  const int64_t h = clip.dim(1), w = clip.dim(2);
  const auto y0 = static_cast<int64_t>(std::floor(y));
  const auto x0 = static_cast<int64_t>(std::floor(x));
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int64_t yy = y0 + dy;
      const int64_t xx = x0 + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
      const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
      acc += wgt * clip.at(s, yy, xx);
    }
  }
  return static_cast<float>(acc);
}

void warp_affine_rotation(tensorf& clip, double angle_deg) {
  const int64_t S = clip.dim(0), H = clip.dim(1), W = clip.dim(2);
  const double rad = angle_deg * kPi / 180.0;
  const double c = std::cos(rad), sn = std::sin(rad);
  const double cy = (static_cast<double>(H) - 1.0) / 2.0;
  const double cx = (static_cast<double>(W) - 1.0) / 2.0;
  tensorf out({S, H, W});
  for (int64_t s = 0; s < S; ++s) {
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t x = 0; x < W; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        // Inverse map: rotate the output grid back into the source frame.
        const double sy = cy + (c * dy - sn * dx);
        const double sx = cx + (sn * dy + c * dx);
        out.at(s, y, x) = sample_bilinear(clip, s, sy, sx);
      }
    }
  }
  clip = std::move(out);
}

void warp_perspective(tensorf& clip, const double* corner_off) {
  const int64_t S = clip.dim(0), H = clip.dim(1), W = clip.dim(2);
  const double w1 = static_cast<double>(W) - 1.0;
  const double h1 = static_cast<double>(H) - 1.0;
  // Destination corners map to source corners displaced by corner_off
  // (dx0,dy0, dx1,dy1, dx2,dy2, dx3,dy3) in order TL, TR, BL, BR.
  const double dst[4][2] = {{0, 0}, {w1, 0}, {0, h1}, {w1, h1}};
  double src[4][2];
  for (int i = 0; i < 4; ++i) {
    src[i][0] = dst[i][0] + corner_off[2 * i];
    src[i][1] = dst[i][1] + corner_off[2 * i + 1];
  }
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double u = dst[i][0], v = dst[i][1];
    const double x = src[i][0], y = src[i][1];
    a(2 * i, 0) = u; a(2 * i, 1) = v; a(2 * i, 2) = 1;
    a(2 * i, 6) = -x * u; a(2 * i, 7) = -x * v;
    b(2 * i) = x;
    a(2 * i + 1, 3) = u; a(2 * i + 1, 4) = v; a(2 * i + 1, 5) = 1;
    a(2 * i + 1, 6) = -y * u; a(2 * i + 1, 7) = -y * v;
    b(2 * i + 1) = y;
  }
  const Eigen::Matrix<double, 8, 1> hv = a.colPivHouseholderQr().solve(b);
  tensorf out({S, H, W});
  for (int64_t s = 0; s < S; ++s) {
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t x = 0; x < W; ++x) {
        const double u = static_cast<double>(x), v = static_cast<double>(y);
        const double denom = hv(6) * u + hv(7) * v + 1.0;
        const double sx = (hv(0) * u + hv(1) * v + hv(2)) / denom;
        const double sy = (hv(3) * u + hv(4) * v + hv(5)) / denom;
        out.at(s, y, x) = sample_bilinear(clip, s, sy, sx);
      }
    }
  }
  clip = std::move(out);
}

}  // namespace

tensorf augment_clip(const tensorf& clip, const augmentation_policy& policy,
                     rng_stream& rng) {
  if (clip.ndim() != 3)
    throw shape_mismatch_error("augment_clip expects (S,H,W), got " +
                               clip.describe());
  const int64_t S = clip.dim(0), H = clip.dim(1), W = clip.dim(2);

  // All parameters are drawn up front in a fixed order so the RNG stream
  // advances identically whichever transforms end up firing.
  const bool do_flip = rng.bernoulli(policy.flip_prob);
  const double angle = (2.0 * rng.uniform() - 1.0) * policy.rotate_max_degrees;
  double corner_off[8];
  for (int i = 0; i < 4; ++i) {
    corner_off[2 * i] = (2.0 * rng.uniform() - 1.0) *
                        policy.perspective_strength * 0.1 *
                        static_cast<double>(W);
    corner_off[2 * i + 1] = (2.0 * rng.uniform() - 1.0) *
                            policy.perspective_strength * 0.1 *
                            static_cast<double>(H);
  }
  const bool do_erase = rng.bernoulli(policy.erase_prob);
  const double area_frac =
      rng.uniform(policy.erase_area_min, policy.erase_area_max);
  const double aspect = rng.uniform(0.3, 1.0 / 0.3);

  tensorf out = clip;
  if (do_flip) {
    for (int64_t s = 0; s < S; ++s)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x)
          out.at(s, y, x) = clip.at(s, y, W - 1 - x);
  }
  if (angle != 0.0) warp_affine_rotation(out, angle);
  if (policy.perspective_strength > 0.0) warp_perspective(out, corner_off);
  if (do_erase) {
    const double area = area_frac * static_cast<double>(H * W);
    auto eh = static_cast<int64_t>(std::lround(std::sqrt(area * aspect)));
    auto ew = static_cast<int64_t>(std::lround(std::sqrt(area / aspect)));
    eh = std::clamp<int64_t>(eh, 1, H);
    ew = std::clamp<int64_t>(ew, 1, W);
    const int64_t ey = rng.uniform_int(H - eh + 1);
    const int64_t ex = rng.uniform_int(W - ew + 1);
    for (int64_t s = 0; s < S; ++s)
      for (int64_t y = ey; y < ey + eh; ++y)
        for (int64_t x = ex; x < ex + ew; ++x) out.at(s, y, x) = 0.0f;
  }
  float* v = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) v[i] = std::clamp(v[i], 0.0f, 1.0f);
  return out;
}

}  // namespace partgait::data
