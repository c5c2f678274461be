#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "partgait/partops.hpp"
#include "partgait/rng.hpp"

using namespace partgait;

namespace {

tensorf random_clip(int64_t n, int64_t c, int64_t s, int64_t h, int64_t w,
                    uint64_t seed) {
  rng_stream rng(seed);
  tensorf x({n, c, s, h, w});
  for (int64_t i = 0; i < x.numel(); ++i)
    x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return x;
}

// Circular shift downward along the height axis (dim 3).
tensorf circshift_h(const tensorf& x, int shift) {
  const int64_t h = x.dim(3), w = x.dim(4);
  const int64_t planes = x.numel() / (h * w);
  tensorf y(x.shape());
  for (int64_t pl = 0; pl < planes; ++pl)
    for (int64_t r = 0; r < h; ++r) {
      const int64_t src = ((r - shift) % h + h) % h;
      std::copy(x.data() + (pl * h + src) * w, x.data() + (pl * h + src + 1) * w,
                y.data() + (pl * h + r) * w);
    }
  return y;
}

bool bit_equal(const tensorf& a, const tensorf& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(),
                     sizeof(float) * static_cast<size_t>(a.numel())) == 0;
}

}  // namespace

TEST_CASE("split then reassemble is the identity at input resolution") {
  const tensorf x = random_clip(2, 3, 2, 64, 5, 77);
  for (int p : {1, 2, 4, 8}) {
    const int half = static_cast<int>(64 / p / 2);
    for (int shift : {0, half}) {
      if (p == 1 && shift != 0) continue;
      auto bundle = parts::split(x, p, shift);
      CHECK(bundle.parts.dim(0) == 2 * p);
      CHECK(bundle.parts.dim(3) == 64 / p);
      const tensorf back = parts::reassemble(bundle);
      CHECK(bit_equal(back, x));
    }
  }
}

TEST_CASE("split cuts the shifted rows into contiguous bands") {
  // Height 8, rows hold their own index; shift 2, two bands.
  tensorf x({1, 1, 1, 8, 1});
  for (int64_t r = 0; r < 8; ++r) x[r] = static_cast<float>(r);
  const auto bundle = parts::split(x, 2, 2);
  const std::vector<float> band0 = {6, 7, 0, 1};
  const std::vector<float> band1 = {2, 3, 4, 5};
  for (int64_t r = 0; r < 4; ++r) {
    CHECK(bundle.parts[r] == band0[static_cast<size_t>(r)]);
    CHECK(bundle.parts[4 + r] == band1[static_cast<size_t>(r)]);
  }
}

TEST_CASE("unshifted split at height 64 lands on quarter boundaries") {
  tensorf x({1, 1, 1, 64, 1});
  for (int64_t r = 0; r < 64; ++r) x[r] = static_cast<float>(r);
  const auto bundle = parts::split(x, 4, 0);
  for (int64_t j = 0; j < 4; ++j)
    for (int64_t r = 0; r < 16; ++r)
      CHECK(bundle.parts[j * 16 + r] == static_cast<float>(j * 16 + r));
}

TEST_CASE("reassemble rescales the inverse shift to feature resolution") {
  // Row-indicator input, height 64, p=4, shift 4. A stride-4 row
  // subsample stands in for the encoder; the inverse feature shift is
  // round(4 * 16 / 64) = 1, so the shifted pipeline must land exactly on
  // the unshifted one.
  tensorf x({1, 1, 1, 64, 1});
  for (int64_t r = 0; r < 64; ++r) x[r] = static_cast<float>(r);

  auto downsample4 = [](const parts::part_bundle<float>& b) {
    parts::part_bundle<float> out = b;
    const int64_t np = b.parts.dim(0), hp = b.parts.dim(3);
    out.parts = tensorf({np, 1, 1, hp / 4, 1});
    for (int64_t i = 0; i < np; ++i)
      for (int64_t r = 0; r < hp / 4; ++r)
        out.parts[i * (hp / 4) + r] = b.parts[i * hp + 4 * r];
    return out;
  };

  const tensorf shifted = parts::reassemble(downsample4(parts::split(x, 4, 4)));
  const tensorf plain = parts::reassemble(downsample4(parts::split(x, 4, 0)));
  REQUIRE(shifted.dim(3) == 16);
  for (int64_t r = 0; r < 16; ++r) {
    CHECK(shifted[r] == static_cast<float>(4 * r));
    CHECK(plain[r] == static_cast<float>(4 * r));
  }
}

TEST_CASE("split argument validation") {
  const tensorf x = random_clip(1, 1, 1, 64, 3, 5);
  CHECK_THROWS_AS(parts::split(x, 3, 0), indivisible_height_error);
  CHECK_THROWS_AS(parts::split(x, 4, 16), bad_shift_error);
  CHECK_THROWS_AS(parts::split(x, 4, -1), bad_shift_error);
  CHECK_THROWS_AS(parts::split(x, 4, std::vector<int>{0, 0}),
                  shape_mismatch_error);
  tensorf flat({4, 64, 3});
  CHECK_THROWS_AS(parts::check_split_args(flat, 4, 0), shape_mismatch_error);
}

TEST_CASE("part schedule covers the batch in contiguous equal sub-batches") {
  const auto sched = parts::assign_part_schedule(8, {1, 2, 4, 8}, 64);
  REQUIRE(sched.size() == 4);
  int64_t cursor = 0;
  const std::vector<int> expect_p = {1, 2, 4, 8};
  const std::vector<int> expect_shift = {0, 16, 8, 4};
  for (size_t i = 0; i < sched.size(); ++i) {
    CHECK(sched[i].begin == cursor);
    CHECK(sched[i].end == cursor + 2);
    CHECK(sched[i].p == expect_p[i]);
    REQUIRE(sched[i].shifts.size() == 2);
    CHECK(sched[i].shifts[0] == expect_shift[i]);
    CHECK(sched[i].shifts[1] == 0);
    cursor = sched[i].end;
  }
  CHECK(cursor == 8);
}

TEST_CASE("part schedule corner cases") {
  const auto single = parts::assign_part_schedule(4, {1}, 64);
  REQUIRE(single.size() == 1);
  CHECK(single[0].p == 1);
  CHECK(single[0].shifts == std::vector<int>({0, 0, 0, 0}));

  // Bands one row tall cannot be half-shifted.
  const auto thin = parts::assign_part_schedule(2, {8}, 8);
  CHECK(thin[0].shifts == std::vector<int>({0, 0}));

  CHECK_THROWS_AS(parts::assign_part_schedule(6, {1, 2, 4, 8}, 64),
                  indivisible_batch_error);
  CHECK_THROWS_AS(parts::assign_part_schedule(4, {}, 64), bad_config_error);
  CHECK_THROWS_AS(parts::assign_part_schedule(4, {1, 3}, 64),
                  indivisible_height_error);
}

TEST_CASE("schedule partition property over many shapes") {
  rng_stream rng(11);
  const std::vector<std::vector<int>> lists = {{1}, {1, 2}, {1, 2, 4},
                                               {1, 2, 4, 8}, {2, 8}};
  for (const auto& pl : lists) {
    const int64_t k = static_cast<int64_t>(pl.size());
    for (int64_t mult : {1, 2, 5}) {
      const int64_t n = k * mult;
      const auto sched = parts::assign_part_schedule(n, pl, 64);
      std::vector<bool> seen(static_cast<size_t>(n), false);
      for (const auto& sb : sched) {
        CHECK(sb.end - sb.begin == mult);
        CHECK(static_cast<int64_t>(sb.shifts.size()) == mult);
        for (int64_t i = sb.begin; i < sb.end; ++i) {
          CHECK(!seen[static_cast<size_t>(i)]);
          seen[static_cast<size_t>(i)] = true;
        }
        for (int s : sb.shifts) {
          CHECK(s >= 0);
          CHECK(s < 64 / sb.p);
        }
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }
  }
}

TEST_CASE("crop and mask baselines zero complementary bands") {
  tensorf ones = tensorf::full({1, 1, 1, 64, 44}, 1.0f);

  rng_stream rng_a(123);
  const tensorf cropped = parts::part_crop_baseline(ones, 4, rng_a);
  int64_t nonzero = 0;
  for (int64_t i = 0; i < cropped.numel(); ++i) nonzero += cropped[i] != 0.0f;
  CHECK(nonzero == 16 * 44);

  rng_stream rng_b(123);
  const tensorf masked = parts::part_mask_baseline(ones, 4, rng_b);
  nonzero = 0;
  for (int64_t i = 0; i < masked.numel(); ++i) nonzero += masked[i] != 0.0f;
  CHECK(nonzero == 48 * 44);

  // Same seed selects the same band, so the two views tile the input.
  const tensorf x = random_clip(2, 1, 3, 64, 44, 99);
  rng_stream rc(7), rm(7);
  const tensorf c = parts::part_crop_baseline(x, 4, rc);
  const tensorf m = parts::part_mask_baseline(x, 4, rm);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(c[i] + m[i] == x[i]);
}

TEST_CASE("single-band crop is the identity and single-band mask erases") {
  const tensorf x = random_clip(1, 2, 2, 64, 7, 3);
  rng_stream r1(0), r2(0);
  CHECK(bit_equal(parts::part_crop_baseline(x, 1, r1), x));
  const tensorf masked = parts::part_mask_baseline(x, 1, r2);
  for (int64_t i = 0; i < masked.numel(); ++i) CHECK(masked[i] == 0.0f);
}

TEST_CASE("band pipeline commutes with whole-part circular shifts") {
  // With a per-band pointwise encoder, shifting the input by a whole
  // number of bands shifts the output by the same amount: band cuts move
  // with the content.
  const tensorf x = random_clip(1, 2, 2, 64, 5, 31);
  const int p = 4;
  auto encode = [](parts::part_bundle<float> b) {
    for (int64_t i = 0; i < b.parts.numel(); ++i)
      b.parts[i] = 2.0f * b.parts[i] + 0.5f;
    return b;
  };
  auto pipeline = [&](const tensorf& in) {
    return parts::reassemble(encode(parts::split(in, p, 0)));
  };
  const tensorf base = pipeline(x);
  for (int k : {1, 3}) {
    const tensorf moved = pipeline(circshift_h(x, k * 16));
    CHECK(bit_equal(moved, circshift_h(base, k * 16)));
  }
}

TEST_CASE("split and reassemble backward are exact adjoints") {
  // <A x, y> == <x, A^T y> for the linear maps split and reassemble.
  const tensorf x = random_clip(2, 1, 2, 16, 3, 41);
  const auto bundle = parts::split(x, 4, std::vector<int>{1, 3});

  tensorf y(bundle.parts.shape());
  rng_stream rng(42);
  for (int64_t i = 0; i < y.numel(); ++i)
    y[i] = static_cast<float>(rng.uniform(-1.0, 1.0));

  const tensorf xt = parts::split_backward(y, bundle);
  double lhs = 0, rhs = 0;
  for (int64_t i = 0; i < bundle.parts.numel(); ++i)
    lhs += static_cast<double>(bundle.parts[i]) * y[i];
  for (int64_t i = 0; i < x.numel(); ++i)
    rhs += static_cast<double>(x[i]) * xt[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));

  const tensorf z = parts::reassemble(bundle);
  tensorf dz(z.shape());
  for (int64_t i = 0; i < dz.numel(); ++i)
    dz[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  const tensorf dparts = parts::reassemble_backward(dz, bundle);
  lhs = rhs = 0;
  for (int64_t i = 0; i < z.numel(); ++i)
    lhs += static_cast<double>(z[i]) * dz[i];
  for (int64_t i = 0; i < dparts.numel(); ++i)
    rhs += static_cast<double>(bundle.parts[i]) * dparts[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}
