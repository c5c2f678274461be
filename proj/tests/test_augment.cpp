#include <cmath>

#include "doctest.h"
#include "partgait/data/augment.hpp"
#include "test_support.hpp"

using namespace partgait;

namespace {

tensorf random_binary_clip(int64_t s, int64_t h, int64_t w, uint64_t seed) {
  rng_stream rng(seed);
  tensorf x({s, h, w});
  for (int64_t i = 0; i < x.numel(); ++i)
    x[i] = rng.bernoulli(0.4) ? 1.0f : 0.0f;
  return x;
}

}  // namespace

TEST_CASE("identity policy is a bit-exact no-op") {
  const tensorf clip = random_binary_clip(4, 64, 44, 1);
  data::augmentation_policy identity;  // all zeros
  rng_stream rng(9);
  const tensorf out = data::augment_clip(clip, identity, rng);
  CHECK(testsupport::bits_equal(out, clip));
}

TEST_CASE("certain flip mirrors every frame; flipping twice restores") {
  const tensorf clip = random_binary_clip(3, 16, 10, 2);
  data::augmentation_policy policy;
  policy.flip_prob = 1.0;

  rng_stream r1(5);
  const tensorf flipped = data::augment_clip(clip, policy, r1);
  for (int64_t s = 0; s < 3; ++s)
    for (int64_t y = 0; y < 16; ++y)
      for (int64_t x = 0; x < 10; ++x)
        CHECK(flipped.at(s, y, x) == clip.at(s, y, 9 - x));

  rng_stream r2(6);
  const tensorf back = data::augment_clip(flipped, policy, r2);
  CHECK(testsupport::bits_equal(back, clip));
}

TEST_CASE("augmentation is deterministic under a fixed stream") {
  const tensorf clip = random_binary_clip(5, 64, 44, 3);
  data::augmentation_policy policy;
  policy.flip_prob = 0.5;
  policy.rotate_max_degrees = 10.0;
  policy.perspective_strength = 0.1;
  policy.erase_prob = 0.5;

  rng_stream r1(42), r2(42);
  const tensorf a = data::augment_clip(clip, policy, r1);
  const tensorf b = data::augment_clip(clip, policy, r2);
  CHECK(testsupport::bits_equal(a, b));

  rng_stream r3(43);
  const tensorf c = data::augment_clip(clip, policy, r3);
  CHECK(!testsupport::bits_equal(a, c));  // different draw, different view
}

TEST_CASE("augmented values stay inside the unit interval") {
  const tensorf clip = random_binary_clip(4, 64, 44, 7);
  data::augmentation_policy policy;
  policy.flip_prob = 0.5;
  policy.rotate_max_degrees = 15.0;
  policy.perspective_strength = 0.2;
  policy.erase_prob = 1.0;
  policy.erase_area_min = 0.05;
  policy.erase_area_max = 0.3;

  for (uint64_t seed = 0; seed < 8; ++seed) {
    rng_stream rng(seed);
    const tensorf out = data::augment_clip(clip, policy, rng);
    REQUIRE(out.same_shape(clip));
    for (int64_t i = 0; i < out.numel(); ++i) {
      CHECK(out[i] >= 0.0f);
      CHECK(out[i] <= 1.0f);
    }
  }
}

TEST_CASE("every frame of a clip receives the same transform") {
  // A clip of identical frames stays identical across frames after
  // augmentation (one parameter draw per clip, not per frame).
  tensorf clip({6, 64, 44});
  const tensorf frame = random_binary_clip(1, 64, 44, 11);
  for (int64_t s = 0; s < 6; ++s)
    for (int64_t i = 0; i < 64 * 44; ++i) clip[s * 64 * 44 + i] = frame[i];

  data::augmentation_policy policy;
  policy.flip_prob = 0.5;
  policy.rotate_max_degrees = 12.0;
  policy.perspective_strength = 0.15;
  policy.erase_prob = 1.0;

  rng_stream rng(13);
  const tensorf out = data::augment_clip(clip, policy, rng);
  for (int64_t s = 1; s < 6; ++s)
    for (int64_t i = 0; i < 64 * 44; ++i)
      CHECK(out[s * 64 * 44 + i] == out[i]);
}
