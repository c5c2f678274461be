#include "partgait/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "partgait/data/png_io.hpp"
#include "partgait/data/silhouette.hpp"
#include "partgait/errors.hpp"
#include "partgait/rng.hpp"

namespace fs = std::filesystem;

namespace partgait::data {
namespace {

constexpr double kTau = 6.28318530717958647692;
constexpr int kRawH = 128, kRawW = 96;
constexpr double kUnit = 110.0;  // pixels per unit stature

struct vec2 {
  double x = 0, y = 0;
};

double dist_to_segment(vec2 p, vec2 a, vec2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double px = a.x + t * dx - p.x, py = a.y + t * dy - p.y;
  return std::sqrt(px * px + py * py);
}

struct capsule {
  vec2 a, b;
  double r = 0;
};

struct ellipse {
  vec2 center;
  double semi_major = 0, semi_minor = 0;  // along/across the tilted axis
  double tilt = 0;                        // radians from vertical
};

const double kDefaultShape[kShapeParamCount] = {
    1.0,    // stature
    0.20,   // torso width
    0.34,   // torso length
    0.48,   // leg length
    0.34,   // arm length
    0.065,  // head radius
    0.45,   // leg swing amplitude (rad)
    0.35,   // arm swing amplitude (rad)
    0.0,    // torso tilt (rad)
    0.037,  // limb half-width-ish
};

std::vector<double> draw_shape(int dim, rng_stream& rng) {
  std::vector<double> s(kShapeParamCount);
  std::copy(std::begin(kDefaultShape), std::end(kDefaultShape), s.begin());
  const double lo[kShapeParamCount] = {0.85, 0.16, 0.30, 0.44, 0.30,
                                       0.055, 0.35, 0.25, 0.0, 0.030};
  const double hi[kShapeParamCount] = {1.15, 0.24, 0.38, 0.52, 0.38,
                                       0.075, 0.55, 0.45, 0.0, 0.045};
  const int n = std::min(dim, kShapeParamCount);
  for (int i = 0; i < n; ++i) {
    if (i == 8) {
      // Torso tilt: bimodal magnitude with a gap, random sign, so any
      // threshold inside the gap yields a cleanly separable attribute.
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double mag = rng.bernoulli(0.5) ? rng.uniform(0.00, 0.06)
                                            : rng.uniform(0.14, 0.22);
      s[8] = sign * mag;
    } else {
      s[i] = rng.uniform(lo[i], hi[i]);
    }
  }
  return s;
}

bool rule_applies(const attribute_rule& rule, const std::vector<double>& shape) {
  if (rule.param_index < 0 || rule.param_index >= kShapeParamCount)
    throw bad_config_error("attribute_rule: param_index out of range");
  const double v = shape[static_cast<std::size_t>(rule.param_index)];
  if (rule.op == "gt") return v > rule.threshold;
  if (rule.op == "lt") return v < rule.threshold;
  if (rule.op == "abs_gt") return std::abs(v) > rule.threshold;
  throw bad_config_error("attribute_rule: unknown op '" + rule.op + "'");
}

}  // namespace

synthetic_corpus_spec default_walker_spec(int subjects, int sequences,
                                          int frames, uint64_t seed) {
  synthetic_corpus_spec spec;
  spec.num_subjects = subjects;
  spec.sequences_per_subject = sequences;
  spec.frames_per_sequence = frames;
  spec.rng_seed = seed;
  spec.attribute_rules.push_back({"lean", 8, "abs_gt", 0.10});
  return spec;
}

tensorf render_walker_frame(const std::vector<double>& shape, double phase) {
  const double stature = shape[0] * kUnit;
  const double torso_w = shape[1] * stature;
  const double torso_len = shape[2] * stature;
  const double leg_len = shape[3] * stature;
  const double arm_len = shape[4] * stature;
  const double head_r = shape[5] * stature;
  const double leg_amp = shape[6];
  const double arm_amp = shape[7];
  const double tilt = shape[8];
  const double limb_r = shape[9] * stature;

  const vec2 hip{kRawW / 2.0, 120.0 - leg_len};
  const double ct = std::cos(tilt), st = std::sin(tilt);
  // Torso axis points upward from the hip, rotated by the tilt.
  const auto along = [&](double d) {
    return vec2{hip.x + st * d, hip.y - ct * d};
  };
  const vec2 shoulder = along(torso_len);
  const vec2 torso_c = along(torso_len / 2.0);
  const vec2 head_c = along(torso_len + head_r * 1.05);

  const ellipse torso{torso_c, torso_len / 2.0 + limb_r, torso_w / 2.0, tilt};

  capsule limbs[5];
  const double swing = std::sin(kTau * phase);
  for (int side = 0; side < 2; ++side) {
    const double lth = leg_amp * swing * (side == 0 ? 1.0 : -1.0);
    limbs[side] = {hip,
                   {hip.x + leg_len * std::sin(lth), hip.y + leg_len * std::cos(lth)},
                   limb_r};
    const double ath = arm_amp * swing * (side == 0 ? -1.0 : 1.0);
    limbs[2 + side] = {shoulder,
                       {shoulder.x + arm_len * std::sin(ath),
                        shoulder.y + arm_len * std::cos(ath)},
                       limb_r * 0.8};
  }
  limbs[4] = {head_c, head_c, head_r};

  tensorf raw({kRawH, kRawW});
  for (int y = 0; y < kRawH; ++y) {
    for (int x = 0; x < kRawW; ++x) {
      const vec2 p{static_cast<double>(x), static_cast<double>(y)};
      bool on = false;
      const double rx = ct * (p.x - torso.center.x) - st * (p.y - torso.center.y);
      const double ry = st * (p.x - torso.center.x) + ct * (p.y - torso.center.y);
      const double ex = rx / torso.semi_minor, ey = ry / torso.semi_major;
      if (ex * ex + ey * ey <= 1.0) on = true;
      for (int i = 0; i < 5 && !on; ++i)
        if (dist_to_segment(p, limbs[i].a, limbs[i].b) <= limbs[i].r) on = true;
      raw.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          on ? 1.0f : 0.0f;
    }
  }
  return raw;
}

dataset_manifest generate_synthetic_corpus(const synthetic_corpus_spec& spec,
                                           const std::string& out_dir) {
  if (spec.num_subjects <= 0 || spec.sequences_per_subject <= 0 ||
      spec.frames_per_sequence <= 0 || spec.shape_param_dim <= 0)
    throw bad_config_error("generate_synthetic_corpus: counts must be positive");
  if (spec.gait_period_min < 4 || spec.gait_period_max < spec.gait_period_min)
    throw bad_config_error("generate_synthetic_corpus: bad gait period range");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create " + out_dir + ": " + ec.message());

  rng_stream rng(spec.rng_seed);
  std::ofstream labels(fs::path(out_dir) / "labels.tsv");
  std::ofstream seq_meta(fs::path(out_dir) / "sequences.tsv");
  if (!labels || !seq_meta) throw io_error("cannot open metadata files in " + out_dir);
  seq_meta << "sequence\tperiod\tphase\n";

  char buf[32];
  for (int subj = 0; subj < spec.num_subjects; ++subj) {
    std::snprintf(buf, sizeof buf, "subject%04d", subj);
    const std::string subject_id = buf;
    const auto shape = draw_shape(spec.shape_param_dim, rng);
    for (const auto& rule : spec.attribute_rules)
      labels << subject_id << '\t' << rule.attribute << '\t'
             << (rule_applies(rule, shape) ? 1 : 0) << '\n';
    for (int s = 0; s < spec.sequences_per_subject; ++s) {
      std::snprintf(buf, sizeof buf, "seq%03d", s);
      const std::string seq_id = buf;
      const auto period = static_cast<double>(
          spec.gait_period_min +
          rng.uniform_int(spec.gait_period_max - spec.gait_period_min + 1));
      const double phase0 = rng.uniform();
      const fs::path seq_dir = fs::path(out_dir) / subject_id / seq_id;
      fs::create_directories(seq_dir, ec);
      if (ec) throw io_error("cannot create " + seq_dir.string());
      seq_meta << subject_id << '/' << seq_id << '\t' << period << '\t'
               << phase0 << '\n';
      for (int f = 0; f < spec.frames_per_sequence; ++f) {
        const double phase = phase0 + static_cast<double>(f) / period;
        const tensorf norm =
            normalize_silhouette(render_walker_frame(shape, phase));
        gray_image img;
        img.height = kFrameHeight;
        img.width = kFrameWidth;
        img.pixels.resize(static_cast<std::size_t>(norm.numel()));
        for (int64_t i = 0; i < norm.numel(); ++i)
          img.pixels[static_cast<std::size_t>(i)] = norm[i] > 0.5f ? 255 : 0;
        std::snprintf(buf, sizeof buf, "frame_%04d.png", f);
        write_png_gray((seq_dir / buf).string(), img);
      }
    }
  }

  dataset_manifest manifest;
  manifest.name = spec.name;
  manifest.root_path = out_dir;
  manifest.num_sequences =
      static_cast<int64_t>(spec.num_subjects) * spec.sequences_per_subject;
  manifest.downweight_factor = 1.0;
  write_manifest_file((fs::path(out_dir) / "manifest.tsv").string(), {manifest});
  return manifest;
}

}  // namespace partgait::data
