#pragma once

#include <string>
#include <vector>

#include "partgait/data/corpus.hpp"
#include "partgait/tensor.hpp"

namespace partgait::data {

// Threshold predicate on one entry of the per-subject shape vector.
struct attribute_rule {
  std::string attribute;
  int param_index = 0;
  std::string op = "gt";  // "gt" | "lt" | "abs_gt"
  double threshold = 0.0;
};

// Shape vector layout (indices usable by attribute_rule::param_index):
//   0 stature  1 torso_width  2 torso_length  3 leg_length  4 arm_length
//   5 head_radius  6 leg_swing_amp  7 arm_swing_amp  8 torso_tilt  9 limb_width
// Entries past shape_param_dim keep their mid-range defaults, so a low
// dim freezes the remaining geometry across subjects.
inline constexpr int kShapeParamCount = 10;

struct synthetic_corpus_spec {
  std::string name = "synthetic";
  int num_subjects = 0;
  int sequences_per_subject = 0;
  int frames_per_sequence = 0;
  int shape_param_dim = kShapeParamCount;
  int gait_period_min = 8, gait_period_max = 24;  // frames per stride
  std::vector<attribute_rule> attribute_rules;
  uint64_t rng_seed = 0;
};

// Spec with the default "lean" attribute (bimodal torso tilt magnitude,
// so the two classes are separated by a visual margin).
synthetic_corpus_spec default_walker_spec(int subjects, int sequences,
                                          int frames, uint64_t seed);

// Renders one walker frame into a raw binary grid (pre-normalization).
tensorf render_walker_frame(const std::vector<double>& shape, double phase);

// Writes root/<subject>/<sequence>/frame_%04d.png (normalized 64x44),
// root/labels.tsv, root/sequences.tsv (per-sequence period and phase for
// phase-aligned comparisons), and root/manifest.tsv. Returns the manifest.
dataset_manifest generate_synthetic_corpus(const synthetic_corpus_spec& spec,
                                           const std::string& out_dir);

}  // namespace partgait::data
