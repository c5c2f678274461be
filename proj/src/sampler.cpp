#include "partgait/data/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "partgait/data/silhouette.hpp"
#include "partgait/errors.hpp"

namespace partgait::data {

std::vector<double> dataset_weights(const std::vector<dataset_manifest>& manifests,
                                    double temperature_divisor) {
  if (manifests.empty()) throw empty_manifest_error("dataset_weights: no manifests");
  std::vector<double> logits(manifests.size());
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const auto& m = manifests[i];
    const double effective =
        static_cast<double>(m.num_sequences) / m.downweight_factor;
    logits[i] = std::log(effective) / temperature_divisor;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  std::vector<double> weights(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    weights[i] = std::exp(logits[i] - top);
    denom += weights[i];
  }
  for (double& w : weights) w /= denom;
  return weights;
}

corpus_pool load_pool(const std::vector<dataset_manifest>& manifests) {
  corpus_pool pool;
  pool.manifests = manifests;
  pool.corpora.reserve(manifests.size());
  for (const auto& m : manifests) pool.corpora.push_back(scan_corpus(m.root_path));
  return pool;
}

std::size_t sample_categorical(const std::vector<double>& weights,
                               rng_stream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

namespace {

void copy_clip(tensorf& dst, int64_t n, const tensorf& clip) {
  const int64_t len = clip.numel();
  std::copy_n(clip.data(), static_cast<std::size_t>(len),
              dst.data() + n * len);
}

}  // namespace

clip_pair_batch build_pretrain_batch(const corpus_pool& pool,
                                     const std::vector<double>& weights,
                                     std::size_t batch_size, std::size_t clip_len,
                                     const augmentation_policy& policy,
                                     rng_stream& rng) {
  if (pool.corpora.empty())
    throw empty_manifest_error("build_pretrain_batch: empty pool");
  if (weights.size() != pool.corpora.size())
    throw bad_config_error("build_pretrain_batch: weights/manifests length mismatch");
  const auto n64 = static_cast<int64_t>(batch_size);
  const auto s64 = static_cast<int64_t>(clip_len);
  clip_pair_batch batch;
  batch.teacher_view = tensorf({n64, 1, s64, kFrameHeight, kFrameWidth});
  batch.student_view = tensorf({n64, 1, s64, kFrameHeight, kFrameWidth});
  batch.dataset_names.resize(batch_size);
  batch.sequence_ids.resize(batch_size);
  for (std::size_t n = 0; n < batch_size; ++n) {
    const std::size_t d = sample_categorical(weights, rng);
    const auto& corpus = pool.corpora[d];
    if (corpus.sequences.empty())
      throw bad_config_error("build_pretrain_batch: dataset '" +
                             pool.manifests[d].name + "' has no sequences");
    const auto& seq = corpus.sequences[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int64_t>(corpus.sequences.size())))];
    const auto pair = sample_clip_pair(seq.num_frames, s64, rng);
    const tensorf teacher_raw = load_frames(seq, pair.frames_a);
    const tensorf student_raw = load_frames(seq, pair.frames_b);
    copy_clip(batch.teacher_view, static_cast<int64_t>(n),
              augment_clip(teacher_raw, policy, rng));
    copy_clip(batch.student_view, static_cast<int64_t>(n),
              augment_clip(student_raw, policy, rng));
    batch.dataset_names[n] = pool.manifests[d].name;
    batch.sequence_ids[n] = seq.sequence_id;
  }
  return batch;
}

}  // namespace partgait::data
