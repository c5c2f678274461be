#pragma once

#include <string>
#include <vector>

#include "partgait/data/augment.hpp"
#include "partgait/data/corpus.hpp"
#include "partgait/rng.hpp"
#include "partgait/tensor.hpp"

namespace partgait::data {

// Mixing weights over datasets: effective size = num_sequences / downweight,
// logit = ln(effective) / temperature_divisor, softmax over logits.
std::vector<double> dataset_weights(const std::vector<dataset_manifest>& manifests,
                                    double temperature_divisor = 3.0);

struct corpus_pool {
  std::vector<dataset_manifest> manifests;
  std::vector<corpus_index> corpora;
};

corpus_pool load_pool(const std::vector<dataset_manifest>& manifests);

// One draw from a categorical distribution given by `weights` (assumed to
// sum to ~1); consumes exactly one uniform from the stream.
std::size_t sample_categorical(const std::vector<double>& weights,
                               rng_stream& rng);

struct clip_pair_batch {
  tensorf teacher_view;  // (N,1,S,64,44)
  tensorf student_view;  // (N,1,S,64,44)
  std::vector<std::string> dataset_names;
  std::vector<std::string> sequence_ids;
};

clip_pair_batch build_pretrain_batch(const corpus_pool& pool,
                                     const std::vector<double>& weights,
                                     std::size_t batch_size, std::size_t clip_len,
                                     const augmentation_policy& policy,
                                     rng_stream& rng);

}  // namespace partgait::data
