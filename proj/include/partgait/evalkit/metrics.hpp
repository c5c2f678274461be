#pragma once

#include <map>
#include <string>
#include <vector>

#include "partgait/tensor.hpp"

namespace partgait::evalkit {

struct embedding_set {
  tensorf embeddings;  // (M, parts, C)
  std::vector<std::string> sequence_ids;
  std::vector<std::string> subject_labels;
  std::vector<std::string> condition_tags;  // empty, or one per row
};

// d = 1 - mean over parts of per-part cosine similarity, in [0,2].
tensord pairwise_distance(const tensorf& probe, const tensorf& gallery);

// Gallery rows sharing the probe's sequence id are excluded when both id
// vectors are supplied (self-match filter). Every probe must keep at
// least one correct match, else no_valid_match_error.
std::vector<double> cmc_rank_k(
    const tensord& dist, const std::vector<std::string>& probe_labels,
    const std::vector<std::string>& gallery_labels,
    const std::vector<int>& k_list,
    const std::vector<std::string>* probe_seq_ids = nullptr,
    const std::vector<std::string>* gallery_seq_ids = nullptr);

double mean_ap(const tensord& dist,
               const std::vector<std::string>& probe_labels,
               const std::vector<std::string>& gallery_labels,
               const std::vector<std::string>* probe_seq_ids = nullptr,
               const std::vector<std::string>* gallery_seq_ids = nullptr);

double mean_inp(const tensord& dist,
                const std::vector<std::string>& probe_labels,
                const std::vector<std::string>& gallery_labels,
                const std::vector<std::string>* probe_seq_ids = nullptr,
                const std::vector<std::string>* gallery_seq_ids = nullptr);

struct classification_report {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  double mean_attr_accuracy = 0;  // mean over attributes of (TPR+TNR)/2
};

// Binary matrices (M samples x A attributes); A=1 gives the plain binary
// metrics, A>1 the instance-based multi-label variants.
classification_report classification_metrics(
    const std::vector<std::vector<int>>& predictions,
    const std::vector<std::vector<int>>& truths);

struct diversity_result {
  tensord matrix;  // (parts, parts) mean pairwise cosine
  double diversity = 0;
};

// Mean over samples of the pairwise part-cosine matrix; the scalar is
// 1 - mean off-diagonal entry.
diversity_result part_diversity(const tensorf& features);  // (N, parts, C)

}  // namespace partgait::evalkit
