#include "partgait/evalkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partgait/errors.hpp"

namespace partgait::evalkit {
namespace {

// Unit-normalize part vectors as doubles; (M,P,C) layout preserved.
std::vector<double> normalized_parts(const tensorf& x) {
  const int64_t rows = x.dim(0) * x.dim(1), c = x.dim(2);
  std::vector<double> out(static_cast<std::size_t>(rows * c));
  for (int64_t r = 0; r < rows; ++r) {
    double sq = 0;
    for (int64_t d = 0; d < c; ++d) {
      const double v = x[r * c + d];
      sq += v * v;
    }
    const double nrm = std::sqrt(sq);
    if (!(nrm > 0)) throw zero_vector_error("zero-norm part vector");
    for (int64_t d = 0; d < c; ++d)
      out[static_cast<std::size_t>(r * c + d)] = x[r * c + d] / nrm;
  }
  return out;
}

struct ranked_probe {
  std::vector<int64_t> order;   // gallery indices, ascending distance
  std::vector<char> correct;    // per position in `order`
  int64_t num_correct = 0;
};

ranked_probe rank_gallery(const tensord& dist, int64_t probe,
                          const std::vector<std::string>& probe_labels,
                          const std::vector<std::string>& gallery_labels,
                          const std::vector<std::string>* probe_seq_ids,
                          const std::vector<std::string>* gallery_seq_ids) {
  const int64_t g = dist.dim(1);
  ranked_probe r;
  r.order.reserve(static_cast<std::size_t>(g));
  for (int64_t j = 0; j < g; ++j) {
    if (probe_seq_ids && gallery_seq_ids &&
        (*probe_seq_ids)[static_cast<std::size_t>(probe)] ==
            (*gallery_seq_ids)[static_cast<std::size_t>(j)])
      continue;
    r.order.push_back(j);
  }
  std::stable_sort(r.order.begin(), r.order.end(), [&](int64_t a, int64_t b) {
    return dist.at(probe, a) < dist.at(probe, b);
  });
  r.correct.resize(r.order.size());
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    const bool ok =
        gallery_labels[static_cast<std::size_t>(r.order[i])] ==
        probe_labels[static_cast<std::size_t>(probe)];
    r.correct[i] = ok ? 1 : 0;
    r.num_correct += ok;
  }
  if (r.num_correct == 0)
    throw no_valid_match_error("probe " + std::to_string(probe) +
                               " has no valid gallery match");
  return r;
}

void check_retrieval_args(const tensord& dist,
                          const std::vector<std::string>& probe_labels,
                          const std::vector<std::string>& gallery_labels) {
  if (dist.ndim() != 2)
    throw shape_mismatch_error("distance matrix must be 2-D");
  if (static_cast<int64_t>(probe_labels.size()) != dist.dim(0) ||
      static_cast<int64_t>(gallery_labels.size()) != dist.dim(1))
    throw shape_mismatch_error("label vectors misaligned with distances");
}

}  // namespace

tensord pairwise_distance(const tensorf& probe, const tensorf& gallery) {
  if (probe.ndim() != 3 || gallery.ndim() != 3 ||
      probe.dim(1) != gallery.dim(1) || probe.dim(2) != gallery.dim(2))
    throw shape_mismatch_error("pairwise_distance: " + probe.describe() +
                               " vs " + gallery.describe());
  const int64_t m = probe.dim(0), g = gallery.dim(0), p = probe.dim(1),
                c = probe.dim(2);
  const auto ph = normalized_parts(probe);
  const auto gh = normalized_parts(gallery);
  tensord out({m, g});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < g; ++j) {
      double acc = 0;
      for (int64_t k = 0; k < p; ++k) {
        const double* a = ph.data() + (i * p + k) * c;
        const double* b = gh.data() + (j * p + k) * c;
        double dot = 0;
        for (int64_t d = 0; d < c; ++d) dot += a[d] * b[d];
        acc += dot;
      }
      out.at(i, j) = 1.0 - acc / static_cast<double>(p);
    }
  }
  return out;
}

std::vector<double> cmc_rank_k(
    const tensord& dist, const std::vector<std::string>& probe_labels,
    const std::vector<std::string>& gallery_labels,
    const std::vector<int>& k_list,
    const std::vector<std::string>* probe_seq_ids,
    const std::vector<std::string>* gallery_seq_ids) {
  check_retrieval_args(dist, probe_labels, gallery_labels);
  std::vector<double> hits(k_list.size(), 0.0);
  const int64_t m = dist.dim(0);
  for (int64_t i = 0; i < m; ++i) {
    const auto r = rank_gallery(dist, i, probe_labels, gallery_labels,
                                probe_seq_ids, gallery_seq_ids);
    std::size_t first_correct = r.correct.size();
    for (std::size_t pos = 0; pos < r.correct.size(); ++pos) {
      if (r.correct[pos]) {
        first_correct = pos;
        break;
      }
    }
    for (std::size_t ki = 0; ki < k_list.size(); ++ki)
      if (first_correct < static_cast<std::size_t>(k_list[ki])) hits[ki] += 1.0;
  }
  for (double& h : hits) h /= static_cast<double>(m);
  return hits;
}

double mean_ap(const tensord& dist,
               const std::vector<std::string>& probe_labels,
               const std::vector<std::string>& gallery_labels,
               const std::vector<std::string>* probe_seq_ids,
               const std::vector<std::string>* gallery_seq_ids) {
  check_retrieval_args(dist, probe_labels, gallery_labels);
  const int64_t m = dist.dim(0);
  double total = 0;
  for (int64_t i = 0; i < m; ++i) {
    const auto r = rank_gallery(dist, i, probe_labels, gallery_labels,
                                probe_seq_ids, gallery_seq_ids);
    double ap = 0;
    int64_t seen = 0;
    for (std::size_t pos = 0; pos < r.correct.size(); ++pos) {
      if (!r.correct[pos]) continue;
      ++seen;
      ap += static_cast<double>(seen) / static_cast<double>(pos + 1);
    }
    total += ap / static_cast<double>(r.num_correct);
  }
  return total / static_cast<double>(m);
}

double mean_inp(const tensord& dist,
                const std::vector<std::string>& probe_labels,
                const std::vector<std::string>& gallery_labels,
                const std::vector<std::string>* probe_seq_ids,
                const std::vector<std::string>* gallery_seq_ids) {
  check_retrieval_args(dist, probe_labels, gallery_labels);
  const int64_t m = dist.dim(0);
  double total = 0;
  for (int64_t i = 0; i < m; ++i) {
    const auto r = rank_gallery(dist, i, probe_labels, gallery_labels,
                                probe_seq_ids, gallery_seq_ids);
    std::size_t last_correct = 0;
    for (std::size_t pos = 0; pos < r.correct.size(); ++pos)
      if (r.correct[pos]) last_correct = pos;
    total += static_cast<double>(r.num_correct) /
             static_cast<double>(last_correct + 1);
  }
  return total / static_cast<double>(m);
}

classification_report classification_metrics(
    const std::vector<std::vector<int>>& predictions,
    const std::vector<std::vector<int>>& truths) {
  if (predictions.empty() || predictions.size() != truths.size())
    throw empty_input_error("classification_metrics: empty or misaligned input");
  const std::size_t m = predictions.size();
  const std::size_t a = predictions[0].size();
  for (std::size_t i = 0; i < m; ++i)
    if (predictions[i].size() != a || truths[i].size() != a)
      throw shape_mismatch_error("classification_metrics: ragged rows");
  if (a == 0) throw empty_input_error("classification_metrics: zero attributes");

  classification_report rep;

  if (a == 1) {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const int p = predictions[i][0], t = truths[i][0];
      if (p && t) ++tp;
      else if (p && !t) ++fp;
      else if (!p && t) ++fn;
      else ++tn;
    }
    rep.accuracy = static_cast<double>(tp + tn) / static_cast<double>(m);
    rep.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    rep.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    rep.f1 = rep.precision + rep.recall > 0
                 ? 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
                 : 0.0;
  } else {
    double acc = 0, prec = 0, rec = 0, f1 = 0;
    for (std::size_t i = 0; i < m; ++i) {
      int64_t inter = 0, np = 0, nt = 0;
      for (std::size_t j = 0; j < a; ++j) {
        np += predictions[i][j] ? 1 : 0;
        nt += truths[i][j] ? 1 : 0;
        inter += (predictions[i][j] && truths[i][j]) ? 1 : 0;
      }
      const int64_t uni = np + nt - inter;
      acc += uni ? static_cast<double>(inter) / uni : 1.0;
      prec += np ? static_cast<double>(inter) / np : (nt == 0 ? 1.0 : 0.0);
      rec += nt ? static_cast<double>(inter) / nt : (np == 0 ? 1.0 : 0.0);
      f1 += np + nt ? 2.0 * inter / static_cast<double>(np + nt) : 1.0;
    }
    rep.accuracy = acc / static_cast<double>(m);
    rep.precision = prec / static_cast<double>(m);
    rep.recall = rec / static_cast<double>(m);
    rep.f1 = f1 / static_cast<double>(m);
  }

  double ma = 0;
  for (std::size_t j = 0; j < a; ++j) {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const int p = predictions[i][j], t = truths[i][j];
      if (p && t) ++tp;
      else if (p && !t) ++fp;
      else if (!p && t) ++fn;
      else ++tn;
    }
    const double tpr = tp + fn ? static_cast<double>(tp) / (tp + fn) : 1.0;
    const double tnr = tn + fp ? static_cast<double>(tn) / (tn + fp) : 1.0;
    ma += (tpr + tnr) / 2.0;
  }
  rep.mean_attr_accuracy = ma / static_cast<double>(a);
  return rep;
}

diversity_result part_diversity(const tensorf& features) {
  if (features.ndim() != 3)
    throw shape_mismatch_error("part_diversity expects (N,parts,C)");
  const int64_t n = features.dim(0), p = features.dim(1);
  if (n == 0) throw empty_input_error("part_diversity: empty batch");
  const auto unit = normalized_parts(features);
  const int64_t c = features.dim(2);
  diversity_result res;
  res.matrix = tensord({p, p});
  for (int64_t s = 0; s < n; ++s) {
    for (int64_t i = 0; i < p; ++i) {
      for (int64_t j = 0; j < p; ++j) {
        const double* a = unit.data() + (s * p + i) * c;
        const double* b = unit.data() + (s * p + j) * c;
        double dot = 0;
        for (int64_t d = 0; d < c; ++d) dot += a[d] * b[d];
        res.matrix.at(i, j) += dot;
      }
    }
  }
  for (int64_t i = 0; i < p * p; ++i) res.matrix[i] /= static_cast<double>(n);
  double off = 0;
  for (int64_t i = 0; i < p; ++i)
    for (int64_t j = 0; j < p; ++j)
      if (i != j) off += res.matrix.at(i, j);
  res.diversity = 1.0 - off / static_cast<double>(p * (p - 1));
  return res;
}

}  // namespace partgait::evalkit
