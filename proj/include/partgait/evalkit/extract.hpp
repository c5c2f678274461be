#pragma once

#include <utility>

#include "partgait/data/corpus.hpp"
#include "partgait/evalkit/metrics.hpp"

namespace partgait::evalkit {

inline constexpr int64_t kExtractFrameCap = 256;

inline std::vector<int64_t> capped_frame_indices(int64_t num_frames,
                                                 int64_t cap = kExtractFrameCap) {
  std::vector<int64_t> idx;
  if (num_frames <= cap) {
    idx.resize(static_cast<std::size_t>(num_frames));
    for (int64_t i = 0; i < num_frames; ++i) idx[static_cast<std::size_t>(i)] = i;
  } else {
    idx.resize(static_cast<std::size_t>(cap));
    for (int64_t i = 0; i < cap; ++i)
      idx[static_cast<std::size_t>(i)] = i * num_frames / cap;
  }
  return idx;
}

// One deterministic full-length eval pass per sequence (uniformly
// subsampled past the frame cap, no augmentation). `embed_clip` maps a
// (1,1,S,H,W) tensor to a (parts,C) or (1,parts,C) embedding; the actual
// network path (zero-shot q vs fine-tuned a) is chosen by the caller.
template <typename EmbedFn>
embedding_set extract_embeddings(const data::corpus_index& corpus,
                                 EmbedFn&& embed_clip) {
  embedding_set set;
  const auto m = static_cast<int64_t>(corpus.sequences.size());
  for (int64_t i = 0; i < m; ++i) {
    const auto& seq = corpus.sequences[static_cast<std::size_t>(i)];
    tensorf frames = data::load_frames(seq, capped_frame_indices(seq.num_frames));
    const int64_t s = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
    frames.set_shape({1, 1, s, h, w});
    tensorf emb = embed_clip(std::as_const(frames));
    if (emb.ndim() == 3 && emb.dim(0) == 1)
      emb.set_shape({emb.dim(1), emb.dim(2)});
    if (emb.ndim() != 2)
      throw shape_mismatch_error("extract_embeddings: embedder returned " +
                                 emb.describe());
    if (set.embeddings.empty())
      set.embeddings = tensorf({m, emb.dim(0), emb.dim(1)});
    std::copy(emb.data(), emb.data() + emb.numel(),
              set.embeddings.data() + i * emb.numel());
    set.sequence_ids.push_back(seq.sequence_id);
    set.subject_labels.push_back(seq.subject_id);
  }
  return set;
}

}  // namespace partgait::evalkit
