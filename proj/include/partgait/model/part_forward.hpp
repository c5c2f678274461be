#pragma once

#include <vector>

#include "partgait/model/backbone.hpp"
#include "partgait/partops.hpp"

namespace partgait::model {

template <typename T>
struct part_forward_state {
  std::vector<parts::sub_batch> schedule;
  std::vector<parts::part_bundle<T>> bundles;
  std::vector<typename backbone<T>::state> bb_states;
  std::vector<int64_t> in_shape;
};

namespace detail {

template <typename T>
tensor<T> slice_samples(const tensor<T>& x, int64_t begin, int64_t end) {
  auto shape = x.shape();
  const int64_t stride = x.numel() / x.dim(0);
  shape[0] = end - begin;
  tensor<T> out(shape);
  std::copy(x.data() + begin * stride, x.data() + end * stride, out.data());
  return out;
}

template <typename T>
void paste_samples(tensor<T>& dst, const tensor<T>& src, int64_t begin) {
  const int64_t stride = dst.numel() / dst.dim(0);
  std::copy(src.data(), src.data() + src.numel(),
            dst.data() + begin * stride);
}

}  // namespace detail

// Scheduled part-aware encode: each contiguous sub-batch is shifted,
// split into its own band count, pushed through the backbone as an
// independent batch (separate normalization statistics), reassembled at
// feature resolution, and the sub-batch outputs are concatenated back in
// order. Every band count yields the same feature height, so the result
// is a single (N, C, S, H_f, W_f) map.
template <typename T>
tensor<T> part_forward(backbone<T>& bb, const tensor<T>& x,
                       const std::vector<parts::sub_batch>& schedule,
                       part_forward_state<T>* st, bool training) {
  if (x.ndim() != 5)
    throw shape_mismatch_error("part_forward: expected (N,C,S,H,W)");
  if (st) {
    st->schedule = schedule;
    st->bundles.clear();
    st->bb_states.assign(schedule.size(), typename backbone<T>::state{});
    st->in_shape = x.shape();
  }
  tensor<T> out;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& sb = schedule[i];
    const tensor<T> xs = detail::slice_samples(x, sb.begin, sb.end);
    auto bundle = parts::split(xs, sb.p, sb.shifts);
    tensor<T> feat = bb.forward(bundle.parts,
                                st ? &st->bb_states[i] : nullptr, training);
    bundle.parts = tensor<T>();  // band pixels live on in the conv caches
    const tensor<T> joined = parts::reassemble(
        parts::part_bundle<T>{std::move(feat), bundle.p, bundle.shift_rows,
                              bundle.in_height});
    if (out.empty()) {
      auto shape = joined.shape();
      shape[0] = x.dim(0);
      out = tensor<T>(shape);
    }
    detail::paste_samples(out, joined, sb.begin);
    if (st) st->bundles.push_back(std::move(bundle));
  }
  return out;
}

template <typename T>
tensor<T> part_backward(backbone<T>& bb, const tensor<T>& dy,
                        const part_forward_state<T>& st) {
  tensor<T> dx(st.in_shape);
  for (std::size_t i = 0; i < st.schedule.size(); ++i) {
    const auto& sb = st.schedule[i];
    const tensor<T> dys = detail::slice_samples(dy, sb.begin, sb.end);
    // Rebuild the feature-resolution bundle geometry for the shift math.
    parts::part_bundle<T> feat_bundle;
    feat_bundle.p = sb.p;
    feat_bundle.shift_rows = st.bundles[i].shift_rows;
    feat_bundle.in_height = st.bundles[i].in_height;
    const tensor<T> dfeat = parts::reassemble_backward(dys, feat_bundle);
    const tensor<T> dparts = bb.backward(dfeat, st.bb_states[i]);
    parts::part_bundle<T> grad_bundle;
    grad_bundle.parts = dparts;
    grad_bundle.p = sb.p;
    grad_bundle.shift_rows = st.bundles[i].shift_rows;
    grad_bundle.in_height = st.bundles[i].in_height;
    const tensor<T> dxs = parts::split_backward(grad_bundle.parts, grad_bundle);
    detail::paste_samples(dx, dxs, sb.begin);
  }
  return dx;
}

}  // namespace partgait::model
