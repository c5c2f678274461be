#pragma once

#include <string>

#include "partgait/model/checkpoint.hpp"
#include "partgait/model/heads.hpp"
#include "partgait/model/part_forward.hpp"
#include "partgait/model/pool.hpp"
#include "partgait/model/ssl.hpp"

namespace partgait::finetune {

enum class task_kind { recognition, healthcare_single, healthcare_multilabel };
enum class tune_mode { finetune, linear_probe };

// Pretrained teacher encoder + projector with the predictor replaced by
// a task head. The backbone keeps the part-aware scheduled forward.
template <typename T>
struct finetune_model {
  model::tower_config cfg;
  task_kind task = task_kind::recognition;
  model::backbone<T> encoder;
  model::part_mlp<T> projector;
  model::recognition_head<T> rec_head;
  model::healthcare_head<T> hc_head;

  void init(const model::tower_config& c, task_kind t, int num_classes,
            rng_stream& rng) {
    cfg = c;
    task = t;
    encoder.init(c.bb, rng);
    projector.init(model::kNumParts,
                   {c.bb.channels[3], c.proj_hidden, c.proj_hidden,
                    c.embed_dim},
                   rng);
    if (task == task_kind::recognition)
      rec_head.init(model::kNumParts, c.embed_dim, c.embed_dim, num_classes,
                    rng);
    else
      hc_head.init(model::kNumParts, c.embed_dim, num_classes, rng);
  }

  int num_classes() const {
    return task == task_kind::recognition ? rec_head.num_classes
                                          : hc_head.num_classes;
  }

  void visit_params(const nn::param_visitor<T>& fn) {
    encoder.visit_params("encoder", fn);
    projector.visit_params("projector", fn);
    if (task == task_kind::recognition)
      rec_head.visit_params("head", fn);
    else
      hc_head.visit_params("head", fn);
  }

  void visit_buffers(const nn::buffer_visitor<T>& fn) {
    encoder.visit_buffers("encoder", fn);
    projector.visit_buffers("projector", fn);
    if (task == task_kind::recognition)
      rec_head.visit_buffers("head", fn);
    else
      hc_head.visit_buffers("head", fn);
  }

  struct trunk_state {
    model::part_forward_state<T> encoder_s;
    typename model::gait_pool<T>::state pool_s;
    typename model::part_mlp<T>::state projector_s;
  };

  // Shared trunk: scheduled part-aware encode, pool, project. In probe
  // mode the trunk runs frozen in eval mode, so it needs no state.
  tensor<T> trunk_forward(const tensor<T>& x,
                          const std::vector<parts::sub_batch>& schedule,
                          trunk_state* st, bool training) {
    auto feat = model::part_forward(encoder, x, schedule,
                                    st ? &st->encoder_s : nullptr, training);
    auto pooled =
        model::gait_pool<T>::forward(feat, st ? &st->pool_s : nullptr);
    return projector.forward(pooled, st ? &st->projector_s : nullptr,
                             training);
  }

  void trunk_backward(const tensor<T>& dk, const trunk_state& st) {
    auto d = projector.backward(dk, st.projector_s);
    d = model::gait_pool<T>::backward(d, st.pool_s);
    model::part_backward(encoder, d, st.encoder_s);
  }
};

// Loads teacher encoder + projector weights (and normalization buffers)
// from a pretraining checkpoint into a freshly initialized task model;
// the head keeps its new initialization.
template <typename T>
void load_pretrained_trunk(finetune_model<T>& m,
                           const model::tensor_archive& a) {
  const auto take = [&](const std::string& name, tensor<T>& dst) {
    const tensorf& src = a.get(name);  // throws checkpoint_mismatch_error
    if (src.shape() != dst.shape())
      throw checkpoint_mismatch_error("pretrained tensor " + name +
                                      " has shape " + src.describe() +
                                      ", expected " + dst.describe());
    for (int64_t i = 0; i < dst.numel(); ++i) dst[i] = static_cast<T>(src[i]);
  };
  m.encoder.visit_params("teacher.encoder",
                         [&](const std::string& n, nn::param<T>& p) {
                           take(n, p.value);
                         });
  m.encoder.visit_buffers("teacher.encoder", take);
  m.projector.visit_params("teacher.projector",
                           [&](const std::string& n, nn::param<T>& p) {
                             take(n, p.value);
                           });
  m.projector.visit_buffers("teacher.projector", take);
}

}  // namespace partgait::finetune
