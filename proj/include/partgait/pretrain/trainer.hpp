#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "partgait/data/sampler.hpp"
#include "partgait/evalkit/metrics.hpp"
#include "partgait/model/checkpoint.hpp"
#include "partgait/model/part_forward.hpp"
#include "partgait/model/ssl.hpp"
#include "partgait/pretrain/info_nce.hpp"
#include "partgait/pretrain/schedules.hpp"
#include "partgait/pretrain/sgd.hpp"

namespace partgait::pretrain {

struct pretrain_config {
  model::tower_config tower = model::desk_tower();
  int64_t batch_pairs = 32;
  int64_t clip_len = 16;
  std::vector<int> schedule{1, 2, 4, 8};
  double tau = 16.0;
  double ema_m0 = 0.99;
  int64_t total_steps = 80000;
  lr_schedule lr;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  uint64_t seed = 0;
  data::augmentation_policy policy;
  int64_t diversity_every = 50;

  void validate() const {
    if (batch_pairs < 1 || clip_len < 1 || total_steps < 1)
      throw bad_config_error("pretrain: counts must be positive");
    if (schedule.empty() ||
        batch_pairs % static_cast<int64_t>(schedule.size()) != 0)
      throw bad_config_error("pretrain: batch_pairs must divide into the part schedule");
    if (!(tau > 0)) throw bad_config_error("pretrain: tau must be positive");
    if (!(lr.lr0 > 0)) throw bad_config_error("pretrain: lr0 must be positive");
  }
};

inline nlohmann::json tower_to_json(const model::tower_config& t) {
  nlohmann::json j;
  j["channels"] = t.bb.channels;
  j["depths"] = t.bb.depths;
  j["proj_hidden"] = t.proj_hidden;
  j["embed_dim"] = t.embed_dim;
  return j;
}

inline model::tower_config tower_from_json(const nlohmann::json& j) {
  model::tower_config t;
  for (std::size_t i = 0; i < 4; ++i) {
    t.bb.channels[i] = j.at("channels").at(i).get<int>();
    t.bb.depths[i] = j.at("depths").at(i).get<int>();
  }
  t.proj_hidden = j.at("proj_hidden").get<int>();
  t.embed_dim = j.at("embed_dim").get<int>();
  return t;
}

struct step_record {
  int64_t step = 0;
  double lr = 0, ema_m = 0, loss = 0;
  double diversity = 0;
  bool has_diversity = false;
};

class pretrainer {
 public:
  pretrain_config cfg;
  model::teacher_student<float> pair;
  sgd<float> opt;
  rng_stream rng{0};
  int64_t step_count = 0;

  void init(const pretrain_config& c) {
    c.validate();
    cfg = c;
    rng = rng_stream(c.seed);
    step_count = 0;
    pair.init(c.tower, rng);
    opt = sgd<float>{};
    opt.momentum = static_cast<float>(c.momentum);
    opt.weight_decay = static_cast<float>(c.weight_decay);
    auto& group = opt.add_group(static_cast<float>(c.lr.lr0));
    pair.student.visit_params(
        "student", [&](const std::string& name, nn::param<float>& p) {
          opt.add_param(group, name, p);
        });
  }

  struct student_state {
    model::part_forward_state<float> encoder;
    typename model::gait_pool<float>::state pool;
    typename model::part_mlp<float>::state projector, predictor;
  };

  // Teacher pass: no gradient state anywhere; its normalization layers
  // run in training mode so their running statistics track the teacher's
  // own batches. q_t (predictor output) is produced for zero-shot use
  // and plays no role in the loss.
  tensorf teacher_targets(const tensorf& x, tensorf* q_t = nullptr) {
    auto feat = pair.teacher.encoder.forward(x, nullptr, true);
    auto pooled = model::gait_pool<float>::forward(feat, nullptr);
    auto k = pair.teacher.projector.forward(pooled, nullptr, true);
    if (q_t) *q_t = pair.teacher.predictor.forward(k, nullptr, true);
    return k;
  }

  tensorf student_queries(const tensorf& x,
                          const std::vector<parts::sub_batch>& schedule,
                          student_state& st) {
    auto feat =
        model::part_forward(pair.student.encoder, x, schedule, &st.encoder, true);
    auto pooled = model::gait_pool<float>::forward(feat, &st.pool);
    auto z = pair.student.projector.forward(pooled, &st.projector, true);
    return pair.student.predictor.forward(z, &st.predictor, true);
  }

  void student_backward(const tensorf& dq, const student_state& st) {
    auto d = pair.student.predictor.backward(dq, st.predictor);
    d = pair.student.projector.backward(d, st.projector);
    d = model::gait_pool<float>::backward(d, st.pool);
    model::part_backward(pair.student.encoder, d, st.encoder);
  }

  step_record step(const data::clip_pair_batch& batch) {
    const tensorf k_t = teacher_targets(batch.teacher_view);
    const auto schedule = parts::assign_part_schedule(
        batch.student_view.dim(0), cfg.schedule, batch.student_view.dim(3));
    student_state st;
    const tensorf q_s = student_queries(batch.student_view, schedule, st);
    const auto nce =
        info_nce<float>(q_s, k_t, static_cast<float>(cfg.tau), true);

    opt.zero_grad();
    student_backward(nce.grad_q, st);
    opt.step(static_cast<float>(cfg.lr.factor(step_count)));

    const double m = model::ema_momentum(step_count, cfg.total_steps, cfg.ema_m0);
    pair.ema_update(static_cast<float>(m));

    step_record rec;
    rec.step = step_count;
    rec.lr = cfg.lr.at(step_count);
    rec.ema_m = m;
    rec.loss = nce.loss;
    if (cfg.diversity_every > 0 && step_count % cfg.diversity_every == 0) {
      rec.diversity = evalkit::part_diversity(k_t).diversity;
      rec.has_diversity = true;
    }
    ++step_count;
    return rec;
  }

  step_record run_step(const data::corpus_pool& pool,
                       const std::vector<double>& weights) {
    const auto batch = data::build_pretrain_batch(
        pool, weights, static_cast<std::size_t>(cfg.batch_pairs),
        static_cast<std::size_t>(cfg.clip_len), cfg.policy, rng);
    return step(batch);
  }

  model::tensor_archive archive() {
    model::tensor_archive a;
    nlohmann::json meta;
    meta["kind"] = "pretrain";
    meta["step"] = step_count;
    meta["rng"] = rng.save_state();
    meta["tower"] = tower_to_json(cfg.tower);
    a.meta_json = meta.dump();
    const auto put_param = [&](const std::string& name, nn::param<float>& p) {
      a.put(name, p.value);
    };
    const auto put_buffer = [&](const std::string& name, tensorf& b) {
      a.put(name, b);
    };
    pair.student.visit_params("student", put_param);
    pair.student.visit_buffers("student", put_buffer);
    pair.teacher.visit_params("teacher", put_param);
    pair.teacher.visit_buffers("teacher", put_buffer);
    opt.visit_velocity([&](const std::string& name, tensorf& v) {
      a.put(name, v);
    });
    return a;
  }

  void restore(const model::tensor_archive& a) {
    const auto meta = nlohmann::json::parse(a.meta_json);
    if (meta.value("kind", "") != "pretrain")
      throw checkpoint_mismatch_error("not a pretrain checkpoint");
    step_count = meta.at("step").get<int64_t>();
    rng.load_state(meta.at("rng").get<std::array<uint64_t, 6>>());
    const auto take = [&](const std::string& name, tensorf& dst) {
      const tensorf& src = a.get(name);
      if (!src.same_shape(dst))
        throw checkpoint_mismatch_error("checkpoint tensor " + name +
                                        " has shape " + src.describe() +
                                        ", expected " + dst.describe());
      dst = src;
    };
    pair.student.visit_params("student", [&](const std::string& n,
                                             nn::param<float>& p) {
      take(n, p.value);
    });
    pair.student.visit_buffers("student", take);
    pair.teacher.visit_params("teacher", [&](const std::string& n,
                                             nn::param<float>& p) {
      take(n, p.value);
    });
    pair.teacher.visit_buffers("teacher", take);
    opt.visit_velocity(take);
  }

  void save_checkpoint(const std::string& path) { archive().save(path); }

  void load_checkpoint(const std::string& path) {
    restore(model::tensor_archive::load(path));
  }
};

struct run_options {
  int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::string checkpoint_dir;    // empty: no checkpoints at all
  std::function<void(const step_record&)> on_record;
};

inline std::string checkpoint_name(const std::string& dir, int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld.ckpt",
                static_cast<long long>(step));
  return dir + "/" + buf;
}

// Runs the remaining steps (so a restored trainer resumes seamlessly).
inline void run_pretraining(pretrainer& tr, const data::corpus_pool& pool,
                            const run_options& opt = {}) {
  const auto weights = data::dataset_weights(pool.manifests);
  while (tr.step_count < tr.cfg.total_steps) {
    const step_record rec = tr.run_step(pool, weights);
    if (!std::isfinite(rec.loss))
      throw numerical_error("loss became non-finite at step " +
                            std::to_string(rec.step));
    if (opt.on_record) opt.on_record(rec);
    if (!opt.checkpoint_dir.empty() && opt.checkpoint_every > 0 &&
        tr.step_count % opt.checkpoint_every == 0 &&
        tr.step_count < tr.cfg.total_steps)
      tr.save_checkpoint(checkpoint_name(opt.checkpoint_dir, tr.step_count));
  }
  if (!opt.checkpoint_dir.empty())
    tr.save_checkpoint(opt.checkpoint_dir + "/final.ckpt");
}

}  // namespace partgait::pretrain
