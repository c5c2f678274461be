#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "partgait/data/corpus.hpp"
#include "partgait/data/silhouette.hpp"
#include "partgait/finetune/losses.hpp"
#include "partgait/finetune/model.hpp"
#include "partgait/pretrain/schedules.hpp"
#include "partgait/pretrain/sgd.hpp"
#include "partgait/pretrain/trainer.hpp"

namespace partgait::finetune {

struct layer_lrs {
  double stage3 = 0.001;
  double stage4 = 0.005;
  double projector = 0.01;
  double head = 0.1;
};

struct finetune_config {
  model::tower_config tower = model::desk_tower();
  task_kind task = task_kind::recognition;
  tune_mode mode = tune_mode::finetune;
  // recognition batches: p subjects x q clips of j frames
  int subjects_p = 8;
  int clips_q = 4;
  int frames_j = 16;
  // healthcare batches: b clips of j frames
  int batch_b = 32;
  layer_lrs lrs;
  std::vector<int64_t> milestones{250, 400};
  double gamma = 0.1;
  int64_t total_steps = 500;
  std::vector<int> schedule{1, 2, 4, 8};
  double margin = 0.2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  uint64_t seed = 0;
  std::vector<std::string> attributes{"lean"};  // healthcare label columns

  void validate() const {
    if (total_steps < 1 || frames_j < 1)
      throw bad_config_error("finetune: counts must be positive");
    if (margin < 0) throw bad_config_error("finetune: margin must be >= 0");
    if (task == task_kind::recognition) {
      if (subjects_p < 2 || clips_q < 2)
        throw bad_config_error("finetune: recognition batches need p >= 2, q >= 2");
      if ((static_cast<int64_t>(subjects_p) * clips_q) %
          static_cast<int64_t>(schedule.size()))
        throw bad_config_error("finetune: batch size must divide into the part schedule");
    } else if (batch_b % static_cast<int64_t>(schedule.size())) {
      throw bad_config_error("finetune: batch size must divide into the part schedule");
    }
    if (schedule.empty()) throw bad_config_error("finetune: empty part schedule");
  }
};

// Four groups in finetune mode (stages 3 and 4 of the backbone, the
// projector, the head), stages 1-2 left out entirely; linear probe keeps
// only the head group.
template <typename T>
void layerwise_param_groups(finetune_model<T>& m, pretrain::sgd<T>& opt,
                            tune_mode mode, const layer_lrs& lrs) {
  if (mode == tune_mode::finetune) {
    auto& g3 = opt.add_group(static_cast<T>(lrs.stage3));
    auto& g4 = opt.add_group(static_cast<T>(lrs.stage4));
    auto& gp = opt.add_group(static_cast<T>(lrs.projector));
    m.encoder.visit_params("encoder", [&](const std::string& name,
                                          nn::param<T>& p) {
      if (name.find(".stage3.") != std::string::npos)
        opt.add_param(g3, name, p);
      else if (name.find(".stage4.") != std::string::npos)
        opt.add_param(g4, name, p);
    });
    m.projector.visit_params("projector",
                             [&](const std::string& name, nn::param<T>& p) {
                               opt.add_param(gp, name, p);
                             });
  }
  auto& gh = opt.add_group(static_cast<T>(lrs.head));
  const auto add_head = [&](const std::string& name, nn::param<T>& p) {
    opt.add_param(gh, name, p);
  };
  if (m.task == task_kind::recognition)
    m.rec_head.visit_params("head", add_head);
  else
    m.hc_head.visit_params("head", add_head);
}

struct labeled_batch {
  tensorf clips;  // (N,1,S,64,44)
  std::vector<int> labels;                 // recognition / single-class
  std::vector<std::vector<int>> attr_labels;  // multilabel rows
};

// Labeled sampling views over a scanned corpus: recognition draws PK
// batches over subjects, healthcare draws flat batches with attribute
// labels from labels.tsv.
class labeled_sampler {
 public:
  void init(const data::corpus_index& corpus) {
    corpus_ = &corpus;
    by_subject_.clear();
    subjects_.clear();
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i)
      by_subject_[corpus.sequences[i].subject_id].push_back(i);
    for (const auto& [subject, rows] : by_subject_) subjects_.push_back(subject);
    std::sort(subjects_.begin(), subjects_.end());
  }

  int num_subjects() const { return static_cast<int>(subjects_.size()); }
  const std::vector<std::string>& subjects() const { return subjects_; }

  int subject_class(const std::string& subject) const {
    const auto it = std::lower_bound(subjects_.begin(), subjects_.end(), subject);
    if (it == subjects_.end() || *it != subject)
      throw bad_label_error("unknown subject " + subject);
    return static_cast<int>(it - subjects_.begin());
  }

  int attribute_value(const std::string& subject,
                      const std::string& attribute) const {
    const auto sit = corpus_->labels.find(subject);
    if (sit == corpus_->labels.end())
      throw bad_label_error("subject " + subject + " missing from labels.tsv");
    const auto ait = sit->second.find(attribute);
    if (ait == sit->second.end())
      throw bad_label_error("attribute " + attribute + " missing for " + subject);
    return ait->second;
  }

  tensorf sample_clip(const data::sequence_ref& seq, int frames,
                      rng_stream& rng) const {
    const int64_t start = rng.uniform_int(seq.num_frames);
    std::vector<int64_t> idx(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f)
      idx[static_cast<std::size_t>(f)] = (start + f) % seq.num_frames;
    return data::load_frames(seq, idx);
  }

  labeled_batch recognition_batch(int p, int q, int frames,
                                  rng_stream& rng) const {
    if (num_subjects() < p)
      throw degenerate_batch_error("recognition_batch: only " +
                                   std::to_string(num_subjects()) +
                                   " subjects for p=" + std::to_string(p));
    // p distinct subjects by partial Fisher-Yates over the sorted list.
    std::vector<int> pool(subjects_.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    labeled_batch batch;
    const int64_t n = static_cast<int64_t>(p) * q;
    batch.clips = tensorf({n, 1, frames, data::kFrameHeight, data::kFrameWidth});
    int64_t row = 0;
    for (int i = 0; i < p; ++i) {
      const int64_t pick = i + rng.uniform_int(static_cast<int64_t>(pool.size()) - i);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
      const std::string& subject = subjects_[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])];
      const auto& rows = by_subject_.at(subject);
      for (int j = 0; j < q; ++j) {
        const auto& seq = corpus_->sequences[rows[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int64_t>(rows.size())))]];
        paste(batch.clips, row, sample_clip(seq, frames, rng));
        batch.labels.push_back(subject_class(subject));
        ++row;
      }
    }
    return batch;
  }

  labeled_batch healthcare_batch(int b, int frames,
                                 const std::vector<std::string>& attributes,
                                 rng_stream& rng) const {
    if (attributes.empty())
      throw bad_config_error("healthcare_batch: no attributes configured");
    labeled_batch batch;
    batch.clips = tensorf({b, 1, frames, data::kFrameHeight, data::kFrameWidth});
    for (int i = 0; i < b; ++i) {
      const auto& seq = corpus_->sequences[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int64_t>(corpus_->sequences.size())))];
      paste(batch.clips, i, sample_clip(seq, frames, rng));
      std::vector<int> row;
      for (const auto& attr : attributes)
        row.push_back(attribute_value(seq.subject_id, attr));
      batch.labels.push_back(row[0]);
      batch.attr_labels.push_back(std::move(row));
    }
    return batch;
  }

 private:
  static void paste(tensorf& dst, int64_t row, const tensorf& clip) {
    const int64_t len = clip.numel();
    std::copy(clip.data(), clip.data() + len, dst.data() + row * len);
  }

  const data::corpus_index* corpus_ = nullptr;
  std::map<std::string, std::vector<std::size_t>> by_subject_;
  std::vector<std::string> subjects_;
};

struct finetune_record {
  int64_t step = 0;
  double lr_factor = 0, loss = 0, triplet = 0, ce = 0;
};

template <typename T>
class finetuner {
 public:
  finetune_config cfg;
  finetune_model<T> net;
  pretrain::sgd<T> opt;
  pretrain::lr_schedule sched;
  rng_stream rng{0};
  int64_t step_count = 0;

  void init(const finetune_config& c, int num_classes,
            const model::tensor_archive* pretrained) {
    c.validate();
    cfg = c;
    rng = rng_stream(c.seed);
    step_count = 0;
    net.init(c.tower, c.task, num_classes, rng);
    if (pretrained) load_pretrained_trunk(net, *pretrained);
    opt = pretrain::sgd<T>{};
    opt.momentum = static_cast<T>(c.momentum);
    opt.weight_decay = static_cast<T>(c.weight_decay);
    layerwise_param_groups(net, opt, c.mode, c.lrs);
    sched.mode = pretrain::lr_schedule::kind::multistep;
    sched.lr0 = 1.0;  // groups carry absolute rates; the schedule scales them
    sched.milestones = c.milestones;
    sched.gamma = c.gamma;
  }

  bool frozen_trunk() const { return cfg.mode == tune_mode::linear_probe; }

  finetune_record step(const labeled_batch& batch) {
    const bool probe = frozen_trunk();
    const auto schedule = parts::assign_part_schedule(
        batch.clips.dim(0), cfg.schedule, batch.clips.dim(3));
    typename finetune_model<T>::trunk_state trunk_s;
    tensor<T> clips = cast_clips(batch.clips);
    // Probe mode runs the trunk frozen in eval mode: no state, no
    // statistics updates, so the pretrained stack stays bit-identical.
    const tensor<T> k =
        net.trunk_forward(clips, schedule, probe ? nullptr : &trunk_s, !probe);

    finetune_record rec;
    rec.step = step_count;
    rec.lr_factor = sched.factor(step_count);
    opt.zero_grad();
    if (cfg.task == task_kind::recognition) {
      typename model::recognition_head<T>::state head_s;
      const auto out = net.rec_head.forward(k, &head_s, true);
      const auto trip =
          triplet_loss<T>(out.a, batch.labels, static_cast<T>(cfg.margin));
      const auto ce = cross_entropy<T>(out.logits, batch.labels);
      rec.triplet = trip.loss;
      rec.ce = ce.loss;
      rec.loss = trip.loss + ce.loss;
      const tensor<T> dk = net.rec_head.backward(trip.grad, ce.grad, head_s);
      if (!probe) net.trunk_backward(dk, trunk_s);
    } else {
      typename model::healthcare_head<T>::state head_s;
      const tensor<T> logits = net.hc_head.forward(k, &head_s, true);
      loss_result<T> l;
      if (cfg.task == task_kind::healthcare_multilabel)
        l = multilabel_bce<T>(logits, batch.attr_labels);
      else
        l = cross_entropy<T>(logits, batch.labels);
      rec.ce = l.loss;
      rec.loss = l.loss;
      const tensor<T> dk = net.hc_head.backward(l.grad, head_s);
      if (!probe) net.trunk_backward(dk, trunk_s);
    }
    opt.step(static_cast<T>(sched.factor(step_count)));
    ++step_count;
    return rec;
  }

  model::tensor_archive archive() {
    model::tensor_archive a;
    nlohmann::json meta;
    meta["kind"] = "finetune";
    meta["task"] = static_cast<int>(cfg.task);
    meta["mode"] = static_cast<int>(cfg.mode);
    meta["num_classes"] = net.num_classes();
    meta["step"] = step_count;
    meta["rng"] = rng.save_state();
    meta["tower"] = pretrain::tower_to_json(cfg.tower);
    a.meta_json = meta.dump();
    net.visit_params([&](const std::string& n, nn::param<T>& p) {
      a.put(n, to_float(p.value));
    });
    net.visit_buffers([&](const std::string& n, tensor<T>& b) {
      a.put(n, to_float(b));
    });
    opt.visit_velocity([&](const std::string& n, tensor<T>& v) {
      a.put(n, to_float(v));
    });
    return a;
  }

  void restore(const model::tensor_archive& a) {
    const auto meta = nlohmann::json::parse(a.meta_json);
    if (meta.value("kind", "") != "finetune")
      throw checkpoint_mismatch_error("not a finetune checkpoint");
    step_count = meta.at("step").get<int64_t>();
    rng.load_state(meta.at("rng").get<std::array<uint64_t, 6>>());
    const auto take = [&](const std::string& name, tensor<T>& dst) {
      const tensorf& src = a.get(name);
      if (src.shape() != dst.shape())
        throw checkpoint_mismatch_error("checkpoint tensor " + name +
                                        " shape mismatch");
      for (int64_t i = 0; i < dst.numel(); ++i) dst[i] = static_cast<T>(src[i]);
    };
    net.visit_params([&](const std::string& n, nn::param<T>& p) {
      take(n, p.value);
    });
    net.visit_buffers(take);
    opt.visit_velocity(take);
  }

  // Deterministic eval-mode embedding of one clip batch; returns the
  // retrieval embedding a_bn (recognition) or the projector output.
  tensor<T> eval_embedding(const tensorf& clips) {
    const auto schedule = parts::assign_part_schedule(
        clips.dim(0), {1}, clips.dim(3));
    tensor<T> x = cast_clips(clips);
    const tensor<T> k = net.trunk_forward(x, schedule, nullptr, false);
    if (cfg.task != task_kind::recognition) return k;
    const auto out = net.rec_head.forward(k, nullptr, false);
    return out.a_bn;
  }

  tensor<T> eval_logits(const tensorf& clips) {
    const auto schedule = parts::assign_part_schedule(
        clips.dim(0), {1}, clips.dim(3));
    tensor<T> x = cast_clips(clips);
    const tensor<T> k = net.trunk_forward(x, schedule, nullptr, false);
    if (cfg.task == task_kind::recognition)
      return net.rec_head.forward(k, nullptr, false).logits;
    return net.hc_head.forward(k, nullptr, false);
  }

 private:
  static tensor<T> cast_clips(const tensorf& clips) {
    if constexpr (std::is_same_v<T, float>) {
      return clips;
    } else {
      tensor<T> out(clips.shape());
      for (int64_t i = 0; i < clips.numel(); ++i)
        out[i] = static_cast<T>(clips[i]);
      return out;
    }
  }

  static tensorf to_float(const tensor<T>& t) {
    if constexpr (std::is_same_v<T, float>) {
      return t;
    } else {
      tensorf out(t.shape());
      for (int64_t i = 0; i < t.numel(); ++i)
        out[i] = static_cast<float>(t[i]);
      return out;
    }
  }
};

}  // namespace partgait::finetune
