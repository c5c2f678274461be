#include "partgait/cliutil/schemas.hpp"

#include <sstream>

namespace partgait::cli {

namespace {

std::vector<int64_t> to_i64(const std::vector<int>& v) {
  return {v.begin(), v.end()};
}

void add_model_keys(config_schema& s) {
  s.add_int_list("model.channels", "8,16,32,64")
      .add_int_list("model.depths", "1,1,1,1")
      .add_int("model.proj_hidden", 128, 1, 1 << 20)
      .add_int("model.embed_dim", 64, 1, 1 << 20);
}

void add_augment_keys(config_schema& s) {
  s.add_real("augment.flip_prob", 0.5, 0.0, 1.0)
      .add_real("augment.rotate_max_degrees", 10.0, 0.0, 180.0)
      .add_real("augment.perspective_strength", 0.1, 0.0, 1.0)
      .add_real("augment.erase_prob", 0.3, 0.0, 1.0)
      .add_real("augment.erase_area_min", 0.02, 0.0, 1.0)
      .add_real("augment.erase_area_max", 0.2, 0.0, 1.0);
}

std::vector<data::attribute_rule> rules_from_text(const std::string& text) {
  std::vector<data::attribute_rule> rules;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    data::attribute_rule r;
    std::stringstream fields(item);
    std::string attr, index, op, threshold;
    if (!std::getline(fields, attr, ':') || !std::getline(fields, index, ':') ||
        !std::getline(fields, op, ':') || !std::getline(fields, threshold))
      throw bad_config_error("attribute rule '" + item +
                             "' must be name:index:op:threshold");
    r.attribute = attr;
    try {
      r.param_index = std::stoi(index);
      r.threshold = std::stod(threshold);
    } catch (const std::exception&) {
      throw bad_config_error("attribute rule '" + item + "': bad number");
    }
    r.op = op;
    rules.push_back(std::move(r));
  }
  return rules;
}

}  // namespace

config_schema gen_schema() {
  config_schema s;
  s.add_text("corpus.name", "synthetic")
      .add_int("corpus.subjects", 10, 1, 1000000)
      .add_int("corpus.sequences", 4, 1, 1000000)
      .add_int("corpus.frames", 32, 1, 1000000)
      .add_int("corpus.shape_dim", data::kShapeParamCount, 1, 64)
      .add_int("corpus.period_min", 8, 4, 10000)
      .add_int("corpus.period_max", 24, 4, 10000)
      .add_int("corpus.seed", 1)
      .add_text("corpus.attribute_rules", "lean:8:abs_gt:0.10")
      .add_text("run.dir", "");
  return s;
}

config_schema pretrain_schema() {
  config_schema s;
  s.add_text("data.manifest", "");
  add_model_keys(s);
  s.add_int("train.batch_pairs", 32, 1, 65536)
      .add_int("train.clip_len", 16, 1, 4096)
      .add_int_list("train.schedule", "1,2,4,8")
      .add_real("train.tau", 16.0, 1e-9, 1e9)
      .add_real("train.ema_m0", 0.99, 0.0, 1.0)
      .add_int("train.total_steps", 80000, 1, 100000000)
      .add_text("train.scheduler", "cosine")
      .add_real("train.lr0", 0.05, 1e-12, 1e6)
      .add_int("train.t_max", 80000, 1, 100000000)
      .add_real("train.eta_min", 1e-5, 0.0, 1e6)
      .add_int_list("train.milestones", "20000,30000")
      .add_real("train.gamma", 0.1, 0.0, 1.0)
      .add_real("train.momentum", 0.9, 0.0, 1.0)
      .add_real("train.weight_decay", 5e-4, 0.0, 1.0)
      .add_int("train.seed", 1)
      .add_int("train.diversity_every", 50, 0, 100000000)
      .add_int("train.checkpoint_every", 0, 0, 100000000);
  add_augment_keys(s);
  s.add_text("run.dir", "");
  return s;
}

config_schema finetune_schema() {
  config_schema s;
  s.add_text("data.corpus", "");
  add_model_keys(s);
  s.add_text("task.kind", "recognition")
      .add_text("task.mode", "finetune")
      .add_text("task.attributes", "lean")
      .add_text("task.checkpoint", "")
      .add_int("train.subjects_p", 8, 2, 65536)
      .add_int("train.clips_q", 4, 2, 65536)
      .add_int("train.frames_j", 16, 1, 4096)
      .add_int("train.batch_b", 32, 1, 65536)
      .add_real("train.stage3_lr", 0.001, 0.0, 1e6)
      .add_real("train.stage4_lr", 0.005, 0.0, 1e6)
      .add_real("train.projector_lr", 0.01, 0.0, 1e6)
      .add_real("train.head_lr", 0.1, 0.0, 1e6)
      .add_int_list("train.milestones", "250,400")
      .add_real("train.gamma", 0.1, 0.0, 1.0)
      .add_int("train.total_steps", 500, 1, 100000000)
      .add_int_list("train.schedule", "1,2,4,8")
      .add_real("train.margin", 0.2, 0.0, 1e6)
      .add_real("train.momentum", 0.9, 0.0, 1.0)
      .add_real("train.weight_decay", 5e-4, 0.0, 1.0)
      .add_int("train.seed", 1)
      .add_int("train.checkpoint_every", 0, 0, 100000000);
  s.add_text("run.dir", "");
  return s;
}

config_schema eval_schema() {
  config_schema s;
  s.add_text("eval.checkpoint", "")
      .add_text("eval.corpus", "")
      .add_text("eval.mode", "zero_shot")
      .add_int_list("eval.rank_ks", "1,5")
      .add_bool("eval.allow_self_match", false)
      .add_text("eval.gallery_seqs", "")
      .add_text("eval.probe_seqs", "")
      .add_text("run.dir", "");
  return s;
}

config_schema diag_schema() {
  config_schema s;
  s.add_text("diag.checkpoint", "")
      .add_text("diag.corpus", "")
      .add_int("diag.max_sequences", 256, 1, 1000000)
      .add_text("run.dir", "");
  return s;
}

data::synthetic_corpus_spec corpus_spec_from_config(const config_map& m) {
  data::synthetic_corpus_spec spec;
  spec.name = get_text(m, "corpus.name");
  spec.num_subjects = static_cast<int>(get_int(m, "corpus.subjects"));
  spec.sequences_per_subject = static_cast<int>(get_int(m, "corpus.sequences"));
  spec.frames_per_sequence = static_cast<int>(get_int(m, "corpus.frames"));
  spec.shape_param_dim = static_cast<int>(get_int(m, "corpus.shape_dim"));
  spec.gait_period_min = static_cast<int>(get_int(m, "corpus.period_min"));
  spec.gait_period_max = static_cast<int>(get_int(m, "corpus.period_max"));
  spec.rng_seed = static_cast<uint64_t>(get_int(m, "corpus.seed"));
  spec.attribute_rules = rules_from_text(get_text(m, "corpus.attribute_rules"));
  return spec;
}

model::tower_config tower_from_config(const config_map& m) {
  model::tower_config t;
  const auto channels = get_int_list(m, "model.channels");
  const auto depths = get_int_list(m, "model.depths");
  if (channels.size() != 4 || depths.size() != 4)
    throw bad_config_error("model.channels and model.depths need 4 entries");
  for (std::size_t i = 0; i < 4; ++i) {
    t.bb.channels[i] = channels[i];
    t.bb.depths[i] = depths[i];
  }
  t.proj_hidden = static_cast<int>(get_int(m, "model.proj_hidden"));
  t.embed_dim = static_cast<int>(get_int(m, "model.embed_dim"));
  return t;
}

data::augmentation_policy policy_from_config(const config_map& m) {
  data::augmentation_policy p;
  p.flip_prob = get_real(m, "augment.flip_prob");
  p.rotate_max_degrees = get_real(m, "augment.rotate_max_degrees");
  p.perspective_strength = get_real(m, "augment.perspective_strength");
  p.erase_prob = get_real(m, "augment.erase_prob");
  p.erase_area_min = get_real(m, "augment.erase_area_min");
  p.erase_area_max = get_real(m, "augment.erase_area_max");
  if (p.erase_area_min > p.erase_area_max)
    throw bad_config_error("augment.erase_area_min exceeds max");
  return p;
}

pretrain::pretrain_config pretrain_from_config(const config_map& m) {
  pretrain::pretrain_config c;
  c.tower = tower_from_config(m);
  c.batch_pairs = get_int(m, "train.batch_pairs");
  c.clip_len = get_int(m, "train.clip_len");
  c.schedule = get_int_list(m, "train.schedule");
  c.tau = get_real(m, "train.tau");
  c.ema_m0 = get_real(m, "train.ema_m0");
  c.total_steps = get_int(m, "train.total_steps");
  const auto& sched = get_text(m, "train.scheduler");
  if (sched == "cosine")
    c.lr.mode = pretrain::lr_schedule::kind::cosine;
  else if (sched == "multistep")
    c.lr.mode = pretrain::lr_schedule::kind::multistep;
  else
    throw bad_config_error("train.scheduler must be cosine or multistep");
  c.lr.lr0 = get_real(m, "train.lr0");
  c.lr.t_max = get_int(m, "train.t_max");
  c.lr.eta_min = get_real(m, "train.eta_min");
  c.lr.milestones = to_i64(get_int_list(m, "train.milestones"));
  c.lr.gamma = get_real(m, "train.gamma");
  c.momentum = get_real(m, "train.momentum");
  c.weight_decay = get_real(m, "train.weight_decay");
  c.seed = static_cast<uint64_t>(get_int(m, "train.seed"));
  c.policy = policy_from_config(m);
  c.diversity_every = get_int(m, "train.diversity_every");
  return c;
}

finetune::finetune_config finetune_from_config(const config_map& m) {
  finetune::finetune_config c;
  c.tower = tower_from_config(m);
  const auto& kind = get_text(m, "task.kind");
  if (kind == "recognition")
    c.task = finetune::task_kind::recognition;
  else if (kind == "healthcare_single")
    c.task = finetune::task_kind::healthcare_single;
  else if (kind == "healthcare_multilabel")
    c.task = finetune::task_kind::healthcare_multilabel;
  else
    throw bad_config_error(
        "task.kind must be recognition, healthcare_single, or "
        "healthcare_multilabel");
  const auto& mode = get_text(m, "task.mode");
  if (mode == "finetune")
    c.mode = finetune::tune_mode::finetune;
  else if (mode == "linear_probe")
    c.mode = finetune::tune_mode::linear_probe;
  else
    throw bad_config_error("task.mode must be finetune or linear_probe");
  c.subjects_p = static_cast<int>(get_int(m, "train.subjects_p"));
  c.clips_q = static_cast<int>(get_int(m, "train.clips_q"));
  c.frames_j = static_cast<int>(get_int(m, "train.frames_j"));
  c.batch_b = static_cast<int>(get_int(m, "train.batch_b"));
  c.lrs.stage3 = get_real(m, "train.stage3_lr");
  c.lrs.stage4 = get_real(m, "train.stage4_lr");
  c.lrs.projector = get_real(m, "train.projector_lr");
  c.lrs.head = get_real(m, "train.head_lr");
  c.milestones = to_i64(get_int_list(m, "train.milestones"));
  c.gamma = get_real(m, "train.gamma");
  c.total_steps = get_int(m, "train.total_steps");
  c.schedule = get_int_list(m, "train.schedule");
  c.margin = get_real(m, "train.margin");
  c.momentum = get_real(m, "train.momentum");
  c.weight_decay = get_real(m, "train.weight_decay");
  c.seed = static_cast<uint64_t>(get_int(m, "train.seed"));
  c.attributes.clear();
  std::stringstream ss(get_text(m, "task.attributes"));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) c.attributes.push_back(item);
  return c;
}

}  // namespace partgait::cli
