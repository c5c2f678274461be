#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "partgait/data/corpus.hpp"
#include "partgait/finetune/losses.hpp"
#include "partgait/finetune/trainer.hpp"
#include "partgait/pretrain/trainer.hpp"
#include "test_support.hpp"

using namespace partgait;

namespace {

tensor<double> column(std::vector<double> v) {
  tensor<double> t({static_cast<int64_t>(v.size()), 1, 1});
  for (size_t i = 0; i < v.size(); ++i) t[static_cast<int64_t>(i)] = v[i];
  return t;
}

tensor<double> random_embed(std::vector<int64_t> shape, uint64_t seed) {
  tensor<double> t(std::move(shape));
  rng_stream rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Textbook batch-all triplet loss: walk every (anchor, positive,
// negative) triple per part and average the active hinges.
double triplet_by_hand(const tensor<double>& a, const std::vector<int>& labels,
                       double margin, bool* any_active = nullptr) {
  const int64_t n = a.dim(0), p = a.dim(1), c = a.dim(2);
  const auto d2 = [&](int64_t i, int64_t j, int64_t part) {
    double s = 0;
    for (int64_t d = 0; d < c; ++d) {
      const double diff = a.at(i, part, d) - a.at(j, part, d);
      s += diff * diff;
    }
    return s;
  };
  double total = 0;
  int64_t triples = 0;
  bool active = false;
  for (int64_t part = 0; part < p; ++part)
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) {
        if (i == j || labels[size_t(i)] != labels[size_t(j)]) continue;
        for (int64_t k = 0; k < n; ++k) {
          if (labels[size_t(k)] == labels[size_t(i)]) continue;
          if (part == 0) ++triples;
          const double h = d2(i, j, part) - d2(i, k, part) + margin;
          if (h > 0) {
            total += h;
            active = true;
          }
        }
      }
  if (any_active) *any_active = active;
  return total / (static_cast<double>(triples) * static_cast<double>(p));
}

tensorf random_clips(std::vector<int64_t> shape, uint64_t seed) {
  tensorf t(std::move(shape));
  rng_stream rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

model::tower_config tiny_tower() {
  model::tower_config cfg;
  cfg.bb.channels = {2, 4, 4, 8};
  cfg.bb.depths = {1, 1, 1, 1};
  cfg.proj_hidden = 32;
  cfg.embed_dim = 8;
  return cfg;
}

}  // namespace

TEST_CASE("triplet loss on separable and overlapping line embeddings") {
  const std::vector<int> labels = {0, 0, 1, 1};

  // Classes {0,1} and {5,6}: every within-class distance beats every
  // cross-class distance by more than the margin.
  const auto clear = finetune::triplet_loss<double>(
      column({0, 1, 5, 6}), labels, 0.2, true);
  CHECK(clear.loss == 0.0);
  for (int64_t i = 0; i < clear.grad.numel(); ++i)
    CHECK(clear.grad[i] == 0.0);

  // Interleaved classes: 6 of the 8 triples stay active with hinge
  // value 3.25, so the mean is exactly 6*3.25/8.
  const auto hot = finetune::triplet_loss<double>(
      column({0, 2, 1, 3}), labels, 0.25, false);
  CHECK(hot.loss == 2.4375);

  const auto hot2 = finetune::triplet_loss<double>(
      column({0, 2, 1, 3}), labels, 0.2, false);
  CHECK(hot2.loss == doctest::Approx(2.4).epsilon(1e-12));

  CHECK_THROWS_AS(finetune::triplet_loss<double>(column({0, 1, 2, 3}),
                                                 {0, 0, 0, 0}, 0.2),
                  degenerate_batch_error);
  CHECK_THROWS_AS(
      finetune::triplet_loss<double>(column({0, 1, 2}), {0, 0, 1}, 0.2),
      degenerate_batch_error);
  CHECK_THROWS_AS(
      finetune::triplet_loss<double>(tensor<double>({3, 2}), {0, 0, 1}, 0.2),
      shape_mismatch_error);
}

TEST_CASE("triplet loss agrees with an exhaustive triple walk") {
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const auto a = random_embed({6, 2, 3}, seed);
    const auto got = finetune::triplet_loss<double>(a, labels, 0.3, false);
    bool any_active = false;
    const double want = triplet_by_hand(a, labels, 0.3, &any_active);
    CHECK(std::abs(got.loss - want) < 1e-12);
    // Zero exactly when no triple violates the margin.
    CHECK((got.loss == 0.0) == !any_active);
  }
}

TEST_CASE("cross entropy closed forms") {
  tensor<double> uniform({3, 7});
  for (int64_t i = 0; i < uniform.numel(); ++i) uniform[i] = 0.4;
  const auto u = finetune::cross_entropy<double>(uniform, {0, 3, 6}, false);
  CHECK(std::abs(u.loss - std::log(7.0)) < 1e-12);

  tensor<double> sharp({2, 4});
  sharp.at(0, 1) = 40.0;
  sharp.at(1, 2) = 40.0;
  const auto s = finetune::cross_entropy<double>(sharp, {1, 2}, false);
  CHECK(s.loss < 1e-6);

  const auto two = finetune::cross_entropy<double>(tensor<double>({1, 2}),
                                                   {0}, false);
  CHECK(std::abs(two.loss - std::log(2.0)) < 1e-12);

  // Reordering samples (with their labels) cannot change the mean.
  const auto logits = random_embed({5, 4}, 11);
  tensor<double> shuffled(logits.shape());
  const std::vector<int> labels = {1, 3, 0, 2, 2};
  const std::vector<int> perm = {4, 2, 0, 1, 3};
  std::vector<int> plabels(5);
  for (int i = 0; i < 5; ++i) {
    for (int64_t j = 0; j < 4; ++j)
      shuffled.at(i, j) = logits.at(perm[size_t(i)], j);
    plabels[size_t(i)] = labels[size_t(perm[size_t(i)])];
  }
  const auto l1 = finetune::cross_entropy<double>(logits, labels, false);
  const auto l2 = finetune::cross_entropy<double>(shuffled, plabels, false);
  CHECK(std::abs(l1.loss - l2.loss) < 1e-12);

  CHECK_THROWS_AS(finetune::cross_entropy<double>(sharp, {-1, 0}),
                  bad_label_error);
  CHECK_THROWS_AS(finetune::cross_entropy<double>(sharp, {0, 4}),
                  bad_label_error);
  CHECK_THROWS_AS(finetune::cross_entropy<double>(sharp, {0}),
                  shape_mismatch_error);
}

TEST_CASE("multilabel objective averages per-attribute binary terms") {
  const auto logits = random_embed({3, 4}, 21);
  const std::vector<std::vector<int>> targets = {
      {1, 0, 1, 0}, {0, 0, 1, 1}, {1, 1, 0, 0}};
  const auto got = finetune::multilabel_bce<double>(logits, targets, false);

  double want = 0;
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 4; ++j) {
      const double z = logits.at(i, j);
      const double y = targets[size_t(i)][size_t(j)];
      const double p = 1.0 / (1.0 + std::exp(-z));
      want += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
  want /= 12.0;
  CHECK(std::abs(got.loss - want) < 1e-12);

  CHECK_THROWS_AS(
      finetune::multilabel_bce<double>(logits, {{1, 0, 2, 0}, {0, 0, 1, 1},
                                                {1, 1, 0, 0}}),
      bad_label_error);
  CHECK_THROWS_AS(
      finetune::multilabel_bce<double>(logits, {{1, 0}, {0, 0, 1, 1},
                                                {1, 1, 0, 0}}),
      shape_mismatch_error);
}

TEST_CASE("layer-wise groups cover the adapted stack and nothing else") {
  rng_stream rng(31);
  finetune::finetune_model<float> m;
  m.init(tiny_tower(), finetune::task_kind::recognition, 4, rng);

  int64_t total = 0;
  m.visit_params([&](const std::string&, nn::param<float>& p) {
    total += p.value.numel();
  });

  finetune::layer_lrs lrs;
  pretrain::sgd<float> full;
  finetune::layerwise_param_groups(m, full, finetune::tune_mode::finetune, lrs);
  REQUIRE(full.groups.size() == 4);
  CHECK(full.groups[0].base_lr == doctest::Approx(0.001));
  CHECK(full.groups[1].base_lr == doctest::Approx(0.005));
  CHECK(full.groups[2].base_lr == doctest::Approx(0.01));
  CHECK(full.groups[3].base_lr == doctest::Approx(0.1));
  // Early stages stay frozen, so the optimizer sees fewer parameters
  // than the model owns, and each group matches its name pattern.
  CHECK(full.optimized_count() < total);
  const std::vector<std::string> pats = {".stage3.", ".stage4.", "projector",
                                         "head"};
  for (size_t g = 0; g < 4; ++g)
    for (const auto& e : full.groups[g].entries)
      CHECK(e.name.find(pats[g]) != std::string::npos);

  pretrain::sgd<float> probe;
  finetune::layerwise_param_groups(m, probe, finetune::tune_mode::linear_probe,
                                   lrs);
  REQUIRE(probe.groups.size() == 1);
  for (const auto& e : probe.groups[0].entries)
    CHECK(e.name.find("head") != std::string::npos);
  CHECK(probe.optimized_count() < full.optimized_count());
}

TEST_CASE("PK batches draw p subjects with q clips each") {
  const std::string root = testsupport::corpus_dir(
      "ft_corpus", testsupport::small_spec(5, 3, 10, 57));
  const auto corpus = data::scan_corpus(root);
  finetune::labeled_sampler sampler;
  sampler.init(corpus);
  CHECK(sampler.num_subjects() == 5);
  CHECK(sampler.subject_class(sampler.subjects()[2]) == 2);
  CHECK_THROWS_AS(sampler.subject_class("nobody"), bad_label_error);

  rng_stream rng(3);
  const auto batch = sampler.recognition_batch(3, 2, 8, rng);
  REQUIRE(batch.clips.shape() == std::vector<int64_t>({6, 1, 8, 64, 44}));
  REQUIRE(batch.labels.size() == 6);
  std::set<int> distinct(batch.labels.begin(), batch.labels.end());
  CHECK(distinct.size() == 3);
  for (size_t i = 0; i < 6; i += 2) CHECK(batch.labels[i] == batch.labels[i + 1]);

  CHECK_THROWS_AS(sampler.recognition_batch(6, 2, 8, rng),
                  degenerate_batch_error);

  const auto hc = sampler.healthcare_batch(4, 6, {"lean"}, rng);
  REQUIRE(hc.clips.shape() == std::vector<int64_t>({4, 1, 6, 64, 44}));
  REQUIRE(hc.attr_labels.size() == 4);
  for (const auto& row : hc.attr_labels) {
    REQUIRE(row.size() == 1);
    CHECK((row[0] == 0 || row[0] == 1));
  }
  CHECK_THROWS_AS(sampler.healthcare_batch(4, 6, {"absent"}, rng),
                  bad_label_error);
  CHECK_THROWS_AS(sampler.healthcare_batch(4, 6, {}, rng), bad_config_error);
}

TEST_CASE("loaded trunk reproduces the teacher embedding bit for bit") {
  pretrain::pretrain_config pc;
  pc.tower = tiny_tower();
  pc.batch_pairs = 4;
  pc.clip_len = 4;
  pc.schedule = {1, 2};
  pc.tau = 0.1;
  pc.total_steps = 10;
  pc.lr.mode = pretrain::lr_schedule::kind::cosine;
  pc.lr.lr0 = 0.05;
  pc.lr.t_max = 10;
  pc.seed = 3;
  pc.diversity_every = 0;

  pretrain::pretrainer tr;
  tr.init(pc);
  data::clip_pair_batch batch;
  batch.teacher_view = random_clips({4, 1, 4, 64, 44}, 61);
  batch.student_view = random_clips({4, 1, 4, 64, 44}, 62);
  tr.step(batch);
  tr.step(batch);
  const auto archive = tr.archive();

  rng_stream rng(63);
  finetune::finetune_model<float> m;
  m.init(tiny_tower(), finetune::task_kind::recognition, 3, rng);
  finetune::load_pretrained_trunk(m, archive);

  const tensorf x = random_clips({2, 1, 4, 64, 44}, 64);
  const auto sched = parts::assign_part_schedule(2, {1}, 64);
  const tensorf from_finetune = m.trunk_forward(x, sched, nullptr, false);

  auto feat = tr.pair.teacher.encoder.forward(x, nullptr, false);
  auto pooled = model::gait_pool<float>::forward(feat, nullptr);
  const tensorf from_teacher =
      tr.pair.teacher.projector.forward(pooled, nullptr, false);
  CHECK(testsupport::bits_equal(from_finetune, from_teacher));

  // Band-scheduled encoding is not a no-op: two bands change the output.
  const auto sched2 = parts::assign_part_schedule(2, {2}, 64);
  const tensorf banded = m.trunk_forward(x, sched2, nullptr, false);
  CHECK_FALSE(testsupport::bits_equal(banded, from_finetune));

  // A trunk with different dimensions must refuse the checkpoint.
  auto other = tiny_tower();
  other.embed_dim = 16;
  finetune::finetune_model<float> wrong;
  wrong.init(other, finetune::task_kind::recognition, 3, rng);
  CHECK_THROWS_AS(finetune::load_pretrained_trunk(wrong, archive),
                  checkpoint_mismatch_error);
}

TEST_CASE("linear probe leaves the pretrained stack untouched") {
  const std::string root = testsupport::corpus_dir(
      "ft_corpus", testsupport::small_spec(5, 3, 10, 57));
  const auto corpus = data::scan_corpus(root);
  finetune::labeled_sampler sampler;
  sampler.init(corpus);

  finetune::finetune_config fc;
  fc.tower = tiny_tower();
  fc.task = finetune::task_kind::healthcare_single;
  fc.mode = finetune::tune_mode::linear_probe;
  fc.batch_b = 4;
  fc.frames_j = 4;
  fc.schedule = {1};
  fc.milestones = {100};
  fc.total_steps = 200;
  fc.seed = 9;

  finetune::finetuner<float> ft;
  ft.init(fc, 2, nullptr);

  std::vector<tensorf> trunk_before, trunk_buf_before;
  const auto snap_params = [&](const std::string&, nn::param<float>& p) {
    trunk_before.push_back(p.value);
  };
  const auto snap_buffers = [&](const std::string&, tensorf& b) {
    trunk_buf_before.push_back(b);
  };
  ft.net.encoder.visit_params("e", snap_params);
  ft.net.projector.visit_params("p", snap_params);
  ft.net.encoder.visit_buffers("e", snap_buffers);
  ft.net.projector.visit_buffers("p", snap_buffers);
  const tensorf head_before = ft.net.hc_head.classifier.w.value;

  rng_stream rng(17);
  for (int i = 0; i < 3; ++i) {
    const auto batch = sampler.healthcare_batch(4, 4, {"lean"}, rng);
    const auto rec = ft.step(batch);
    CHECK(std::isfinite(rec.loss));
  }

  size_t at = 0;
  const auto check_params = [&](const std::string&, nn::param<float>& p) {
    CHECK(testsupport::bits_equal(trunk_before[at++], p.value));
  };
  ft.net.encoder.visit_params("e", check_params);
  ft.net.projector.visit_params("p", check_params);
  size_t bat = 0;
  const auto check_buffers = [&](const std::string&, tensorf& b) {
    CHECK(testsupport::bits_equal(trunk_buf_before[bat++], b));
  };
  ft.net.encoder.visit_buffers("e", check_buffers);
  ft.net.projector.visit_buffers("p", check_buffers);

  CHECK_FALSE(
      testsupport::bits_equal(head_before, ft.net.hc_head.classifier.w.value));
}

TEST_CASE("task training resumes bit-exactly from an archive") {
  const std::string root = testsupport::corpus_dir(
      "ft_corpus", testsupport::small_spec(5, 3, 10, 57));
  const auto corpus = data::scan_corpus(root);
  finetune::labeled_sampler sampler;
  sampler.init(corpus);

  finetune::finetune_config fc;
  fc.tower = tiny_tower();
  fc.task = finetune::task_kind::recognition;
  fc.subjects_p = 2;
  fc.clips_q = 2;
  fc.frames_j = 4;
  fc.schedule = {1, 2};
  fc.milestones = {2, 4};
  fc.total_steps = 6;
  fc.seed = 5;

  rng_stream batch_rng(23);
  const auto b1 = sampler.recognition_batch(2, 2, 4, batch_rng);
  const auto b2 = sampler.recognition_batch(2, 2, 4, batch_rng);

  finetune::finetuner<float> a;
  a.init(fc, sampler.num_subjects(), nullptr);
  a.step(b1);
  const auto ar = a.archive();

  finetune::finetuner<float> b;
  b.init(fc, sampler.num_subjects(), nullptr);
  b.restore(ar);
  CHECK(b.step_count == 1);

  const auto ra = a.step(b2);
  const auto rb = b.step(b2);
  CHECK(ra.loss == rb.loss);
  CHECK(ra.triplet == rb.triplet);
  CHECK(ra.ce == rb.ce);
  CHECK(ra.lr_factor == rb.lr_factor);
  CHECK(testsupport::bits_equal(a.eval_embedding(b1.clips),
                                b.eval_embedding(b1.clips)));

  model::tensor_archive wrong;
  wrong.meta_json = "{\"kind\":\"pretrain\"}";
  CHECK_THROWS_AS(b.restore(wrong), checkpoint_mismatch_error);
}
