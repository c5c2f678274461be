#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "partgait/data/sampler.hpp"
#include "partgait/pretrain/info_nce.hpp"
#include "partgait/pretrain/schedules.hpp"
#include "partgait/pretrain/sgd.hpp"
#include "partgait/pretrain/trainer.hpp"
#include "test_support.hpp"

using namespace partgait;

namespace {

tensord random_embed(int64_t n, int64_t p, int64_t c, uint64_t seed) {
  rng_stream rng(seed);
  tensord x({n, p, c});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

pretrain::pretrain_config tiny_pretrain_config() {
  pretrain::pretrain_config cfg;
  cfg.tower.bb.channels = {2, 4, 8, 16};
  cfg.tower.bb.depths = {1, 1, 1, 1};
  // Hidden width 32 keeps the chance of a fully-rectified (exactly zero)
  // part row negligible; the zero-norm guard would reject such a batch.
  cfg.tower.proj_hidden = 32;
  cfg.tower.embed_dim = 8;
  cfg.batch_pairs = 4;
  cfg.clip_len = 4;
  cfg.schedule = {1, 2};
  cfg.tau = 0.1;
  cfg.total_steps = 50;
  cfg.lr.mode = pretrain::lr_schedule::kind::cosine;
  cfg.lr.lr0 = 0.05;
  cfg.lr.t_max = 50;
  cfg.seed = 3;
  cfg.diversity_every = 10;
  return cfg;
}

data::corpus_pool tiny_pool() {
  const std::string root =
      testsupport::corpus_dir("pretrain_tiny",
                              testsupport::small_spec(3, 1, 8, 21));
  data::dataset_manifest m;
  m.name = "tiny";
  m.root_path = root;
  m.num_sequences = 3;
  m.downweight_factor = 1.0;
  return data::load_pool({m});
}

}  // namespace

// ---- contrastive loss --------------------------------------------------

TEST_CASE("contrastive loss on a single pair is zero") {
  const tensord q = random_embed(1, 16, 8, 4);
  const auto out = pretrain::info_nce<double>(q, q, 0.5, false);
  CHECK(out.loss == 0.0);
}

TEST_CASE("contrastive loss matches the two-pair closed form") {
  // Orthogonal unit embeddings give similarity matrix [[1,0],[0,1]]; at
  // tau=1 each row's loss is -log(e / (e + 1)).
  tensord q({2, 1, 2});
  q.zero();
  q.at(0, 0, 0) = 1.0;
  q.at(1, 0, 1) = 1.0;
  const auto out = pretrain::info_nce<double>(q, q, 1.0, false);
  CHECK(out.sim.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.sim.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.loss == doctest::Approx(0.3132616875182228).epsilon(1e-12));
}

TEST_CASE("identical queries give the uniform-softmax loss log N") {
  for (int64_t n : {2, 4, 7}) {
    tensord q({n, 2, 3});
    tensord k = random_embed(n, 2, 3, 9 + static_cast<uint64_t>(n));
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < 6; ++j) q[i * 6 + j] = 0.3 + 0.1 * (j % 3);
    const auto out = pretrain::info_nce<double>(q, k, 0.7, false);
    CHECK(std::abs(out.loss - std::log(static_cast<double>(n))) < 1e-12);
  }
}

TEST_CASE("contrastive loss is invariant to positive rescaling") {
  const tensord q = random_embed(5, 4, 6, 10);
  const tensord k = random_embed(5, 4, 6, 11);
  const double base = pretrain::info_nce<double>(q, k, 0.2, false).loss;

  tensord q_scaled = q;
  for (int64_t i = 0; i < q_scaled.numel(); ++i) q_scaled[i] *= 3.7;
  tensord k_scaled = k;
  for (int64_t i = 0; i < k_scaled.numel(); ++i) k_scaled[i] *= 0.04;

  CHECK(std::abs(pretrain::info_nce<double>(q_scaled, k, 0.2, false).loss -
                 base) < 1e-9);
  CHECK(std::abs(pretrain::info_nce<double>(q, k_scaled, 0.2, false).loss -
                 base) < 1e-9);
}

TEST_CASE("loss is bounded by log N when the positive scores highest") {
  // k_i == q_i makes the diagonal the per-row maximum (cosine 1).
  for (uint64_t seed : {1u, 2u, 3u, 4u}) {
    const tensord q = random_embed(6, 3, 5, seed);
    const auto out = pretrain::info_nce<double>(q, q, 0.15, false);
    CHECK(out.loss >= 0.0);
    CHECK(out.loss <= std::log(6.0) + 1e-9);
  }
}

TEST_CASE("contrastive loss input validation") {
  const tensord q = random_embed(3, 2, 4, 1);
  tensord k = random_embed(4, 2, 4, 2);
  CHECK_THROWS_AS(pretrain::info_nce<double>(q, k, 1.0, false),
                  shape_mismatch_error);
  CHECK_THROWS_AS(pretrain::info_nce<double>(q, q, 0.0, false),
                  bad_config_error);
  CHECK_THROWS_AS(pretrain::info_nce<double>(q, q, -1.0, false),
                  bad_config_error);
  tensord qz = q;
  for (int64_t i = 0; i < 4; ++i) qz[i] = 0.0;  // zero out part 0 of sample 0
  CHECK_THROWS_AS(pretrain::info_nce<double>(qz, q, 1.0, false),
                  zero_vector_error);
}

TEST_CASE("contrastive gradient matches finite differences") {
  tensord q = random_embed(4, 2, 3, 30);
  const tensord k = random_embed(4, 2, 3, 31);
  const auto out = pretrain::info_nce<double>(q, k, 0.3, true);
  REQUIRE(out.grad_q.same_shape(q));
  const double eps = 1e-6;
  for (int64_t i = 0; i < q.numel(); ++i) {
    const double keep = q[i];
    q[i] = keep + eps;
    const double up = pretrain::info_nce<double>(q, k, 0.3, false).loss;
    q[i] = keep - eps;
    const double dn = pretrain::info_nce<double>(q, k, 0.3, false).loss;
    q[i] = keep;
    const double fd = (up - dn) / (2 * eps);
    CHECK(std::abs(out.grad_q[i] - fd) <
          1e-6 * std::max(1.0, std::abs(fd)));
  }
}

// ---- learning-rate schedules -------------------------------------------

TEST_CASE("cosine schedule hits its endpoints and midpoint") {
  pretrain::lr_schedule s;
  s.mode = pretrain::lr_schedule::kind::cosine;
  s.lr0 = 0.05;
  s.t_max = 80000;
  s.eta_min = 1e-5;
  CHECK(std::abs(s.at(0) - 0.05) < 1e-12);
  CHECK(std::abs(s.at(80000) - 1e-5) < 1e-12);
  const double mid = 1e-5 + (0.05 - 1e-5) * 0.5;
  CHECK(std::abs(s.at(40000) - mid) < 1e-12);
  CHECK_THROWS_AS(s.at(-1), bad_step_error);
  CHECK_THROWS_AS(s.at(80001), bad_step_error);
}

TEST_CASE("multistep schedule decays at its milestones") {
  pretrain::lr_schedule s;
  s.mode = pretrain::lr_schedule::kind::multistep;
  s.lr0 = 0.05;
  s.milestones = {20000, 30000};
  s.gamma = 0.1;
  CHECK(std::abs(s.at(0) - 0.05) < 1e-12);
  CHECK(std::abs(s.at(19999) - 0.05) < 1e-12);
  CHECK(std::abs(s.at(25000) - 0.005) < 1e-12);
  CHECK(std::abs(s.at(35000) - 0.0005) < 1e-12);
  CHECK(std::abs(s.factor(25000) - 0.1) < 1e-12);
  CHECK_THROWS_AS(s.at(-5), bad_step_error);
}

// ---- optimizer ----------------------------------------------------------

TEST_CASE("one step from rest scales a decay parameter by 1 - lr*wd") {
  nn::param<double> w;
  w.init({1}, true);
  w.value[0] = 1.0;
  w.grad[0] = 0.0;

  pretrain::sgd<double> opt;
  opt.momentum = 0.9;
  opt.weight_decay = 5e-4;
  auto& g = opt.add_group(0.1);
  opt.add_param(g, "w", w);
  opt.step(1.0);
  CHECK(w.value[0] == 1.0 - 0.1 * 5e-4);

  // decay=false parameters at zero gradient do not move at all.
  nn::param<double> b;
  b.init({1}, false);
  b.value[0] = 2.5;
  b.grad[0] = 0.0;
  opt.add_param(g, "b", b);
  opt.step(1.0);
  CHECK(b.value[0] == 2.5);
}

TEST_CASE("momentum accumulates velocity across steps") {
  nn::param<double> w;
  w.init({1}, false);
  w.value[0] = 0.0;
  pretrain::sgd<double> opt;
  opt.momentum = 0.5;
  auto& g = opt.add_group(1.0);
  opt.add_param(g, "w", w);

  w.grad[0] = 1.0;
  opt.step(1.0);  // v = 1, w = -1
  CHECK(w.value[0] == -1.0);
  w.grad[0] = 1.0;
  opt.step(1.0);  // v = 1.5, w = -2.5
  CHECK(w.value[0] == -2.5);
  CHECK(opt.optimized_count() == 1);
}

// ---- trainer dynamics ----------------------------------------------------

TEST_CASE("short pretraining run yields finite records and diversity cadence") {
  auto cfg = tiny_pretrain_config();
  cfg.total_steps = 12;
  cfg.lr.t_max = 12;
  const auto pool = tiny_pool();
  const auto weights = data::dataset_weights(pool.manifests);

  pretrain::pretrainer tr;
  tr.init(cfg);
  std::vector<pretrain::step_record> recs;
  while (tr.step_count < cfg.total_steps)
    recs.push_back(tr.run_step(pool, weights));

  REQUIRE(recs.size() == 12);
  for (const auto& r : recs) {
    CHECK(std::isfinite(r.loss));
    CHECK(r.lr > 0.0);
    CHECK(r.ema_m >= 0.99);
    CHECK(r.ema_m <= 1.0);
    CHECK(r.has_diversity == (r.step % cfg.diversity_every == 0));
  }
  for (size_t i = 0; i < recs.size(); ++i)
    CHECK(recs[i].step == static_cast<int64_t>(i));
}

TEST_CASE("checkpoint resume reproduces the loss trace bit-exactly") {
  const auto cfg = tiny_pretrain_config();
  const auto pool = tiny_pool();
  const auto weights = data::dataset_weights(pool.manifests);

  std::vector<double> full;
  {
    pretrain::pretrainer tr;
    tr.init(cfg);
    while (tr.step_count < cfg.total_steps)
      full.push_back(tr.run_step(pool, weights).loss);
  }
  REQUIRE(full.size() == 50);

  const std::string dir = testsupport::fresh_dir("resume_ckpt");
  std::vector<double> resumed;
  {
    pretrain::pretrainer tr;
    tr.init(cfg);
    while (tr.step_count < 25) resumed.push_back(tr.run_step(pool, weights).loss);
    tr.save_checkpoint(dir + "/mid.ckpt");
  }
  {
    pretrain::pretrainer tr;
    tr.init(cfg);
    tr.load_checkpoint(dir + "/mid.ckpt");
    CHECK(tr.step_count == 25);
    while (tr.step_count < cfg.total_steps)
      resumed.push_back(tr.run_step(pool, weights).loss);
  }
  REQUIRE(resumed.size() == 50);
  for (size_t i = 0; i < 50; ++i) CHECK(resumed[i] == full[i]);
}

TEST_CASE("restoring a checkpoint restores every tensor bit-exactly") {
  const auto cfg = tiny_pretrain_config();
  const auto pool = tiny_pool();
  const auto weights = data::dataset_weights(pool.manifests);

  pretrain::pretrainer a;
  a.init(cfg);
  for (int i = 0; i < 3; ++i) a.run_step(pool, weights);
  const auto archive = a.archive();

  pretrain::pretrainer b;
  b.init(cfg);
  b.restore(archive);
  // Compare a fresh archive of b against a's live tensors.
  bool all_equal = true;
  const auto archive_b = b.archive();
  a.pair.student.visit_params("student", [&](const std::string& name,
                                             nn::param<float>& p) {
    all_equal = all_equal && testsupport::bits_equal(archive_b.get(name),
                                                     p.value);
  });
  a.pair.teacher.visit_params("teacher", [&](const std::string& name,
                                             nn::param<float>& p) {
    all_equal = all_equal && testsupport::bits_equal(archive_b.get(name),
                                                     p.value);
  });
  CHECK(all_equal);
  CHECK(archive_b.meta_json == archive.meta_json);

  // Wrong kind is rejected.
  model::tensor_archive bad;
  bad.meta_json = "{\"kind\":\"finetune\"}";
  CHECK_THROWS_AS(b.restore(bad), checkpoint_mismatch_error);
}

TEST_CASE("zero learning rate and unit momentum freeze the run") {
  auto cfg = tiny_pretrain_config();
  cfg.ema_m0 = 1.0;  // ema factor is exactly 1 at every step
  const auto pool = tiny_pool();
  const auto weights = data::dataset_weights(pool.manifests);

  pretrain::pretrainer tr;
  tr.init(cfg);
  tr.opt.groups.front().base_lr = 0.0f;

  rng_stream batch_rng(777);
  const auto batch = data::build_pretrain_batch(pool, weights, 4, 4,
                                                cfg.policy, batch_rng);

  std::vector<tensorf> before;
  tr.pair.student.visit_params("student", [&](const std::string&,
                                              nn::param<float>& p) {
    before.push_back(p.value);
  });

  const auto r1 = tr.step(batch);
  const auto r2 = tr.step(batch);
  CHECK(r1.loss == r2.loss);

  size_t idx = 0;
  bool unchanged = true;
  tr.pair.student.visit_params("student", [&](const std::string&,
                                              nn::param<float>& p) {
    unchanged = unchanged && testsupport::bits_equal(before[idx++], p.value);
  });
  CHECK(unchanged);

  bool teacher_matches = true;
  idx = 0;
  tr.pair.teacher.visit_params("teacher", [&](const std::string&,
                                              nn::param<float>& p) {
    teacher_matches =
        teacher_matches && testsupport::bits_equal(before[idx++], p.value);
  });
  CHECK(teacher_matches);
}

TEST_CASE("teacher equals the offline momentum recursion of student snapshots") {
  auto cfg = tiny_pretrain_config();
  cfg.total_steps = 5;
  cfg.lr.t_max = 5;
  const auto pool = tiny_pool();
  const auto weights = data::dataset_weights(pool.manifests);

  pretrain::pretrainer tr;
  tr.init(cfg);

  std::vector<std::vector<float>> offline;
  tr.pair.teacher.visit_params("teacher", [&](const std::string&,
                                              nn::param<float>& p) {
    offline.emplace_back(p.value.data(), p.value.data() + p.value.numel());
  });

  for (int64_t t = 0; t < 5; ++t) {
    tr.run_step(pool, weights);
    const float m =
        static_cast<float>(model::ema_momentum(t, cfg.total_steps, cfg.ema_m0));
    size_t idx = 0;
    tr.pair.student.visit_params("student", [&](const std::string&,
                                                nn::param<float>& p) {
      auto& acc = offline[idx++];
      for (int64_t j = 0; j < p.value.numel(); ++j)
        acc[static_cast<size_t>(j)] =
            m * acc[static_cast<size_t>(j)] + (1.0f - m) * p.value[j];
    });
  }

  size_t idx = 0;
  double worst = 0.0;
  tr.pair.teacher.visit_params("teacher", [&](const std::string&,
                                              nn::param<float>& p) {
    const auto& acc = offline[idx++];
    for (int64_t j = 0; j < p.value.numel(); ++j)
      worst = std::max(worst,
                       std::abs(static_cast<double>(acc[static_cast<size_t>(j)]) -
                                p.value[j]));
  });
  CHECK(worst < 1e-6);
}
