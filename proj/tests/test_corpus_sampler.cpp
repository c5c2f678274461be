#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "partgait/data/sampler.hpp"
#include "test_support.hpp"

using namespace partgait;

namespace {

data::dataset_manifest mf(const std::string& name, int64_t n, double dw = 1.0) {
  data::dataset_manifest m;
  m.name = name;
  m.root_path = "/none/" + name;
  m.num_sequences = n;
  m.downweight_factor = dw;
  return m;
}

}  // namespace

TEST_CASE("mixing weights match hand-computed softmax for the full roster") {
  // Twelve corpora at published scale, web-crawled corpus downweighted 10x.
  const std::vector<data::dataset_manifest> roster = {
      mf("CASIA-B", 8107),    mf("CCPG", 8187),
      mf("CASIA-E", 152697),  mf("OUMVLP", 133531),
      mf("SUSTech1K", 6011),  mf("CCGR", 908322),
      mf("Gait3D", 18940),    mf("GREW", 102887),
      mf("D-Gait", 18081),    mf("RA-GAR", 57155),
      mf("Scoliosis1K", 745), mf("GaitLU-1M", 943884, 10.0)};
  const std::array<double, 12> expected = {
      0.044374447515188382, 0.044519932585419517, 0.11806551598222613,
      0.11290337776328176,  0.040163215659204297, 0.21392400086117203,
      0.058880690284881562, 0.10350620903243875,  0.057976729996082089,
      0.085087215388980744, 0.020024652680046669, 0.10057401225107802};

  const auto w = data::dataset_weights(roster);
  REQUIRE(w.size() == 12);
  for (std::size_t i = 0; i < 12; ++i)
    CHECK(std::abs(w[i] - expected[i]) < 1e-9);
}

TEST_CASE("mixing weight edge cases and invariances") {
  CHECK(data::dataset_weights({mf("only", 12345)}) ==
        std::vector<double>{1.0});

  const auto pair = data::dataset_weights({mf("a", 500), mf("b", 500)});
  CHECK(pair[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pair[1] == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<data::dataset_manifest> ms = {mf("a", 100), mf("b", 64000),
                                            mf("c", 9), mf("d", 3125)};
  const auto w = data::dataset_weights(ms);
  double total = 0;
  for (double v : w) {
    CHECK(v > 0.0);
    total += v;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Larger corpus, larger share.
  CHECK(w[1] > w[3]);
  CHECK(w[3] > w[0]);
  CHECK(w[0] > w[2]);

  std::vector<data::dataset_manifest> rev(ms.rbegin(), ms.rend());
  const auto wr = data::dataset_weights(rev);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(wr[i] - w[3 - i]) < 1e-15);

  // Scaling every corpus by the same factor shifts all logits equally.
  std::vector<data::dataset_manifest> scaled = ms;
  for (auto& m : scaled) m.num_sequences *= 7;
  const auto ws = data::dataset_weights(scaled);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(ws[i] - w[i]) < 1e-12);

  // Downweighting by k is the same as having 1/k the sequences.
  const auto wa = data::dataset_weights({mf("x", 100, 10.0), mf("y", 2000)});
  const auto wb = data::dataset_weights({mf("x", 10), mf("y", 2000)});
  CHECK(wa[0] == wb[0]);
  CHECK(wa[1] == wb[1]);

  CHECK_THROWS_AS(data::dataset_weights({}), empty_manifest_error);
}

TEST_CASE("clip pair windows are disjoint before cyclic wrap") {
  rng_stream rng(11);

  // seq_len = 2*clip_len leaves exactly one placement: the two halves.
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = data::sample_clip_pair(32, 16, rng);
    REQUIRE(s.frames_a.size() == 16);
    REQUIRE(s.frames_b.size() == 16);
    std::set<int64_t> all(s.frames_a.begin(), s.frames_a.end());
    all.insert(s.frames_b.begin(), s.frames_b.end());
    CHECK(all.size() == 32);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == 31);
    const auto lo = std::min(s.start_a, s.start_b);
    const auto hi = std::max(s.start_a, s.start_b);
    CHECK(lo == 0);
    CHECK(hi == 16);
  }

  // A sequence shorter than two clips is doubled cyclically, so both
  // windows read the full sequence in order.
  const auto d = data::sample_clip_pair(16, 16, rng);
  for (int64_t i = 0; i < 16; ++i) {
    CHECK(d.frames_a[static_cast<size_t>(i)] == i);
    CHECK(d.frames_b[static_cast<size_t>(i)] == i);
  }

  // Separation in the extended index space is always at least clip_len.
  for (int trial = 0; trial < 10000; ++trial) {
    const auto s = data::sample_clip_pair(48, 16, rng);
    CHECK(std::abs(s.start_a - s.start_b) >= 16);
    for (int64_t f : s.frames_a) {
      CHECK(f >= 0);
      CHECK(f < 48);
    }
  }
}

TEST_CASE("categorical draws follow the weights and use one variate") {
  const std::vector<double> w = {0.2, 0.3, 0.5};
  rng_stream rng(99);
  std::array<int64_t, 3> counts = {0, 0, 0};
  const int64_t n = 100000;
  for (int64_t i = 0; i < n; ++i) counts[data::sample_categorical(w, rng)]++;
  for (std::size_t k = 0; k < 3; ++k) {
    const double mean = static_cast<double>(n) * w[k];
    const double sigma = std::sqrt(static_cast<double>(n) * w[k] * (1 - w[k]));
    CHECK(std::abs(static_cast<double>(counts[k]) - mean) <= 3.0 * sigma);
  }

  rng_stream r1(1234), r2(1234);
  data::sample_categorical(w, r1);
  r2.uniform();
  CHECK(r1.uniform() == r2.uniform());
  CHECK(r1.next_u64() == r2.next_u64());
}

TEST_CASE("manifest files round-trip and reject malformed rows") {
  const std::string dir = testsupport::fresh_dir("manifests");
  const std::string path = dir + "/manifest.tsv";

  const std::vector<data::dataset_manifest> in = {mf("alpha", 42, 2.5),
                                                  mf("beta", 7)};
  data::write_manifest_file(path, in);
  const auto out = data::read_manifest_file(path);
  REQUIRE(out.size() == 2);
  CHECK(out[0].name == "alpha");
  CHECK(out[0].root_path == "/none/alpha");
  CHECK(out[0].num_sequences == 42);
  CHECK(out[0].downweight_factor == 2.5);
  CHECK(out[1].name == "beta");
  CHECK(out[1].downweight_factor == 1.0);

  auto write_text = [&](const std::string& body) {
    std::ofstream os(path);
    os << body;
  };

  // Comments and blank lines are skipped; a missing fourth field means
  // no downweighting.
  write_text("# roster\n\nname\t/tmp/x\t10\n");
  const auto lax = data::read_manifest_file(path);
  REQUIRE(lax.size() == 1);
  CHECK(lax[0].downweight_factor == 1.0);

  write_text("name\t/tmp/x\n");
  CHECK_THROWS_AS(data::read_manifest_file(path), bad_config_error);
  write_text("name\t/tmp/x\tlots\n");
  CHECK_THROWS_AS(data::read_manifest_file(path), bad_config_error);
  write_text("name\t/tmp/x\t10\t-1\n");
  CHECK_THROWS_AS(data::read_manifest_file(path), bad_config_error);
  write_text("name\t/tmp/x\t0\n");
  CHECK_THROWS_AS(data::read_manifest_file(path), bad_config_error);

  CHECK_THROWS_AS(data::read_manifest_file(dir + "/absent.tsv"), io_error);
}

TEST_CASE("pretrain batches are deterministic and well-shaped") {
  const std::string root = testsupport::corpus_dir(
      "sampler_corpus", testsupport::small_spec(4, 2, 20, 9));
  auto m = mf("walkers", 8);
  m.root_path = root;
  const data::corpus_pool pool = data::load_pool({m});
  REQUIRE(pool.corpora.size() == 1);
  REQUIRE(pool.corpora[0].sequences.size() == 8);

  const auto weights = data::dataset_weights(pool.manifests);
  data::augmentation_policy policy;  // identity
  rng_stream r1(7), r2(7), r3(8);

  const auto a = data::build_pretrain_batch(pool, weights, 6, 8, policy, r1);
  const auto b = data::build_pretrain_batch(pool, weights, 6, 8, policy, r2);
  const auto c = data::build_pretrain_batch(pool, weights, 6, 8, policy, r3);

  REQUIRE(a.teacher_view.shape() == std::vector<int64_t>({6, 1, 8, 64, 44}));
  REQUIRE(a.student_view.shape() == std::vector<int64_t>({6, 1, 8, 64, 44}));
  REQUIRE(a.dataset_names.size() == 6);
  REQUIRE(a.sequence_ids.size() == 6);
  for (const auto& name : a.dataset_names) CHECK(name == "walkers");
  for (const auto& id : a.sequence_ids)
    CHECK(id.rfind("subject", 0) == 0);

  CHECK(testsupport::bits_equal(a.teacher_view, b.teacher_view));
  CHECK(testsupport::bits_equal(a.student_view, b.student_view));
  CHECK(a.sequence_ids == b.sequence_ids);

  bool same = testsupport::bits_equal(a.teacher_view, c.teacher_view) &&
              a.sequence_ids == c.sequence_ids;
  CHECK_FALSE(same);

  CHECK_THROWS_AS(
      data::build_pretrain_batch(pool, {0.5, 0.5}, 6, 8, policy, r1),
      bad_config_error);
  CHECK_THROWS_AS(
      data::build_pretrain_batch(data::corpus_pool{}, weights, 6, 8, policy, r1),
      empty_manifest_error);
}
