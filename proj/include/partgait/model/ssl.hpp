#pragma once

#include <cmath>
#include <numbers>

#include "partgait/model/backbone.hpp"
#include "partgait/model/mlp.hpp"
#include "partgait/model/pool.hpp"

namespace partgait::model {

struct tower_config {
  backbone_config bb;
  int proj_hidden = 1024;
  int embed_dim = 256;
};

inline tower_config desk_tower() {
  tower_config c;
  c.bb.channels = {8, 16, 32, 64};
  c.bb.depths = {1, 1, 1, 1};
  c.proj_hidden = 128;
  c.embed_dim = 64;
  return c;
}

// One branch of the contrastive pair: encoder, pooling, per-part
// projector (3 layers) and predictor (2 layers).
template <typename T>
struct ssl_tower {
  tower_config cfg;
  backbone<T> encoder;
  part_mlp<T> projector;
  part_mlp<T> predictor;

  void init(const tower_config& c, rng_stream& rng) {
    cfg = c;
    encoder.init(c.bb, rng);
    projector.init(kNumParts,
                   {c.bb.channels[3], c.proj_hidden, c.proj_hidden,
                    c.embed_dim},
                   rng);
    predictor.init(kNumParts, {c.embed_dim, c.proj_hidden, c.embed_dim}, rng);
  }

  void visit_params(const std::string& p, const nn::param_visitor<T>& fn) {
    encoder.visit_params(p + ".encoder", fn);
    projector.visit_params(p + ".projector", fn);
    predictor.visit_params(p + ".predictor", fn);
  }

  void visit_buffers(const std::string& p, const nn::buffer_visitor<T>& fn) {
    encoder.visit_buffers(p + ".encoder", fn);
    projector.visit_buffers(p + ".projector", fn);
    predictor.visit_buffers(p + ".predictor", fn);
  }

  int64_t param_count() {
    int64_t total = 0;
    visit_params("", [&](const std::string&, nn::param<T>& pr) {
      total += pr.value.numel();
    });
    return total;
  }
};

// EMA momentum schedule: rises from m0 at step 0 to 1.0 at step T along
// a cosine curve.
inline double ema_momentum(int64_t t, int64_t total, double m0 = 0.99) {
  if (t < 0 || t > total)
    throw bad_step_error("ema_momentum: step " + std::to_string(t) +
                         " outside [0, " + std::to_string(total) + "]");
  const double x = std::cos(std::numbers::pi * static_cast<double>(t) /
                            static_cast<double>(total));
  return 1.0 - (1.0 - m0) * (x + 1.0) / 2.0;
}

// Teacher and student with identical architecture; the teacher never
// sees gradients and trails the student by exponential moving average.
template <typename T>
struct teacher_student {
  ssl_tower<T> student, teacher;

  void init(const tower_config& c, rng_stream& rng) {
    student.init(c, rng);
    teacher.init(c, rng);
    copy_student_to_teacher();
  }

  void copy_student_to_teacher() {
    auto s = collect(student);
    auto t = collect(teacher);
    for (size_t i = 0; i < s.params.size(); ++i)
      t.params[i]->value = s.params[i]->value;
    for (size_t i = 0; i < s.buffers.size(); ++i)
      *t.buffers[i] = *s.buffers[i];
  }

  // theta_t <- m * theta_t + (1-m) * theta_s on every parameter tensor.
  void ema_update(T m) {
    auto s = collect(student);
    auto t = collect(teacher);
    for (size_t i = 0; i < s.params.size(); ++i) {
      tensor<T>& tv = t.params[i]->value;
      const tensor<T>& sv = s.params[i]->value;
      if (!tv.same_shape(sv))
        throw shape_mismatch_error("ema_update: branch shapes diverged");
      for (int64_t j = 0; j < tv.numel(); ++j)
        tv[j] = m * tv[j] + (T(1) - m) * sv[j];
    }
  }

  struct tensor_refs {
    std::vector<nn::param<T>*> params;
    std::vector<tensor<T>*> buffers;
  };

  static tensor_refs collect(ssl_tower<T>& tower) {
    tensor_refs r;
    tower.visit_params("", [&](const std::string&, nn::param<T>& p) {
      r.params.push_back(&p);
    });
    tower.visit_buffers("", [&](const std::string&, tensor<T>& b) {
      r.buffers.push_back(&b);
    });
    return r;
  }
};

}  // namespace partgait::model
