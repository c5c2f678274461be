#pragma once

#include "partgait/model/mlp.hpp"
#include "partgait/nn/batchnorm.hpp"

namespace partgait::model {

// Recognition head: per-part linear embedding, then a BNNeck — batch
// normalization followed by a bias-free per-part classifier whose logits
// are averaged over parts. The pre-norm embedding feeds the triplet
// loss; the post-norm embedding is the retrieval feature.
template <typename T>
struct recognition_head {
  part_linear<T> fc;
  nn::batchnorm<T> neck;
  part_linear<T> classifier;
  int num_classes = 0;

  struct output {
    tensor<T> a;       // (N,P,E) pre-norm embedding
    tensor<T> a_bn;    // (N,P,E) retrieval embedding
    tensor<T> logits;  // (N,num_classes), part-averaged
  };

  struct state {
    typename part_linear<T>::state fc_s, cls_s;
    typename nn::batchnorm<T>::state neck_s;
    int64_t n = 0;
  };

  void init(int parts, int in_dim, int embed_dim, int classes,
            rng_stream& rng) {
    num_classes = classes;
    fc.init(parts, in_dim, embed_dim, /*bias=*/true, rng);
    neck.init(parts * embed_dim);
    classifier.init(parts, embed_dim, classes, /*bias=*/false, rng);
  }

  output forward(const tensor<T>& k, state* st, bool training) {
    output out;
    out.a = fc.forward(k, st ? &st->fc_s : nullptr);
    out.a_bn = neck.forward(out.a, st ? &st->neck_s : nullptr, training);
    const tensor<T> part_logits =
        classifier.forward(out.a_bn, st ? &st->cls_s : nullptr);
    const int64_t n = part_logits.dim(0), p = part_logits.dim(1);
    out.logits = tensor<T>({n, num_classes});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < p; ++j)
        for (int c = 0; c < num_classes; ++c)
          out.logits.at(i, c) += part_logits.at(i, j, c) / static_cast<T>(p);
    if (st != nullptr) st->n = n;
    return out;
  }

  // da: gradient on the pre-norm embedding a; dlogits: gradient on the
  // part-averaged logits. Either may be empty.
  tensor<T> backward(const tensor<T>& da, const tensor<T>& dlogits,
                     const state& st) {
    const int64_t n = st.n, p = fc.parts;
    tensor<T> da_total = da.empty() ? tensor<T>({n, p, fc.out_dim}) : da;
    if (!dlogits.empty()) {
      tensor<T> dpart({n, p, num_classes});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < p; ++j)
          for (int c = 0; c < num_classes; ++c)
            dpart.at(i, j, c) = dlogits.at(i, c) / static_cast<T>(p);
      tensor<T> da_bn = classifier.backward(dpart, st.cls_s);
      nn::add_inplace(da_total, neck.backward(da_bn, st.neck_s));
    }
    return fc.backward(da_total, st.fc_s);
  }

  void visit_params(const std::string& pre, const nn::param_visitor<T>& fn) {
    fc.visit_params(pre + ".fc", fn);
    neck.visit_params(pre + ".neck", fn);
    classifier.visit_params(pre + ".classifier", fn);
  }

  void visit_buffers(const std::string& pre, const nn::buffer_visitor<T>& fn) {
    neck.visit_buffers(pre + ".neck", fn);
  }
};

// Healthcare head: BNNeck only — normalization straight on the projector
// output and a bias-free per-part classifier, logits averaged over parts.
template <typename T>
struct healthcare_head {
  nn::batchnorm<T> neck;
  part_linear<T> classifier;
  int num_classes = 0;

  struct state {
    typename nn::batchnorm<T>::state neck_s;
    typename part_linear<T>::state cls_s;
    int64_t n = 0;
  };

  void init(int parts, int in_dim, int classes, rng_stream& rng) {
    num_classes = classes;
    neck.init(parts * in_dim);
    classifier.init(parts, in_dim, classes, /*bias=*/false, rng);
  }

  tensor<T> forward(const tensor<T>& k, state* st, bool training) {
    tensor<T> h = neck.forward(k, st ? &st->neck_s : nullptr, training);
    tensor<T> part_logits = classifier.forward(h, st ? &st->cls_s : nullptr);
    const int64_t n = part_logits.dim(0), p = part_logits.dim(1);
    tensor<T> logits({n, num_classes});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < p; ++j)
        for (int c = 0; c < num_classes; ++c)
          logits.at(i, c) += part_logits.at(i, j, c) / static_cast<T>(p);
    if (st != nullptr) st->n = n;
    return logits;
  }

  tensor<T> backward(const tensor<T>& dlogits, const state& st) {
    const int64_t n = st.n, p = classifier.parts;
    tensor<T> dpart({n, p, num_classes});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < p; ++j)
        for (int c = 0; c < num_classes; ++c)
          dpart.at(i, j, c) = dlogits.at(i, c) / static_cast<T>(p);
    tensor<T> dh = classifier.backward(dpart, st.cls_s);
    return neck.backward(dh, st.neck_s);
  }

  void visit_params(const std::string& pre, const nn::param_visitor<T>& fn) {
    neck.visit_params(pre + ".neck", fn);
    classifier.visit_params(pre + ".classifier", fn);
  }

  void visit_buffers(const std::string& pre, const nn::buffer_visitor<T>& fn) {
    neck.visit_buffers(pre + ".neck", fn);
  }
};

}  // namespace partgait::model
