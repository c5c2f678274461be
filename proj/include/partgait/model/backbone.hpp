#pragma once

#include <array>
#include <memory>
#include <vector>

#include "partgait/nn/batchnorm.hpp"
#include "partgait/nn/conv.hpp"
#include "partgait/nn/ops.hpp"

namespace partgait::model {

// Residual unit with a factorized spatio-temporal pair: a (1,3,3) spatial
// convolution followed by a (3,1,1) temporal convolution under a single
// norm, plus a projected skip when the shape changes.
template <typename T>
struct residual_block {
  nn::conv3d<T> conv1, conv2s, conv2t;
  nn::batchnorm<T> bn1, bn2;
  bool projected = false;
  nn::conv3d<T> proj;
  nn::batchnorm<T> bn_proj;

  struct state {
    typename nn::conv3d<T>::state conv1_s, conv2s_s, conv2t_s, proj_s;
    typename nn::batchnorm<T>::state bn1_s, bn2_s, bn_proj_s;
    typename nn::relu<T>::state relu1_s, relu2_s;
  };

  void init(int in_ch, int out_ch, int stride, rng_stream& rng) {
    conv1.init(in_ch, out_ch, 1, 3, 3, stride, stride, rng);
    bn1.init(out_ch);
    conv2s.init(out_ch, out_ch, 1, 3, 3, 1, 1, rng);
    conv2t.init(out_ch, out_ch, 3, 1, 1, 1, 1, rng);
    bn2.init(out_ch);
    projected = in_ch != out_ch || stride != 1;
    if (projected) {
      proj.init(in_ch, out_ch, 1, 1, 1, stride, stride, rng);
      bn_proj.init(out_ch);
    }
  }

  tensor<T> forward(const tensor<T>& x, state* st, bool training) {
    auto h = conv1.forward(x, st ? &st->conv1_s : nullptr);
    h = bn1.forward(h, st ? &st->bn1_s : nullptr, training);
    h = nn::relu<T>::forward(h, st ? &st->relu1_s : nullptr);
    h = conv2s.forward(h, st ? &st->conv2s_s : nullptr);
    h = conv2t.forward(h, st ? &st->conv2t_s : nullptr);
    h = bn2.forward(h, st ? &st->bn2_s : nullptr, training);

    if (projected) {
      auto skip = proj.forward(x, st ? &st->proj_s : nullptr);
      skip = bn_proj.forward(skip, st ? &st->bn_proj_s : nullptr, training);
      nn::add_inplace(h, skip);
    } else {
      nn::add_inplace(h, x);
    }
    return nn::relu<T>::forward(h, st ? &st->relu2_s : nullptr);
  }

  tensor<T> backward(const tensor<T>& dy, const state& st) {
    auto dsum = nn::relu<T>::backward(dy, st.relu2_s);

    auto dh = bn2.backward(dsum, st.bn2_s);
    dh = conv2t.backward(dh, st.conv2t_s);
    dh = conv2s.backward(dh, st.conv2s_s);
    dh = nn::relu<T>::backward(dh, st.relu1_s);
    dh = bn1.backward(dh, st.bn1_s);
    auto dx = conv1.backward(dh, st.conv1_s);

    if (projected) {
      auto dskip = bn_proj.backward(dsum, st.bn_proj_s);
      dskip = proj.backward(dskip, st.proj_s);
      nn::add_inplace(dx, dskip);
    } else {
      nn::add_inplace(dx, dsum);
    }
    return dx;
  }

  void visit_params(const std::string& p, const nn::param_visitor<T>& fn) {
    conv1.visit_params(p + ".conv1", fn);
    bn1.visit_params(p + ".bn1", fn);
    conv2s.visit_params(p + ".conv2s", fn);
    conv2t.visit_params(p + ".conv2t", fn);
    bn2.visit_params(p + ".bn2", fn);
    if (projected) {
      proj.visit_params(p + ".proj", fn);
      bn_proj.visit_params(p + ".bn_proj", fn);
    }
  }

  void visit_buffers(const std::string& p, const nn::buffer_visitor<T>& fn) {
    bn1.visit_buffers(p + ".bn1", fn);
    bn2.visit_buffers(p + ".bn2", fn);
    if (projected) bn_proj.visit_buffers(p + ".bn_proj", fn);
  }
};

struct backbone_config {
  std::array<int, 4> channels{8, 16, 32, 64};
  std::array<int, 4> depths{1, 1, 1, 1};
};

// Four-stage clip encoder: stage 1 convolves each frame in 2-D, stages
// 2-4 stack residual blocks; spatial resolution halves entering stages 2
// and 3, so a (N,1,S,H,W) clip maps to (N,C4,S,H/4,W/4).
template <typename T>
struct backbone {
  backbone_config cfg;
  std::vector<nn::conv3d<T>> stem_convs;
  std::vector<nn::batchnorm<T>> stem_bns;
  std::vector<residual_block<T>> blocks;  // stages 2..4 concatenated
  std::array<int, 3> stage_sizes{};       // block count per stage 2..4

  struct state {
    std::vector<typename nn::conv3d<T>::state> stem_conv_s;
    std::vector<typename nn::batchnorm<T>::state> stem_bn_s;
    std::vector<typename nn::relu<T>::state> stem_relu_s;
    std::vector<typename residual_block<T>::state> block_s;
  };

  void init(const backbone_config& c, rng_stream& rng) {
    cfg = c;
    stem_convs.clear();
    stem_bns.clear();
    blocks.clear();

    int ch = 1;
    for (int i = 0; i < cfg.depths[0]; ++i) {
      stem_convs.emplace_back();
      stem_convs.back().init(ch, cfg.channels[0], 1, 3, 3, 1, 1, rng);
      stem_bns.emplace_back();
      stem_bns.back().init(cfg.channels[0]);
      ch = cfg.channels[0];
    }
    for (int stage = 1; stage < 4; ++stage) {
      const int stride = stage < 3 ? 2 : 1;
      stage_sizes[stage - 1] = cfg.depths[stage];
      for (int i = 0; i < cfg.depths[stage]; ++i) {
        blocks.emplace_back();
        blocks.back().init(ch, cfg.channels[stage], i == 0 ? stride : 1, rng);
        ch = cfg.channels[stage];
      }
    }
  }

  int out_channels() const { return cfg.channels[3]; }

  tensor<T> forward(const tensor<T>& x, state* st, bool training) {
    if (st != nullptr) {
      st->stem_conv_s.resize(stem_convs.size());
      st->stem_bn_s.resize(stem_convs.size());
      st->stem_relu_s.resize(stem_convs.size());
      st->block_s.resize(blocks.size());
    }
    tensor<T> h = x;
    for (size_t i = 0; i < stem_convs.size(); ++i) {
      h = stem_convs[i].forward(h, st ? &st->stem_conv_s[i] : nullptr);
      h = stem_bns[i].forward(h, st ? &st->stem_bn_s[i] : nullptr, training);
      h = nn::relu<T>::forward(h, st ? &st->stem_relu_s[i] : nullptr);
    }
    for (size_t i = 0; i < blocks.size(); ++i)
      h = blocks[i].forward(h, st ? &st->block_s[i] : nullptr, training);
    return h;
  }

  tensor<T> backward(const tensor<T>& dy, const state& st) {
    tensor<T> d = dy;
    for (size_t i = blocks.size(); i-- > 0;)
      d = blocks[i].backward(d, st.block_s[i]);
    for (size_t i = stem_convs.size(); i-- > 0;) {
      d = nn::relu<T>::backward(d, st.stem_relu_s[i]);
      d = stem_bns[i].backward(d, st.stem_bn_s[i]);
      d = stem_convs[i].backward(d, st.stem_conv_s[i]);
    }
    return d;
  }

  // Parameter names carry the stage prefix ("stage3.block1.conv2s.weight")
  // so fine-tuning can build layer-wise groups by prefix match.
  void visit_params(const std::string& p, const nn::param_visitor<T>& fn) {
    for (size_t i = 0; i < stem_convs.size(); ++i) {
      const std::string base = p + ".stage1.conv" + std::to_string(i);
      stem_convs[i].visit_params(base, fn);
      stem_bns[i].visit_params(p + ".stage1.bn" + std::to_string(i), fn);
    }
    size_t idx = 0;
    for (int stage = 0; stage < 3; ++stage)
      for (int i = 0; i < stage_sizes[stage]; ++i, ++idx)
        blocks[idx].visit_params(p + ".stage" + std::to_string(stage + 2) +
                                     ".block" + std::to_string(i),
                                 fn);
  }

  void visit_buffers(const std::string& p, const nn::buffer_visitor<T>& fn) {
    for (size_t i = 0; i < stem_bns.size(); ++i)
      stem_bns[i].visit_buffers(p + ".stage1.bn" + std::to_string(i), fn);
    size_t idx = 0;
    for (int stage = 0; stage < 3; ++stage)
      for (int i = 0; i < stage_sizes[stage]; ++i, ++idx)
        blocks[idx].visit_buffers(p + ".stage" + std::to_string(stage + 2) +
                                      ".block" + std::to_string(i),
                                  fn);
  }
};

}  // namespace partgait::model
