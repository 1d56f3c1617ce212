#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "jamlab/tape.hpp"

namespace jamlab {

struct BackboneConfig {
  std::vector<int> widths = {16, 32, 64, 128};  // conv stage output channels
  int in_channels = 3;
  int img_size = 64;
  int num_classes = 6;
  int proj_dim = 128;
  int proj_hidden = 256;

  int feature_dim() const { return widths.back(); }
};

// Sequential prunable CNN: per stage 3x3 conv (same padding) + ReLU + 2x2
// max-pool, then global average pooling, a linear classifier, and a two-layer
// projection head ending in row L2 normalization.
template <class S>
struct ModelState {
  BackboneConfig cfg;
  std::vector<Tensor<S>> conv_w;  // {Cout, Cin, 3, 3}
  std::vector<Tensor<S>> conv_b;  // {Cout}
  Tensor<S> cls_w;                // {F, C}
  Tensor<S> cls_b;                // {C}
  bool has_projection = true;
  Tensor<S> proj_w1, proj_b1;     // {F, hidden}, {hidden}
  Tensor<S> proj_w2, proj_b2;     // {hidden, d}, {d}

  std::vector<Tensor<S>*> params() {
    std::vector<Tensor<S>*> out;
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
      out.push_back(&conv_w[i]);
      out.push_back(&conv_b[i]);
    }
    out.push_back(&cls_w);
    out.push_back(&cls_b);
    if (has_projection) {
      out.push_back(&proj_w1);
      out.push_back(&proj_b1);
      out.push_back(&proj_w2);
      out.push_back(&proj_b2);
    }
    return out;
  }
  std::vector<const Tensor<S>*> params() const {
    auto ps = const_cast<ModelState*>(this)->params();
    return {ps.begin(), ps.end()};
  }

  template <class T>
  ModelState<T> cast() const {
    ModelState<T> out;
    out.cfg = cfg;
    for (const auto& w : conv_w) out.conv_w.push_back(w.template cast<T>());
    for (const auto& b : conv_b) out.conv_b.push_back(b.template cast<T>());
    out.cls_w = cls_w.template cast<T>();
    out.cls_b = cls_b.template cast<T>();
    out.has_projection = has_projection;
    if (has_projection) {
      out.proj_w1 = proj_w1.template cast<T>();
      out.proj_b1 = proj_b1.template cast<T>();
      out.proj_w2 = proj_w2.template cast<T>();
      out.proj_b2 = proj_b2.template cast<T>();
    }
    return out;
  }
};

template <class S>
ModelState<S> build_model(const BackboneConfig& cfg, std::uint64_t seed);

// Parameter vars registered on a tape for one forward/backward step.
template <class S>
struct ModelVars {
  std::vector<typename Tape<S>::Var> conv_w, conv_b;
  typename Tape<S>::Var cls_w{}, cls_b{};
  typename Tape<S>::Var proj_w1{}, proj_b1{}, proj_w2{}, proj_b2{};
  bool has_projection = false;

  std::vector<typename Tape<S>::Var> all() const {
    std::vector<typename Tape<S>::Var> out;
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
      out.push_back(conv_w[i]);
      out.push_back(conv_b[i]);
    }
    out.push_back(cls_w);
    out.push_back(cls_b);
    if (has_projection) {
      out.push_back(proj_w1);
      out.push_back(proj_b1);
      out.push_back(proj_w2);
      out.push_back(proj_b2);
    }
    return out;
  }
};

template <class S>
struct ForwardOut {
  typename Tape<S>::Var h{};       // B x F
  typename Tape<S>::Var logits{};  // B x C
  typename Tape<S>::Var z{};       // B x d (unit rows); valid if projection present
  bool has_z = false;
};

template <class S>
ModelVars<S> register_params(Tape<S>& tape, const ModelState<S>& model,
                             bool trainable = true);

template <class S>
ForwardOut<S> forward(Tape<S>& tape, const ModelVars<S>& vars,
                      const BackboneConfig& cfg, typename Tape<S>::Var x);

// Convenience: full forward of a batch outside any training step.
template <class S>
ForwardOut<S> forward_batch(Tape<S>& tape, const ModelState<S>& model,
                            Tensor<S> x, bool trainable = false);

struct ParamCount {
  std::vector<std::pair<std::string, long>> per_layer;
  long total = 0;
  long conv_total = 0;
};

template <class S>
ParamCount param_count(const ModelState<S>& model);

template <class S>
void save_checkpoint(const ModelState<S>& model, const std::string& path);

template <class S>
ModelState<S> load_checkpoint(const std::string& path);

template <class S>
long checkpoint_byte_size(const ModelState<S>& model);

}  // namespace jamlab
