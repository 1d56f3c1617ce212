#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "jamlab/model.hpp"

namespace jamlab {

// Frozen deep copy of a trained model; produces soft targets only.
template <class S>
class TeacherSnapshot {
 public:
  explicit TeacherSnapshot(const ModelState<S>& model) : model_(model) {}
  const ModelState<S>& model() const { return model_; }

  // teacher logits for a batch, no gradient state
  Tensor<S> logits(const Tensor<S>& x) const {
    Tape<S> tape;
    auto out = forward_batch(tape, model_, x, false);
    return tape.value(out.logits);
  }

 private:
  const ModelState<S> model_;
};

struct PruneLayerReport {
  std::string layer;
  std::vector<int> retained;      // strictly increasing channel indices
  std::vector<double> l1_scores;  // one per original channel
};

struct PruneReport {
  double ratio_requested = 0.0;
  std::vector<PruneLayerReport> layers;
  long params_before = 0;
  long params_after = 0;
  double ratio_achieved() const {
    return params_before == 0 ? 0.0
                              : 1.0 - static_cast<double>(params_after) / params_before;
  }
};

// L1-magnitude structured channel pruning of every conv stage. Retains the
// top round((1-ratio) * C_out) channels (at least 1) per stage, slices the
// next layer's input channels to match, and shrinks the classifier and
// projection inputs to the retained feature width.
template <class S>
std::pair<ModelState<S>, PruneReport> prune_structured(const ModelState<S>& model,
                                                       double ratio);

// T^2 / |views| * sum over views of mean-batch KL(p_t || p_s).
// teacher/student logits are stacked per view: logits_per_view[v] is B x C.
template <class S>
typename Tape<S>::Var kd_loss(Tape<S>& tape,
                              const std::vector<Tensor<S>>& teacher_logits_per_view,
                              const std::vector<typename Tape<S>::Var>& student_logits_per_view,
                              double T);

template <class S>
struct PostBlend {
  typename Tape<S>::Var l_cls{};
  typename Tape<S>::Var l_total{};
};

// L_cls = (1-kd_alpha) L_CE + kd_alpha L_KD; L_post = (1-lambda) L_cls + lambda L_con
template <class S>
PostBlend<S> post_objective(Tape<S>& tape, typename Tape<S>::Var ce,
                            typename Tape<S>::Var kd, typename Tape<S>::Var con,
                            double kd_alpha, double lambda) {
  if (kd_alpha < 0.0 || kd_alpha > 1.0)
    throw InvalidArgument("post_objective: kd_alpha must be in [0,1]");
  PostBlend<S> r;
  r.l_cls = tape.add(tape.scale(ce, static_cast<S>(1.0 - kd_alpha)),
                     tape.scale(kd, static_cast<S>(kd_alpha)));
  r.l_total = tape.add(tape.scale(r.l_cls, static_cast<S>(1.0 - lambda)),
                       tape.scale(con, static_cast<S>(lambda)));
  return r;
}

// drops the projection head; the logits path is untouched
template <class S>
ModelState<S> strip_for_deployment(const ModelState<S>& model) {
  ModelState<S> out = model;
  out.has_projection = false;
  out.proj_w1 = Tensor<S>();
  out.proj_b1 = Tensor<S>();
  out.proj_w2 = Tensor<S>();
  out.proj_b2 = Tensor<S>();
  return out;
}

void write_prune_report(const PruneReport& report, const std::string& path);

}  // namespace jamlab
