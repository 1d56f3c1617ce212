#include "jamlab/compress.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "jamlab/error.hpp"

using nlohmann::json;

namespace jamlab {

template <class S>
std::pair<ModelState<S>, PruneReport> prune_structured(const ModelState<S>& model,
                                                       double ratio) {
  if (ratio < 0.0 || ratio >= 1.0)
    throw InvalidArgument("prune_structured: ratio must be in [0,1)");

  PruneReport report;
  report.ratio_requested = ratio;
  report.params_before = param_count(model).total;

  ModelState<S> pruned;
  pruned.cfg = model.cfg;
  pruned.has_projection = model.has_projection;

  std::vector<int> prev_retained;  // retained input channels for the next layer
  int prev_cin = model.cfg.in_channels;
  for (int c = 0; c < prev_cin; ++c) prev_retained.push_back(c);

  std::vector<int> new_widths;
  for (std::size_t stage = 0; stage < model.conv_w.size(); ++stage) {
    const Tensor<S>& W = model.conv_w[stage];
    const Tensor<S>& B = model.conv_b[stage];
    const int cout = W.shape[0], cin = W.shape[1], k = W.shape[2];

    // score = L1 norm of the filter weights plus bias magnitude
    std::vector<double> scores(cout);
    for (int co = 0; co < cout; ++co) {
      double s = 0.0;
      const long base = static_cast<long>(co) * cin * k * k;
      for (long i = 0; i < static_cast<long>(cin) * k * k; ++i)
        s += std::abs(static_cast<double>(W.data[base + i]));
      s += std::abs(static_cast<double>(B.data[co]));
      scores[co] = s;
    }

    int keep = static_cast<int>(std::llround((1.0 - ratio) * cout));
    keep = std::max(keep, 1);
    std::vector<int> order(cout);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    std::vector<int> retained(order.begin(), order.begin() + keep);
    std::sort(retained.begin(), retained.end());

    const int new_cin = static_cast<int>(prev_retained.size());
    Tensor<S> nw({keep, new_cin, k, k});
    Tensor<S> nb({keep});
    for (int co = 0; co < keep; ++co) {
      const int src_co = retained[co];
      nb.data[co] = B.data[src_co];
      for (int ci = 0; ci < new_cin; ++ci) {
        const int src_ci = prev_retained[ci];
        for (int kk = 0; kk < k * k; ++kk)
          nw.data[((static_cast<long>(co) * new_cin + ci) * k * k) + kk] =
              W.data[((static_cast<long>(src_co) * cin + src_ci) * k * k) + kk];
      }
    }
    pruned.conv_w.push_back(std::move(nw));
    pruned.conv_b.push_back(std::move(nb));
    new_widths.push_back(keep);

    PruneLayerReport lr;
    lr.layer = "conv" + std::to_string(stage + 1);
    lr.retained = retained;
    lr.l1_scores = scores;
    report.layers.push_back(std::move(lr));

    prev_retained = retained;
  }
  pruned.cfg.widths = new_widths;

  // classifier and projection inputs shrink to the retained feature width
  const auto& feat_retained = prev_retained;
  const int newF = static_cast<int>(feat_retained.size());
  const int C = model.cfg.num_classes;
  pruned.cls_w = Tensor<S>({newF, C});
  for (int f = 0; f < newF; ++f)
    pruned.cls_w.mat().row(f) = model.cls_w.mat().row(feat_retained[f]);
  pruned.cls_b = model.cls_b;

  if (model.has_projection) {
    const int hidden = model.cfg.proj_hidden;
    pruned.proj_w1 = Tensor<S>({newF, hidden});
    for (int f = 0; f < newF; ++f)
      pruned.proj_w1.mat().row(f) = model.proj_w1.mat().row(feat_retained[f]);
    pruned.proj_b1 = model.proj_b1;
    pruned.proj_w2 = model.proj_w2;
    pruned.proj_b2 = model.proj_b2;
  }

  report.params_after = param_count(pruned).total;
  return {std::move(pruned), std::move(report)};
}

template <class S>
typename Tape<S>::Var kd_loss(Tape<S>& tape,
                              const std::vector<Tensor<S>>& teacher_logits_per_view,
                              const std::vector<typename Tape<S>::Var>& student_logits_per_view,
                              double T) {
  if (T <= 0.0) throw InvalidArgument("kd_loss: temperature must be > 0");
  if (teacher_logits_per_view.empty() ||
      teacher_logits_per_view.size() != student_logits_per_view.size())
    throw InvalidArgument("kd_loss: view count mismatch");

  const int views = static_cast<int>(teacher_logits_per_view.size());
  typename Tape<S>::Var acc{};
  bool first = true;
  double const_part = 0.0;  // sum of teacher entropies (constant w.r.t. student)
  long total_rows = 0;

  for (int v = 0; v < views; ++v) {
    const Tensor<S>& tl = teacher_logits_per_view[v];
    const auto& sl = tape.value(student_logits_per_view[v]);
    if (!tl.same_shape(sl)) throw ShapeError("kd_loss: logits shape mismatch");
    const int B = tl.shape[0], C = tl.shape[1];

    // teacher probabilities at temperature T (constants)
    Tensor<S> pt({B, C});
    for (int i = 0; i < B; ++i) {
      double mx = -1e300;
      for (int c = 0; c < C; ++c)
        mx = std::max(mx, static_cast<double>(tl.data[static_cast<long>(i) * C + c]) / T);
      double sum = 0.0;
      for (int c = 0; c < C; ++c)
        sum += std::exp(static_cast<double>(tl.data[static_cast<long>(i) * C + c]) / T - mx);
      for (int c = 0; c < C; ++c) {
        double lp = static_cast<double>(tl.data[static_cast<long>(i) * C + c]) / T - mx -
                    std::log(sum);
        double p = std::exp(lp);
        pt.data[static_cast<long>(i) * C + c] = static_cast<S>(p);
        const_part += p * lp;  // sum p_t log p_t
      }
    }
    total_rows += B;

    auto logp_s = tape.log_softmax_rows(
        tape.scale(student_logits_per_view[v], static_cast<S>(1.0 / T)));
    auto cross = tape.sum(tape.cmul(logp_s, pt));  // sum p_t log p_s
    acc = first ? cross : tape.add(acc, cross);
    first = false;
  }

  const int B = static_cast<int>(total_rows) / views;
  const double factor = T * T / (static_cast<double>(views) * B);
  // L_KD = factor * (sum p_t log p_t - sum p_t log p_s)
  auto scaled = tape.scale(acc, static_cast<S>(-factor));
  return tape.add_scalar(scaled, static_cast<S>(factor * const_part));
}

void write_prune_report(const PruneReport& report, const std::string& path) {
  json j;
  j["ratio_requested"] = report.ratio_requested;
  j["ratio_achieved"] = report.ratio_achieved();
  j["params_before"] = report.params_before;
  j["params_after"] = report.params_after;
  json layers = json::array();
  for (const auto& lr : report.layers)
    layers.push_back({{"layer", lr.layer},
                      {"retained", lr.retained},
                      {"l1_scores", lr.l1_scores}});
  j["layers"] = std::move(layers);
  std::ofstream f(path);
  if (!f) throw IoError("cannot write prune report: " + path);
  f << j.dump(2) << "\n";
}

template std::pair<ModelState<float>, PruneReport> prune_structured<float>(
    const ModelState<float>&, double);
template std::pair<ModelState<double>, PruneReport> prune_structured<double>(
    const ModelState<double>&, double);
template Tape<float>::Var kd_loss<float>(Tape<float>&, const std::vector<Tensor<float>>&,
                                         const std::vector<Tape<float>::Var>&, double);
template Tape<double>::Var kd_loss<double>(Tape<double>&, const std::vector<Tensor<double>>&,
                                           const std::vector<Tape<double>::Var>&, double);

}  // namespace jamlab
