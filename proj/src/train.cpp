#include "jamlab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "jamlab/error.hpp"

using nlohmann::json;

namespace jamlab {

namespace {

double cosine_lr(const OptimizerConfig& o, int epoch) {
  if (o.epochs <= 1) return o.lr;
  double t = static_cast<double>(epoch - 1) / (o.epochs - 1);
  return o.lr_end + 0.5 * (o.lr - o.lr_end) * (1.0 + std::cos(3.14159265358979323846 * t));
}

// Stack a list of views into one {N,3,S,S} batch tensor.
Tensor<float> stack_views(const std::vector<SpectrogramImage>& views) {
  const int S = views[0].img_size;
  const long per = static_cast<long>(3) * S * S;
  Tensor<float> t({static_cast<int>(views.size()), 3, S, S});
  for (std::size_t i = 0; i < views.size(); ++i)
    std::copy(views[i].data.begin(), views[i].data.end(), t.data.data() + i * per);
  return t;
}

struct SgdState {
  std::vector<Tensor<float>> velocity;

  void init(const std::vector<Tensor<float>*>& params) {
    velocity.clear();
    for (auto* p : params) velocity.push_back(Tensor<float>::zeros(p->shape));
  }

  void step(const std::vector<Tensor<float>*>& params,
            const std::vector<const Tensor<float>*>& grads, double lr, double momentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (grads[i]->size() == 0) continue;
      velocity[i].data = static_cast<float>(momentum) * velocity[i].data + grads[i]->data;
      params[i]->data -= static_cast<float>(lr) * velocity[i].data;
    }
  }
};

double batch_accuracy(const Tensor<float>& logits, const std::vector<int>& labels) {
  const int B = logits.shape[0], C = logits.shape[1];
  long hit = 0;
  for (int i = 0; i < B; ++i) {
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (logits.data[static_cast<long>(i) * C + c] >
          logits.data[static_cast<long>(i) * C + best])
        best = c;
    if (best == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / B;
}

// Shared training loop; post-pruning mode is enabled by a non-null teacher.
TrainResult train_loop(const std::vector<CorpusItem>& train_items,
                       const std::vector<CorpusItem>& val_items, ModelState<float> model,
                       const TeacherSnapshot<float>* teacher, const ContrastConfig& ccfg,
                       const OptimizerConfig& ocfg, const KdConfig& kcfg,
                       const AugmentParams& aug, ClassMemory<float> memory,
                       const std::string& last_good_path) {
  ccfg.validate();
  if (train_items.empty()) throw InvalidArgument("train: empty training set");
  if (ocfg.batch_size < 2) throw InvalidArgument("train: batch size must be >= 2");
  if (teacher && (kcfg.kd_views != 1 && kcfg.kd_views != 2))
    throw InvalidArgument("train: kd_views must be 1 or 2");

  const auto t_start = std::chrono::steady_clock::now();
  const int C = model.cfg.num_classes;
  const int n_train = static_cast<int>(train_items.size());

  if (memory.num_classes() == 0)
    memory = ClassMemory<float>(C, model.cfg.proj_dim, ccfg.mem_capacity);

  SgdState sgd;
  auto params = model.params();
  sgd.init(params);

  TrainResult result;
  result.metrics.best_val_acc = -1.0;
  long global_step = 0;

  for (int epoch = 1; epoch <= ocfg.epochs; ++epoch) {
    const double lr = cosine_lr(ocfg, epoch);
    const double k1 = k1_schedule(epoch, ccfg.k1_ramp_epochs, ccfg.k1_start, ccfg.k1_end);
    const double alpha =
        alpha_dict_schedule(epoch, ccfg.alpha_dict_ramp_epochs, ccfg.alpha_dict);
    const bool want_contrast = ccfg.lambda > 0.0;
    const bool want_tcl = want_contrast && alpha < 1.0;
    const bool want_dict = want_contrast && alpha > 0.0;

    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(hash_mix(ocfg.seed, 0x65706F63ull + epoch));
    for (int i = n_train - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(shuffle_rng.below(i + 1))]);

    EpochMetrics em;
    em.epoch = epoch;
    em.k1 = k1;
    em.alpha_dict = alpha;
    em.lr = lr;
    int steps = 0;
    double acc_sum = 0.0;

    for (int start = 0; start < n_train; start += ocfg.batch_size) {
      int bsz = std::min(ocfg.batch_size, n_train - start);
      if (bsz < 2) break;  // TCL needs at least two samples

      std::vector<SpectrogramImage> views;
      std::vector<int> labels;
      views.reserve(2 * bsz);
      for (int v = 1; v <= 2; ++v)
        for (int k = 0; k < bsz; ++k) {
          int idx = order[start + k];
          views.push_back(augment_view(train_items[idx].image, aug,
                                       view_seed(ocfg.seed, global_step, idx, v)));
          labels.push_back(train_items[idx].label);
        }

      Tape<float> tape;
      auto vars = register_params(tape, model, true);
      auto x = tape.constant(stack_views(views));
      auto out = forward(tape, vars, model.cfg, x);

      auto ce = ce_label_smoothed(tape, out.logits, labels, ccfg.label_smoothing);

      Tape<float>::Var zero = tape.constant(Tensor<float>::zeros({1}));
      LossResult<float> tcl{zero, false}, dict{zero, false};
      if (want_tcl) {
        tcl = tcl_loss(tape, out.z, labels, ccfg.tau, k1, ccfg.k2);
        if (tcl.empty_anchor_set) ++em.empty_tcl;
      }
      if (want_dict) {
        dict = dictionary_loss(tape, out.z, labels, memory, ccfg.tau_dict,
                               ccfg.mem_positives, ccfg.mem_negatives, ccfg.proto_weight);
        if (dict.empty_anchor_set) ++em.empty_dict;
      }
      auto blend = pre_objective(tape, ce, tcl.var, dict.var, alpha, ccfg.lambda);

      Tape<float>::Var kd = zero;
      Tape<float>::Var total{};
      if (teacher) {
        std::vector<Tensor<float>> teacher_views;
        std::vector<Tape<float>::Var> student_views;
        Tensor<float> tl_all = teacher->logits(stack_views(views));
        std::vector<int> v1(bsz), v2(bsz);
        std::iota(v1.begin(), v1.end(), 0);
        std::iota(v2.begin(), v2.end(), bsz);
        Tensor<float> tl1({bsz, C}), tl2({bsz, C});
        for (int i = 0; i < bsz; ++i) {
          tl1.mat().row(i) = tl_all.mat().row(i);
          tl2.mat().row(i) = tl_all.mat().row(bsz + i);
        }
        teacher_views.push_back(std::move(tl1));
        student_views.push_back(tape.gather_rows(out.logits, v1));
        if (kcfg.kd_views == 2) {
          teacher_views.push_back(std::move(tl2));
          student_views.push_back(tape.gather_rows(out.logits, v2));
        }
        kd = kd_loss(tape, teacher_views, student_views, kcfg.kd_T);
        auto post = post_objective(tape, ce, kd, blend.l_con, kcfg.kd_alpha, ccfg.lambda);
        total = post.l_total;
      } else {
        total = blend.l_total;
      }

      float loss_val = tape.value(total).data[0];
      if (!std::isfinite(loss_val)) {
        if (!last_good_path.empty()) save_checkpoint(model, last_good_path);
        throw NumericError("training loss is non-finite at epoch " +
                           std::to_string(epoch) + "; last-good checkpoint: " +
                           (last_good_path.empty() ? "<none>" : last_good_path));
      }

      tape.backward(total);
      std::vector<const Tensor<float>*> grads;
      for (auto v : vars.all()) grads.push_back(&tape.grad(v));
      sgd.step(params, grads, lr, ocfg.momentum);

      // memory update runs after the backward pass with detached embeddings
      memory.update(tape.value(out.z), labels, ccfg.momentum);

      em.l_ce += tape.value(ce).data[0];
      em.l_tcl += tape.value(tcl.var).data[0];
      em.l_dict += tape.value(dict.var).data[0];
      em.l_con += tape.value(blend.l_con).data[0];
      em.l_kd += tape.value(kd).data[0];
      em.l_total += loss_val;
      acc_sum += batch_accuracy(tape.value(out.logits), labels);
      ++steps;
      ++global_step;
    }

    if (steps > 0) {
      em.l_ce /= steps;
      em.l_tcl /= steps;
      em.l_dict /= steps;
      em.l_con /= steps;
      em.l_kd /= steps;
      em.l_total /= steps;
      em.train_acc = acc_sum / steps;
    }

    if (!val_items.empty())
      em.val_acc = evaluate(model, val_items, C).accuracy;

    result.metrics.epochs.push_back(em);
    if (em.val_acc >= result.metrics.best_val_acc || val_items.empty()) {
      result.metrics.best_val_acc = em.val_acc;
      result.metrics.best_epoch = epoch;
      result.best_model = model;
    }
  }

  if (result.metrics.epochs.empty()) result.best_model = model;
  result.memory = std::move(memory);
  result.metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace

TrainResult train_pre(const std::vector<CorpusItem>& train_items,
                      const std::vector<CorpusItem>& val_items, ModelState<float> model,
                      const ContrastConfig& ccfg, const OptimizerConfig& ocfg,
                      const AugmentParams& aug, const std::string& last_good_path) {
  return train_loop(train_items, val_items, std::move(model), nullptr, ccfg, ocfg,
                    KdConfig{}, aug, ClassMemory<float>(), last_good_path);
}

TrainResult train_post(const std::vector<CorpusItem>& train_items,
                       const std::vector<CorpusItem>& val_items, ModelState<float> student,
                       const TeacherSnapshot<float>& teacher, const ContrastConfig& ccfg,
                       const OptimizerConfig& ocfg, const KdConfig& kcfg,
                       const AugmentParams& aug, ClassMemory<float> memory,
                       const std::string& last_good_path) {
  if (teacher.model().cfg.img_size != student.cfg.img_size ||
      teacher.model().cfg.num_classes != student.cfg.num_classes)
    throw InvalidArgument("train_post: teacher and student geometry differ");
  if (!ccfg.carry_memory_over_pruning) memory.clear();
  return train_loop(train_items, val_items, std::move(student), &teacher, ccfg, ocfg,
                    kcfg, aug, std::move(memory), last_good_path);
}

EvalResult evaluate(const ModelState<float>& model, const std::vector<CorpusItem>& items,
                    int num_classes) {
  if (items.empty()) throw InvalidArgument("evaluate: empty split");
  EvalResult r;
  r.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  const int chunk = 64;
  long hit = 0;
  for (std::size_t start = 0; start < items.size(); start += chunk) {
    const std::size_t end = std::min(items.size(), start + chunk);
    std::vector<SpectrogramImage> views;
    for (std::size_t i = start; i < end; ++i) views.push_back(items[i].image);
    Tape<float> tape;
    auto out = forward_batch(tape, model, stack_views(views), false);
    const auto& logits = tape.value(out.logits);
    for (std::size_t i = start; i < end; ++i) {
      const long row = static_cast<long>(i - start) * num_classes;
      int best = 0;
      for (int c = 1; c < num_classes; ++c)
        if (logits.data[row + c] > logits.data[row + best]) best = c;
      r.confusion[items[i].label][best] += 1;
      if (best == items[i].label) ++hit;
    }
  }
  r.accuracy = static_cast<double>(hit) / items.size();
  return r;
}

BenchReport bench(const ModelState<float>& model, int repetitions) {
  BenchReport rep;
  rep.param_total = param_count(model).total;
  rep.checkpoint_bytes = checkpoint_byte_size(model);
  rep.repetitions = repetitions;

  const int S = model.cfg.img_size;
  Tensor<float> x({1, 3, S, S});
  Rng rng(0xBE7Cull);
  for (long i = 0; i < x.size(); ++i) x.data[i] = static_cast<float>(rng.uniform());

  // warmup
  for (int i = 0; i < 10; ++i) {
    Tape<float> tape;
    forward_batch(tape, model, x, false);
  }
  std::vector<double> lat(repetitions);
  for (int i = 0; i < repetitions; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Tape<float> tape;
    forward_batch(tape, model, x, false);
    lat[i] = std::chrono::duration<double, std::milli>(
                 std::chrono::steady_clock::now() - t0).count();
  }
  std::sort(lat.begin(), lat.end());
  rep.median_latency_ms = lat[repetitions / 2];
  return rep;
}

void write_metrics_csv(const RunMetrics& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "epoch,l_ce,l_tcl,l_dict,l_con,l_kd,l_total,train_acc,val_acc,"
       "empty_tcl,empty_dict,k1,alpha_dict,lr\n";
  f.precision(10);
  for (const auto& e : m.epochs)
    f << e.epoch << ',' << e.l_ce << ',' << e.l_tcl << ',' << e.l_dict << ',' << e.l_con
      << ',' << e.l_kd << ',' << e.l_total << ',' << e.train_acc << ',' << e.val_acc
      << ',' << e.empty_tcl << ',' << e.empty_dict << ',' << e.k1 << ',' << e.alpha_dict
      << ',' << e.lr << '\n';
}

void write_confusion_csv(const std::vector<std::vector<long>>& cm, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  for (const auto& row : cm) {
    for (std::size_t c = 0; c < row.size(); ++c) f << (c ? "," : "") << row[c];
    f << '\n';
  }
}

void write_summary_json(const RunMetrics& m, const std::string& path) {
  json j;
  j["test_acc"] = m.test_acc;
  j["best_epoch"] = m.best_epoch;
  j["best_val_acc"] = m.best_val_acc;
  j["wall_seconds"] = m.wall_seconds;
  j["epochs"] = m.epochs.size();
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << "\n";
}

}  // namespace jamlab
