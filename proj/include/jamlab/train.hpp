#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jamlab/augment.hpp"
#include "jamlab/compress.hpp"
#include "jamlab/contrast.hpp"
#include "jamlab/corpus.hpp"
#include "jamlab/model.hpp"

namespace jamlab {

struct OptimizerConfig {
  double lr = 0.01;
  double lr_end = 0.001;  // cosine decay target
  double momentum = 0.9;
  int epochs = 20;
  int batch_size = 32;  // samples per step (views = 2x)
  std::uint64_t seed = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double l_ce = 0, l_tcl = 0, l_dict = 0, l_con = 0, l_kd = 0, l_total = 0;
  double train_acc = 0, val_acc = 0;
  long empty_tcl = 0, empty_dict = 0;
  double k1 = 0, alpha_dict = 0, lr = 0;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;
  double test_acc = 0.0;
  std::vector<std::vector<long>> confusion;  // row = true class, col = predicted
  double wall_seconds = 0.0;
  int best_epoch = 0;
  double best_val_acc = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::vector<long>> confusion;
};

struct TrainResult {
  ModelState<float> best_model;
  RunMetrics metrics;
  ClassMemory<float> memory;
};

struct KdConfig {
  double kd_alpha = 0.75;
  double kd_T = 3.0;
  int kd_views = 2;  // 1 or 2
};

TrainResult train_pre(const std::vector<CorpusItem>& train_items,
                      const std::vector<CorpusItem>& val_items,
                      ModelState<float> model, const ContrastConfig& ccfg,
                      const OptimizerConfig& ocfg, const AugmentParams& aug,
                      const std::string& last_good_path = "");

TrainResult train_post(const std::vector<CorpusItem>& train_items,
                       const std::vector<CorpusItem>& val_items,
                       ModelState<float> student, const TeacherSnapshot<float>& teacher,
                       const ContrastConfig& ccfg, const OptimizerConfig& ocfg,
                       const KdConfig& kcfg, const AugmentParams& aug,
                       ClassMemory<float> memory,
                       const std::string& last_good_path = "");

EvalResult evaluate(const ModelState<float>& model,
                    const std::vector<CorpusItem>& items, int num_classes);

struct BenchReport {
  long param_total = 0;
  long checkpoint_bytes = 0;
  double median_latency_ms = 0.0;
  int repetitions = 0;
};

BenchReport bench(const ModelState<float>& model, int repetitions = 1000);

void write_metrics_csv(const RunMetrics& m, const std::string& path);
void write_confusion_csv(const std::vector<std::vector<long>>& cm, const std::string& path);
void write_summary_json(const RunMetrics& m, const std::string& path);

}  // namespace jamlab
