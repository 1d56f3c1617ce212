// gnssjam: one binary wiring the whole pipeline — synthetic IQ generation,
// corpus building, contrastive pre-training, pruning, distillation,
// evaluation, benchmarking, sweeps, and a self-verification suite.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"

#include "jamlab/compress.hpp"
#include "jamlab/config.hpp"
#include "jamlab/contrast.hpp"
#include "jamlab/corpus.hpp"
#include "jamlab/error.hpp"
#include "jamlab/gradcheck.hpp"
#include "jamlab/hash.hpp"
#include "jamlab/synth.hpp"
#include "jamlab/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jamlab;

namespace {

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config: " + config_path);
    doc = json::parse(f, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON: " + config_path);
  }
  for (const auto& ov : overrides) apply_override(doc, ov);
  return config_from_json(doc);
}

std::string manifest_hash(const CorpusManifest& m) {
  std::uint64_t h = fnv1a64(m.config_hash.data(), m.config_hash.size());
  for (const auto& e : m.entries) {
    h = fnv1a64(e.path.data(), e.path.size(), h);
    h = fnv1a64(e.content_hash.data(), e.content_hash.size(), h);
  }
  return hex64(h);
}

std::vector<CorpusItem> take_per_class(const std::vector<CorpusItem>& items,
                                       int per_class, int num_classes) {
  if (per_class <= 0) return items;
  std::vector<int> taken(num_classes, 0);
  std::vector<CorpusItem> out;
  for (const auto& it : items)
    if (taken[it.label] < per_class) {
      out.push_back(it);
      ++taken[it.label];
    }
  return out;
}

void emit_run_outputs(const TrainResult& r, const RunConfig& cfg, const std::string& dir,
                      const EvalResult* test) {
  fs::create_directories(dir);
  save_checkpoint(r.best_model, (fs::path(dir) / "checkpoint.ckpt").string());
  r.memory.save((fs::path(dir) / "memory.mem").string());
  RunMetrics m = r.metrics;
  if (test) {
    m.test_acc = test->accuracy;
    m.confusion = test->confusion;
    write_confusion_csv(test->confusion, (fs::path(dir) / "confusion.csv").string());
  }
  write_metrics_csv(m, (fs::path(dir) / "metrics.csv").string());
  write_summary_json(m, (fs::path(dir) / "summary.json").string());
  archive_config(cfg, dir);
}

int cmd_synth(const RunConfig& cfg) {
  if (cfg.synth.counts.empty()) {
    RunConfig tmp = cfg;
    for (auto c : all_classes()) tmp.synth.counts[class_name(c)] = 30;
    auto manifest = synth_dataset(tmp.synth, tmp.paths.recordings);
    std::cout << "wrote " << manifest.size() << " recordings to " << tmp.paths.recordings
              << "\n";
  } else {
    auto manifest = synth_dataset(cfg.synth, cfg.paths.recordings);
    std::cout << "wrote " << manifest.size() << " recordings to " << cfg.paths.recordings
              << "\n";
  }
  return 0;
}

int cmd_build_corpus(const RunConfig& cfg) {
  auto manifest = build_corpus(cfg.paths.recordings, cfg.corpus, cfg.paths.corpus,
                               cfg.train.seed);
  std::cout << "corpus: " << manifest.entries.size() << " images, manifest hash "
            << manifest_hash(manifest) << "\n";
  archive_config(cfg, cfg.paths.corpus);
  return 0;
}

int cmd_train_pre(const RunConfig& cfg) {
  auto train_items = load_corpus_vec(cfg.paths.corpus, "train");
  auto val_items = load_corpus_vec(cfg.paths.corpus, "val");
  auto test_items = load_corpus_vec(cfg.paths.corpus, "test");
  auto model = build_model<float>(cfg.model, cfg.train.seed);
  std::string dir = (fs::path(cfg.paths.runs) / "pre").string();
  fs::create_directories(dir);
  auto r = train_pre(train_items, val_items, std::move(model), cfg.contrast, cfg.train,
                     cfg.augment, (fs::path(dir) / "last_good.ckpt").string());
  auto test = evaluate(r.best_model, test_items, cfg.model.num_classes);
  emit_run_outputs(r, cfg, dir, &test);
  std::cout << "pre-pruning: best val acc " << r.metrics.best_val_acc << " (epoch "
            << r.metrics.best_epoch << "), test acc " << test.accuracy << "\n";
  return 0;
}

int cmd_prune(const RunConfig& cfg) {
  std::string src = (fs::path(cfg.paths.runs) / "pre" / "checkpoint.ckpt").string();
  auto model = load_checkpoint<float>(src);
  auto [pruned, report] = prune_structured(model, cfg.compress.prune_ratio);
  std::string dir = (fs::path(cfg.paths.runs) / "pruned").string();
  fs::create_directories(dir);
  save_checkpoint(pruned, (fs::path(dir) / "checkpoint.ckpt").string());
  write_prune_report(report, (fs::path(dir) / "prune_report.json").string());
  archive_config(cfg, dir);
  std::cout << "pruned at ratio " << cfg.compress.prune_ratio << ": params "
            << report.params_before << " -> " << report.params_after << "\n";
  return 0;
}

int cmd_distill(const RunConfig& cfg) {
  auto teacher_model =
      load_checkpoint<float>((fs::path(cfg.paths.runs) / "pre" / "checkpoint.ckpt").string());
  auto student =
      load_checkpoint<float>((fs::path(cfg.paths.runs) / "pruned" / "checkpoint.ckpt").string());
  TeacherSnapshot<float> teacher(teacher_model);

  auto train_items = load_corpus_vec(cfg.paths.corpus, "train");
  auto val_items = load_corpus_vec(cfg.paths.corpus, "val");
  auto test_items = load_corpus_vec(cfg.paths.corpus, "test");

  ClassMemory<float> memory;
  if (cfg.contrast.carry_memory_over_pruning) {
    std::string mem_path = (fs::path(cfg.paths.runs) / "pre" / "memory.mem").string();
    if (fs::exists(mem_path)) memory = ClassMemory<float>::load(mem_path);
  }

  OptimizerConfig ocfg = cfg.train;
  ocfg.epochs = cfg.post_epochs;
  std::string dir = (fs::path(cfg.paths.runs) / "post").string();
  fs::create_directories(dir);
  auto r = train_post(train_items, val_items, std::move(student), teacher, cfg.contrast,
                      ocfg, cfg.compress.kd, cfg.augment, std::move(memory),
                      (fs::path(dir) / "last_good.ckpt").string());
  auto test = evaluate(r.best_model, test_items, cfg.model.num_classes);
  emit_run_outputs(r, cfg, dir, &test);
  std::cout << "post-pruning: best val acc " << r.metrics.best_val_acc << ", test acc "
            << test.accuracy << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt, const std::string& split) {
  auto model = load_checkpoint<float>(ckpt);
  auto items = load_corpus_vec(cfg.paths.corpus, split);
  auto r = evaluate(model, items, model.cfg.num_classes);
  std::cout << "accuracy on " << split << ": " << r.accuracy << "\n";
  for (const auto& row : r.confusion) {
    for (std::size_t c = 0; c < row.size(); ++c) std::cout << (c ? "," : "") << row[c];
    std::cout << "\n";
  }
  return 0;
}

int cmd_bench(const RunConfig&, const std::string& ckpt, int reps) {
  auto model = load_checkpoint<float>(ckpt);
  auto r = bench(model, reps);
  json j{{"params", r.param_total},
         {"checkpoint_bytes", r.checkpoint_bytes},
         {"median_latency_ms", r.median_latency_ms},
         {"repetitions", r.repetitions}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  auto train_all = load_corpus_vec(cfg.paths.corpus, "train");
  auto val_items = load_corpus_vec(cfg.paths.corpus, "val");
  auto test_items = load_corpus_vec(cfg.paths.corpus, "test");
  const int C = cfg.model.num_classes;

  fs::create_directories(cfg.paths.runs);
  std::ofstream acc_csv(fs::path(cfg.paths.runs) / "accuracy_vs_samples.csv");
  acc_csv << "samples_per_class,variant,seed,test_acc\n";

  ModelState<float> best_dbcl;
  bool have_dbcl = false;
  for (int samples : cfg.sweep.samples_per_class) {
    auto subset = take_per_class(train_all, samples, C);
    for (int sd = 0; sd < cfg.sweep.seeds; ++sd) {
      for (const char* variant : {"dbcl", "ce"}) {
        ContrastConfig cc = cfg.contrast;
        if (std::string(variant) == "ce") {
          cc.lambda = 0.0;
          cc.alpha_dict = 0.0;
        }
        OptimizerConfig oc = cfg.train;
        oc.seed = hash_mix(cfg.train.seed, 0x73776565ull + sd);
        auto model = build_model<float>(cfg.model, oc.seed);
        auto r = train_pre(subset, val_items, std::move(model), cc, oc, cfg.augment);
        auto test = evaluate(r.best_model, test_items, C);
        acc_csv << samples << ',' << variant << ',' << sd << ',' << test.accuracy << "\n";
        acc_csv.flush();
        std::cout << "sweep: samples=" << samples << " variant=" << variant
                  << " seed=" << sd << " test_acc=" << test.accuracy << "\n";
        if (std::string(variant) == "dbcl" && sd == 0 &&
            samples == cfg.sweep.samples_per_class.back()) {
          best_dbcl = r.best_model;
          have_dbcl = true;
        }
      }
    }
  }

  if (have_dbcl) {
    std::ofstream kd_csv(fs::path(cfg.paths.runs) / "kd_prune_grid.csv");
    kd_csv << "prune_ratio,kd_alpha,kd_T,test_acc\n";
    TeacherSnapshot<float> teacher(best_dbcl);
    auto subset = take_per_class(train_all, cfg.sweep.samples_per_class.back(), C);
    for (double ratio : cfg.sweep.prune_ratios)
      for (double kd_alpha : cfg.sweep.kd_alphas) {
        auto [pruned, report] = prune_structured(best_dbcl, ratio);
        KdConfig kd = cfg.compress.kd;
        kd.kd_alpha = kd_alpha;
        OptimizerConfig oc = cfg.train;
        oc.epochs = cfg.post_epochs;
        auto r = train_post(subset, val_items, std::move(pruned), teacher, cfg.contrast,
                            oc, kd, cfg.augment, ClassMemory<float>());
        auto test = evaluate(r.best_model, test_items, C);
        kd_csv << ratio << ',' << kd_alpha << ',' << kd.kd_T << ',' << test.accuracy
               << "\n";
        kd_csv.flush();
        std::cout << "sweep: ratio=" << ratio << " kd_alpha=" << kd_alpha
                  << " test_acc=" << test.accuracy << "\n";
      }
  }
  archive_config(cfg, cfg.paths.runs);
  return 0;
}

int cmd_verify() {
  int failures = 0;
  auto report = [&](const char* name, bool ok, double detail) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")\n";
    if (!ok) ++failures;
  };

  Rng rng(0xC0FFEEull);
  auto rand_embeddings = [&](int B, int d) {
    Tensor<double> Z({B, d});
    for (long i = 0; i < Z.size(); ++i) Z.data[i] = rng.gaussian();
    for (int i = 0; i < B; ++i) Z.mat().row(i).normalize();
    return Z;
  };
  auto rand_labels = [&](int B, int C) {
    std::vector<int> l(B);
    // at least one positive pair
    for (int i = 0; i < B; ++i) l[i] = static_cast<int>(rng.below(C));
    l[1] = l[0];
    return l;
  };

  {  // label-smoothed CE gradient
    Tensor<double> logits({8, 6});
    for (long i = 0; i < logits.size(); ++i) logits.data[i] = rng.gaussian();
    auto labels = rand_labels(8, 6);
    double err = grad_check_max(
        [&](Tape<double>& t, const std::vector<Tape<double>::Var>& vs) {
          return ce_label_smoothed(t, vs[0], labels, 0.1);
        },
        {logits});
    report("gradient: ce_label_smoothed", err < 1e-5, err);
  }
  {  // TCL gradient
    auto Z = rand_embeddings(8, 8);
    auto labels = rand_labels(8, 3);
    double err = grad_check_max(
        [&](Tape<double>& t, const std::vector<Tape<double>::Var>& vs) {
          auto zn = t.l2_normalize_rows(vs[0]);
          return tcl_loss(t, zn, labels, 0.1, 0.2, 1.0).var;
        },
        {Z});
    report("gradient: tcl_loss", err < 1e-5, err);
  }
  {  // dictionary loss gradient
    auto Z = rand_embeddings(6, 8);
    auto labels = rand_labels(6, 3);
    ClassMemory<double> mem(3, 8, 16);
    auto stored = rand_embeddings(12, 8);
    std::vector<int> stored_labels = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
    mem.update(stored, stored_labels, 0.9);
    double err = grad_check_max(
        [&](Tape<double>& t, const std::vector<Tape<double>::Var>& vs) {
          auto zn = t.l2_normalize_rows(vs[0]);
          return dictionary_loss(t, zn, labels, mem, 0.1, 4, 8, 0.5).var;
        },
        {Z});
    report("gradient: dictionary_loss", err < 1e-5, err);
  }
  {  // KD gradient
    Tensor<double> sl({6, 6}), tl({6, 6});
    for (long i = 0; i < sl.size(); ++i) sl.data[i] = rng.gaussian();
    for (long i = 0; i < tl.size(); ++i) tl.data[i] = rng.gaussian();
    double err = grad_check_max(
        [&](Tape<double>& t, const std::vector<Tape<double>::Var>& vs) {
          return kd_loss(t, {tl}, {vs[0]}, 3.0);
        },
        {sl});
    report("gradient: kd_loss", err < 1e-5, err);
  }
  {  // hand pins
    Tape<double> t;
    auto z = t.input(Tensor<double>::from({2, 3}, {1, 0, 0, 1, 0, 0}));
    auto l = tcl_loss(t, z, {0, 0}, 1.0, 1.0, 1.0);
    double want = std::log(1.0 + std::exp(-2.0));
    double got = t.value(l.var).data[0];
    report("pin: TCL two-positive case", std::abs(got - want) < 1e-9, got);
  }
  {
    Tape<double> t;
    auto sl = t.input(Tensor<double>::from({1, 2}, {0, 1}));
    auto kd = kd_loss(t, {Tensor<double>::from({1, 2}, {1, 0})}, {sl}, 1.0);
    double want = (std::exp(1.0) - 1.0) / (std::exp(1.0) + 1.0);
    double got = t.value(kd).data[0];
    report("pin: KD two-class case", std::abs(got - want) < 1e-9, got);
  }
  {
    Tape<double> t;
    auto logits = t.input(Tensor<double>::zeros({4, 6}));
    auto ce = ce_label_smoothed(t, logits, {0, 1, 2, 3}, 0.1);
    double got = t.value(ce).data[0];
    report("pin: uniform-logits CE = ln 6", std::abs(got - std::log(6.0)) < 1e-12, got);
  }
  {
    ClassMemory<double> mem(1, 2, 8);
    mem.update(Tensor<double>::from({1, 2}, {1, 0}), {0}, 0.0);
    mem.update(Tensor<double>::from({1, 2}, {0, 1}), {0}, 0.9);
    double p0 = mem.prototype(0)[0], p1 = mem.prototype(0)[1];
    bool ok = std::abs(p0 - 0.99388) < 1e-5 && std::abs(p1 - 0.11043) < 1e-5;
    report("pin: prototype EMA", ok, p0);
  }
  std::cout << (failures == 0 ? "verify: all checks passed\n"
                              : "verify: FAILURES PRESENT\n");
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNSS jamming detection pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 1;
  app.add_option("--config", config_path, "JSON config file")->expected(1);
  app.add_option("--set", overrides, "dotted-path override, e.g. train.epochs=5");
  app.add_option("--threads", threads, "worker threads (default 1 for reproducibility)");

  auto* sc_synth = app.add_subcommand("synth", "generate synthetic IQ recordings");
  auto* sc_corpus = app.add_subcommand("build-corpus", "build the spectrogram corpus");
  auto* sc_pre = app.add_subcommand("train-pre", "contrastive pre-pruning training");
  auto* sc_prune = app.add_subcommand("prune", "structured channel pruning");
  auto* sc_distill = app.add_subcommand("distill", "post-pruning KD fine-tuning");
  auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  auto* sc_bench = app.add_subcommand("bench", "size / latency benchmark");
  auto* sc_sweep = app.add_subcommand("sweep", "accuracy-vs-samples and KD/prune grids");
  auto* sc_verify = app.add_subcommand("verify", "run gradient-check and oracle suites");

  std::string eval_ckpt, eval_split = "test", bench_ckpt;
  int bench_reps = 1000;
  sc_eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  sc_eval->add_option("--split", eval_split, "train|val|test");
  sc_bench->add_option("--checkpoint", bench_ckpt, "checkpoint path")->required();
  sc_bench->add_option("--reps", bench_reps, "forward repetitions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc_verify->parsed()) return cmd_verify();
    RunConfig cfg = resolve_config(config_path, overrides);
    if (sc_synth->parsed()) return cmd_synth(cfg);
    if (sc_corpus->parsed()) return cmd_build_corpus(cfg);
    if (sc_pre->parsed()) return cmd_train_pre(cfg);
    if (sc_prune->parsed()) return cmd_prune(cfg);
    if (sc_distill->parsed()) return cmd_distill(cfg);
    if (sc_eval->parsed()) return cmd_eval(cfg, eval_ckpt, eval_split);
    if (sc_bench->parsed()) return cmd_bench(cfg, bench_ckpt, bench_reps);
    if (sc_sweep->parsed()) return cmd_sweep(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
