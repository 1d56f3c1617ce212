#include "jamlab/config.hpp"

#include <filesystem>
#include <fstream>

#include "jamlab/error.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace jamlab {

namespace {

// Pulls known keys out of a section and rejects whatever is left.
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (!j.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    remaining_ = j;
  }

  template <class T>
  void get(const char* key, T& out) {
    auto it = remaining_.find(key);
    if (it != remaining_.end()) {
      try {
        out = it->get<T>();
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
      }
      remaining_.erase(it);
    }
  }

  json take(const char* key) {
    auto it = remaining_.find(key);
    if (it == remaining_.end()) return json::object();
    json out = *it;
    remaining_.erase(it);
    return out;
  }

  ~Section() noexcept(false) {
    if (!remaining_.empty() && !std::uncaught_exceptions()) {
      std::string keys;
      for (auto& [k, v] : remaining_.items()) keys += (keys.empty() ? "" : ", ") + k;
      throw ConfigError("unknown config key(s) in '" + name_ + "': " + keys);
    }
  }

 private:
  std::string name_;
  json remaining_;
};

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  Section root(j, "<root>");

  {
    Section s(root.take("synth"), "synth");
    s.get("counts", cfg.synth.counts);
    s.get("duration_s", cfg.synth.duration_s);
    s.get("sample_rate", cfg.synth.sample_rate);
    s.get("jsr_db_lo", cfg.synth.jsr_db_lo);
    s.get("jsr_db_hi", cfg.synth.jsr_db_hi);
    s.get("base_seed", cfg.synth.base_seed);
  }
  {
    Section s(root.take("corpus"), "corpus");
    s.get("sample_rate", cfg.corpus.sample_rate);
    s.get("crop_sec", cfg.corpus.crop_sec);
    s.get("overlap", cfg.corpus.overlap);
    s.get("n_fft", cfg.corpus.n_fft);
    s.get("stft_hop", cfg.corpus.stft_hop);
    s.get("img_size", cfg.corpus.img_size);
    s.get("train_crops_per_file", cfg.corpus.train_crops_per_file);
    s.get("val_crops_per_file", cfg.corpus.val_crops_per_file);
    s.get("test_crops_per_file", cfg.corpus.test_crops_per_file);
    s.get("holdout_files_per_class", cfg.corpus.holdout_files_per_class);
    s.get("train_file_fraction", cfg.corpus.train_file_fraction);
    s.get("percentiles_per_crop", cfg.corpus.percentiles_per_crop);
  }
  {
    Section s(root.take("model"), "model");
    s.get("widths", cfg.model.widths);
    s.get("in_channels", cfg.model.in_channels);
    s.get("img_size", cfg.model.img_size);
    s.get("num_classes", cfg.model.num_classes);
    s.get("proj_dim", cfg.model.proj_dim);
    s.get("proj_hidden", cfg.model.proj_hidden);
  }
  {
    Section s(root.take("contrast"), "contrast");
    s.get("tau", cfg.contrast.tau);
    s.get("k1_start", cfg.contrast.k1_start);
    s.get("k1_end", cfg.contrast.k1_end);
    s.get("k1_ramp_epochs", cfg.contrast.k1_ramp_epochs);
    s.get("k2", cfg.contrast.k2);
    s.get("tau_dict", cfg.contrast.tau_dict);
    s.get("mem_positives", cfg.contrast.mem_positives);
    s.get("mem_negatives", cfg.contrast.mem_negatives);
    s.get("proto_weight", cfg.contrast.proto_weight);
    s.get("alpha_dict", cfg.contrast.alpha_dict);
    s.get("alpha_dict_ramp_epochs", cfg.contrast.alpha_dict_ramp_epochs);
    s.get("lambda", cfg.contrast.lambda);
    s.get("label_smoothing", cfg.contrast.label_smoothing);
    s.get("mem_capacity", cfg.contrast.mem_capacity);
    s.get("momentum", cfg.contrast.momentum);
    s.get("carry_memory_over_pruning", cfg.contrast.carry_memory_over_pruning);
  }
  {
    Section s(root.take("compress"), "compress");
    s.get("prune_ratio", cfg.compress.prune_ratio);
    s.get("kd_alpha", cfg.compress.kd.kd_alpha);
    s.get("kd_T", cfg.compress.kd.kd_T);
    s.get("kd_views", cfg.compress.kd.kd_views);
  }
  {
    Section s(root.take("train"), "train");
    s.get("lr", cfg.train.lr);
    s.get("lr_end", cfg.train.lr_end);
    s.get("momentum", cfg.train.momentum);
    s.get("epochs", cfg.train.epochs);
    s.get("batch_size", cfg.train.batch_size);
    s.get("seed", cfg.train.seed);
    s.get("post_epochs", cfg.post_epochs);
  }
  {
    Section s(root.take("augment"), "augment");
    s.get("time_shift_frac", cfg.augment.time_shift_frac);
    s.get("freq_mask_frac", cfg.augment.freq_mask_frac);
    s.get("jitter_lo", cfg.augment.jitter_lo);
    s.get("jitter_hi", cfg.augment.jitter_hi);
  }
  {
    Section s(root.take("paths"), "paths");
    s.get("recordings", cfg.paths.recordings);
    s.get("corpus", cfg.paths.corpus);
    s.get("runs", cfg.paths.runs);
  }
  {
    Section s(root.take("sweep"), "sweep");
    s.get("samples_per_class", cfg.sweep.samples_per_class);
    s.get("prune_ratios", cfg.sweep.prune_ratios);
    s.get("kd_alphas", cfg.sweep.kd_alphas);
    s.get("seeds", cfg.sweep.seeds);
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["synth"] = {{"counts", cfg.synth.counts},
                {"duration_s", cfg.synth.duration_s},
                {"sample_rate", cfg.synth.sample_rate},
                {"jsr_db_lo", cfg.synth.jsr_db_lo},
                {"jsr_db_hi", cfg.synth.jsr_db_hi},
                {"base_seed", cfg.synth.base_seed}};
  j["corpus"] = {{"sample_rate", cfg.corpus.sample_rate},
                 {"crop_sec", cfg.corpus.crop_sec},
                 {"overlap", cfg.corpus.overlap},
                 {"n_fft", cfg.corpus.n_fft},
                 {"stft_hop", cfg.corpus.stft_hop},
                 {"img_size", cfg.corpus.img_size},
                 {"train_crops_per_file", cfg.corpus.train_crops_per_file},
                 {"val_crops_per_file", cfg.corpus.val_crops_per_file},
                 {"test_crops_per_file", cfg.corpus.test_crops_per_file},
                 {"holdout_files_per_class", cfg.corpus.holdout_files_per_class},
                 {"train_file_fraction", cfg.corpus.train_file_fraction},
                 {"percentiles_per_crop", cfg.corpus.percentiles_per_crop}};
  j["model"] = {{"widths", cfg.model.widths},
                {"in_channels", cfg.model.in_channels},
                {"img_size", cfg.model.img_size},
                {"num_classes", cfg.model.num_classes},
                {"proj_dim", cfg.model.proj_dim},
                {"proj_hidden", cfg.model.proj_hidden}};
  j["contrast"] = {{"tau", cfg.contrast.tau},
                   {"k1_start", cfg.contrast.k1_start},
                   {"k1_end", cfg.contrast.k1_end},
                   {"k1_ramp_epochs", cfg.contrast.k1_ramp_epochs},
                   {"k2", cfg.contrast.k2},
                   {"tau_dict", cfg.contrast.tau_dict},
                   {"mem_positives", cfg.contrast.mem_positives},
                   {"mem_negatives", cfg.contrast.mem_negatives},
                   {"proto_weight", cfg.contrast.proto_weight},
                   {"alpha_dict", cfg.contrast.alpha_dict},
                   {"alpha_dict_ramp_epochs", cfg.contrast.alpha_dict_ramp_epochs},
                   {"lambda", cfg.contrast.lambda},
                   {"label_smoothing", cfg.contrast.label_smoothing},
                   {"mem_capacity", cfg.contrast.mem_capacity},
                   {"momentum", cfg.contrast.momentum},
                   {"carry_memory_over_pruning", cfg.contrast.carry_memory_over_pruning}};
  j["compress"] = {{"prune_ratio", cfg.compress.prune_ratio},
                   {"kd_alpha", cfg.compress.kd.kd_alpha},
                   {"kd_T", cfg.compress.kd.kd_T},
                   {"kd_views", cfg.compress.kd.kd_views}};
  j["train"] = {{"lr", cfg.train.lr},
                {"lr_end", cfg.train.lr_end},
                {"momentum", cfg.train.momentum},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"seed", cfg.train.seed},
                {"post_epochs", cfg.post_epochs}};
  j["augment"] = {{"time_shift_frac", cfg.augment.time_shift_frac},
                  {"freq_mask_frac", cfg.augment.freq_mask_frac},
                  {"jitter_lo", cfg.augment.jitter_lo},
                  {"jitter_hi", cfg.augment.jitter_hi}};
  j["paths"] = {{"recordings", cfg.paths.recordings},
                {"corpus", cfg.paths.corpus},
                {"runs", cfg.paths.runs}};
  j["sweep"] = {{"samples_per_class", cfg.sweep.samples_per_class},
                {"prune_ratios", cfg.sweep.prune_ratios},
                {"kd_alphas", cfg.sweep.kd_alphas},
                {"seeds", cfg.sweep.seeds}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  return config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key.path=value: " + assignment);
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain string

  json* cur = &doc;
  std::size_t pos = 0;
  while (true) {
    auto dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw ConfigError("bad override path: " + path);
    if (dot == std::string::npos) {
      (*cur)[key] = parsed;
      break;
    }
    cur = &(*cur)[key];
    pos = dot + 1;
  }
}

void archive_config(const RunConfig& cfg, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream f(fs::path(dir) / "resolved_config.json");
  if (!f) throw IoError("cannot archive config under " + dir);
  f << config_to_json(cfg).dump(2) << "\n";
}

}  // namespace jamlab
