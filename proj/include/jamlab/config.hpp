#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "jamlab/augment.hpp"
#include "jamlab/contrast.hpp"
#include "jamlab/corpus.hpp"
#include "jamlab/model.hpp"
#include "jamlab/synth.hpp"
#include "jamlab/train.hpp"

namespace jamlab {

struct CompressConfig {
  double prune_ratio = 0.5;
  KdConfig kd;  // kd_alpha 0.75, kd_T 3 defaults
};

struct PathsConfig {
  std::string recordings = "data/recordings";
  std::string corpus = "data/corpus";
  std::string runs = "runs";
};

struct SweepConfig {
  std::vector<int> samples_per_class = {50, 300};
  std::vector<double> prune_ratios = {0.5};
  std::vector<double> kd_alphas = {0.75};
  int seeds = 1;
};

struct RunConfig {
  SynthConfig synth;
  CorpusPlan corpus;
  BackboneConfig model;
  ContrastConfig contrast;
  CompressConfig compress;
  OptimizerConfig train;
  int post_epochs = 15;
  AugmentParams augment;
  PathsConfig paths;
  SweepConfig sweep;
};

// Parses a config document, rejecting unknown keys at every level.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig load_config(const std::string& path);

// Applies a dotted-path override such as "train.epochs=5" or
// "sweep.samples=[50,300]"; the value is parsed as JSON, falling back to a
// plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

void archive_config(const RunConfig& cfg, const std::string& dir);

}  // namespace jamlab
