#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jamlab/dsp.hpp"

namespace jamlab {

struct CorpusPlan {
  double sample_rate = 16000.0;
  double crop_sec = 1.0;
  double overlap = 0.5;
  int n_fft = 1024;
  int stft_hop = 256;
  int img_size = 64;
  int train_crops_per_file = 4;
  int val_crops_per_file = 5;
  int test_crops_per_file = 4;
  int holdout_files_per_class = 20;  // validation hold-out, by file
  double train_file_fraction = 0.75;  // of the non-holdout files
  bool percentiles_per_crop = true;   // per-crop anchors (per-dataset not implemented)

  int crop_len() const { return static_cast<int>(crop_sec * sample_rate); }
  int crop_hop() const {
    int L = crop_len();
    int h = static_cast<int>(L * (1.0 - overlap));
    return h < 1 ? 1 : h;
  }
};

struct ManifestEntry {
  std::string path;       // relative to corpus root
  std::string label;      // class name
  int label_index = 0;
  std::string split;      // train | val | test
  std::string source;     // source recording stem, relative to recordings root
  long crop_start = 0;    // start sample within the (shifted) stream
  long shift = 0;         // circular shift applied before windowing
  std::string content_hash;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::string config_hash;
};

// base quota to every file, remainder to the lexicographically first files
std::vector<int> plan_quotas(std::size_t num_files, int target);

struct Crop {
  std::vector<double> i_crop;
  std::vector<double> q_crop;
  long start = 0;
  long shift = 0;
};

// Sliding windows at starts 0, H, 2H, ...; deficit topped up from circularly
// shifted streams with shift s_j = floor((j+1) N / (deficit+1)).
std::vector<Crop> segment_crops(const std::vector<double>& i_std,
                                const std::vector<double>& q_std, int L, int H,
                                int quota);

CorpusManifest build_corpus(const std::string& recordings_root, const CorpusPlan& plan,
                            const std::string& out_root, std::uint64_t seed);

CorpusManifest read_manifest(const std::string& out_root);
void write_manifest(const CorpusManifest& m, const std::string& out_root);

struct CorpusItem {
  SpectrogramImage image;
  int label = 0;
  std::string path;
};

// Yields images decoded to [0,1] floats in manifest order.
void load_corpus(const std::string& out_root, const std::string& split,
                 const std::function<void(const CorpusItem&)>& fn);

std::vector<CorpusItem> load_corpus_vec(const std::string& out_root,
                                        const std::string& split);

}  // namespace jamlab
