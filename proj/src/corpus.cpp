#include "jamlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "jamlab/error.hpp"
#include "jamlab/hash.hpp"
#include "jamlab/png.hpp"
#include "jamlab/rng.hpp"
#include "jamlab/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace jamlab {

std::vector<int> plan_quotas(std::size_t num_files, int target) {
  if (target < 0) throw InvalidArgument("plan_quotas: negative target");
  if (num_files == 0) {
    if (target > 0) throw InvalidArgument("plan_quotas: no files but target > 0");
    return {};
  }
  int base = target / static_cast<int>(num_files);
  int rem = target % static_cast<int>(num_files);
  std::vector<int> quotas(num_files, base);
  for (int k = 0; k < rem; ++k) quotas[k] += 1;
  return quotas;
}

std::vector<Crop> segment_crops(const std::vector<double>& i_std,
                                const std::vector<double>& q_std, int L, int H,
                                int quota) {
  const long n = static_cast<long>(i_std.size());
  if (L > n) throw InvalidArgument("segment_crops: crop length exceeds stream");
  if (H < 1) throw InvalidArgument("segment_crops: hop must be >= 1");
  if (i_std.size() != q_std.size())
    throw InvalidArgument("segment_crops: I/Q length mismatch");

  const long windows = 1 + (n - L) / H;
  std::vector<Crop> crops;
  const long direct = std::min<long>(quota, windows);
  for (long w = 0; w < direct; ++w) {
    Crop c;
    c.start = w * H;
    c.shift = 0;
    c.i_crop.assign(i_std.begin() + c.start, i_std.begin() + c.start + L);
    c.q_crop.assign(q_std.begin() + c.start, q_std.begin() + c.start + L);
    crops.push_back(std::move(c));
  }
  const long deficit = quota - direct;
  for (long j = 0; j < deficit; ++j) {
    long shift = (j + 1) * n / (deficit + 1);
    Crop c;
    c.start = 0;
    c.shift = shift;
    c.i_crop.resize(L);
    c.q_crop.resize(L);
    for (int k = 0; k < L; ++k) {
      long src = (shift + k) % n;
      c.i_crop[k] = i_std[src];
      c.q_crop[k] = q_std[src];
    }
    crops.push_back(std::move(c));
  }
  return crops;
}

namespace {

json plan_to_json(const CorpusPlan& p) {
  return json{{"sample_rate", p.sample_rate},
              {"crop_sec", p.crop_sec},
              {"overlap", p.overlap},
              {"n_fft", p.n_fft},
              {"stft_hop", p.stft_hop},
              {"img_size", p.img_size},
              {"train_crops_per_file", p.train_crops_per_file},
              {"val_crops_per_file", p.val_crops_per_file},
              {"test_crops_per_file", p.test_crops_per_file},
              {"holdout_files_per_class", p.holdout_files_per_class},
              {"train_file_fraction", p.train_file_fraction},
              {"percentiles_per_crop", p.percentiles_per_crop}};
}

RgbImage to_rgb(const SpectrogramImage& img) {
  RgbImage out;
  out.width = img.img_size;
  out.height = img.img_size;
  out.pixels.resize(static_cast<std::size_t>(3) * img.img_size * img.img_size);
  for (int y = 0; y < img.img_size; ++y)
    for (int x = 0; x < img.img_size; ++x)
      for (int c = 0; c < 3; ++c)
        out.pixels[(static_cast<std::size_t>(y) * img.img_size + x) * 3 + c] =
            quantize8(img.at(c, y, x));
  return out;
}

std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace

void write_manifest(const CorpusManifest& m, const std::string& out_root) {
  json j;
  j["config_hash"] = m.config_hash;
  json entries = json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"path", e.path},
                       {"label", e.label},
                       {"label_index", e.label_index},
                       {"split", e.split},
                       {"source", e.source},
                       {"crop_start", e.crop_start},
                       {"shift", e.shift},
                       {"content_hash", e.content_hash}});
  j["entries"] = std::move(entries);
  std::ofstream f(fs::path(out_root) / "manifest.json");
  if (!f) throw IoError("cannot write manifest under " + out_root);
  f << j.dump(2) << "\n";
}

CorpusManifest read_manifest(const std::string& out_root) {
  std::ifstream f(fs::path(out_root) / "manifest.json");
  if (!f) throw IoError("missing manifest under " + out_root);
  json j = json::parse(f);
  CorpusManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& e : j.at("entries")) {
    ManifestEntry me;
    me.path = e.at("path").get<std::string>();
    me.label = e.at("label").get<std::string>();
    me.label_index = e.at("label_index").get<int>();
    me.split = e.at("split").get<std::string>();
    me.source = e.at("source").get<std::string>();
    me.crop_start = e.at("crop_start").get<long>();
    me.shift = e.at("shift").get<long>();
    me.content_hash = e.at("content_hash").get<std::string>();
    m.entries.push_back(std::move(me));
  }
  return m;
}

CorpusManifest build_corpus(const std::string& recordings_root, const CorpusPlan& plan,
                            const std::string& out_root, std::uint64_t seed) {
  const int L = plan.crop_len();
  const int H = plan.crop_hop();
  if (L < plan.n_fft)
    throw ConfigError("build_corpus: crop shorter than n_fft");

  CorpusManifest manifest;
  std::uint64_t cfg_hash = fnv1a64(plan_to_json(plan).dump().data(),
                                   plan_to_json(plan).dump().size());
  cfg_hash = hash_mix(cfg_hash, seed);
  manifest.config_hash = hex64(cfg_hash);

  struct SplitSpec {
    const char* name;
    int crops_per_file;
  };

  auto classes = all_classes();
  for (JammerClass cls : classes) {
    const std::string cname = class_name(cls);
    fs::path class_dir = fs::path(recordings_root) / cname;
    if (!fs::exists(class_dir)) continue;

    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (entry.path().extension() == ".iq")
        stems.push_back(entry.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());
    const int nfiles = static_cast<int>(stems.size());
    if (nfiles == 0) continue;

    const int holdout = plan.holdout_files_per_class;
    if (nfiles < holdout + 2)
      throw ConfigError("build_corpus: class " + cname + " has " +
                        std::to_string(nfiles) + " recordings, needs >= " +
                        std::to_string(holdout + 2) +
                        " (holdout " + std::to_string(holdout) + " + train/test)");

    const int remaining = nfiles - holdout;
    int n_train = static_cast<int>(std::llround(plan.train_file_fraction * remaining));
    n_train = std::clamp(n_train, 1, remaining - 1);

    struct Pool {
      SplitSpec split;
      std::vector<std::string> files;
    };
    std::vector<Pool> pools;
    pools.push_back({{"val", plan.val_crops_per_file},
                     {stems.begin(), stems.begin() + holdout}});
    pools.push_back({{"train", plan.train_crops_per_file},
                     {stems.begin() + holdout, stems.begin() + holdout + n_train}});
    pools.push_back({{"test", plan.test_crops_per_file},
                     {stems.begin() + holdout + n_train, stems.end()}});

    for (const auto& pool : pools) {
      if (pool.files.empty()) continue;
      const int target = pool.split.crops_per_file * static_cast<int>(pool.files.size());
      auto quotas = plan_quotas(pool.files.size(), target);
      fs::path split_dir = fs::path(out_root) / pool.split.name / cname;
      std::error_code ec;
      fs::create_directories(split_dir, ec);
      if (ec) throw IoError("cannot create " + split_dir.string());

      for (std::size_t fi = 0; fi < pool.files.size(); ++fi) {
        if (quotas[fi] == 0) continue;
        const std::string stem = (class_dir / pool.files[fi]).string();
        IQRecording rec = read_recording(stem);
        auto i_std = zscore_standardize(to_double(rec.i_samples));
        auto q_std = zscore_standardize(to_double(rec.q_samples));
        auto crops = segment_crops(i_std, q_std, L, H, quotas[fi]);

        for (std::size_t ci = 0; ci < crops.size(); ++ci) {
          auto S_I = stft(crops[ci].i_crop, plan.n_fft, plan.stft_hop, plan.sample_rate);
          auto S_Q = stft(crops[ci].q_crop, plan.n_fft, plan.stft_hop, plan.sample_rate);
          SpectrogramImage img = tf_channels(S_I, S_Q, plan.img_size);
          RgbImage rgb = to_rgb(img);
          auto bytes = png_encode(rgb);

          char leaf[64];
          std::snprintf(leaf, sizeof(leaf), "%s_%02zu.png", pool.files[fi].c_str(), ci);
          fs::path out_path = split_dir / leaf;
          std::ofstream pf(out_path, std::ios::binary);
          if (!pf) throw IoError("cannot write " + out_path.string());
          pf.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
          if (!pf) throw IoError("write failed: " + out_path.string());

          ManifestEntry me;
          me.path = (fs::path(pool.split.name) / cname / leaf).string();
          me.label = cname;
          me.label_index = static_cast<int>(cls);
          me.split = pool.split.name;
          me.source = (fs::path(cname) / pool.files[fi]).string();
          me.crop_start = crops[ci].start;
          me.shift = crops[ci].shift;
          me.content_hash = hex64(fnv1a64(bytes.data(), bytes.size()));
          manifest.entries.push_back(std::move(me));
        }
      }
    }
  }

  std::error_code ec;
  fs::create_directories(out_root, ec);
  write_manifest(manifest, out_root);
  return manifest;
}

void load_corpus(const std::string& out_root, const std::string& split,
                 const std::function<void(const CorpusItem&)>& fn) {
  if (split != "train" && split != "val" && split != "test")
    throw InvalidArgument("load_corpus: unknown split " + split);
  CorpusManifest m = read_manifest(out_root);
  for (const auto& e : m.entries) {
    if (e.split != split) continue;
    fs::path p = fs::path(out_root) / e.path;
    // label sanity vs directory name
    fs::path parent = fs::path(e.path).parent_path();
    if (parent.filename().string() != e.label)
      throw IntegrityError("label mismatch for " + e.path);
    RgbImage rgb = read_png_file(p.string());
    CorpusItem item;
    item.label = e.label_index;
    item.path = p.string();
    item.image.img_size = rgb.width;
    item.image.data.resize(static_cast<std::size_t>(3) * rgb.width * rgb.height);
    for (int y = 0; y < rgb.height; ++y)
      for (int x = 0; x < rgb.width; ++x)
        for (int c = 0; c < 3; ++c)
          item.image.at(c, y, x) =
              rgb.pixels[(static_cast<std::size_t>(y) * rgb.width + x) * 3 + c] / 255.0f;
    fn(item);
  }
}

std::vector<CorpusItem> load_corpus_vec(const std::string& out_root,
                                        const std::string& split) {
  std::vector<CorpusItem> items;
  load_corpus(out_root, split, [&](const CorpusItem& it) { items.push_back(it); });
  return items;
}

}  // namespace jamlab
