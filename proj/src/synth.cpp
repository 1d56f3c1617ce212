#include "jamlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "jamlab/error.hpp"
#include "jamlab/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace jamlab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double mean_power(const std::vector<double>& re, const std::vector<double>& im) {
  double acc = 0.0;
  for (std::size_t n = 0; n < re.size(); ++n) acc += re[n] * re[n] + im[n] * im[n];
  return acc / static_cast<double>(re.size());
}
}  // namespace

const char* class_name(JammerClass c) {
  switch (c) {
    case JammerClass::Clean: return "Clean";
    case JammerClass::SingleTone: return "SingleTone";
    case JammerClass::SingleChirp: return "SingleChirp";
    case JammerClass::SingleAM: return "SingleAM";
    case JammerClass::SingleFM: return "SingleFM";
    case JammerClass::NoiseBand: return "NoiseBand";
  }
  return "?";
}

JammerClass class_from_name(const std::string& name) {
  for (JammerClass c : all_classes())
    if (name == class_name(c)) return c;
  throw InvalidArgument("unknown class name: " + name);
}

std::vector<JammerClass> all_classes() {
  return {JammerClass::Clean,    JammerClass::SingleTone,
          JammerClass::SingleChirp, JammerClass::SingleAM,
          JammerClass::SingleFM, JammerClass::NoiseBand};
}

std::uint64_t recording_seed(std::uint64_t base_seed, JammerClass c, int index) {
  return hash_mix(hash_mix(base_seed, static_cast<std::uint64_t>(c) + 1),
                  static_cast<std::uint64_t>(index));
}

namespace {

// Clean component in double precision: unit-variance complex white noise plus
// a pseudo-random BPSK spreading waveform 20 dB below the noise.
void clean_component(std::size_t n, double sample_rate, Rng& rng,
                     std::vector<double>& re, std::vector<double>& im) {
  re.resize(n);
  im.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    re[k] = rng.gaussian() * 0.7071067811865476;
    im[k] = rng.gaussian() * 0.7071067811865476;
  }
  // Chip duration ~1/1000 of the sample rate keeps the spreading waveform
  // wideband without mattering to the detector.
  const std::size_t chip_len = std::max<std::size_t>(1, static_cast<std::size_t>(sample_rate / 1000.0));
  const double amp = std::sqrt(std::pow(10.0, -20.0 / 10.0) / 2.0);  // -20 dB vs unit noise
  double ci = 0.0, cq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k % chip_len == 0) {
      ci = (rng.uniform() < 0.5 ? -1.0 : 1.0) * amp;
      cq = (rng.uniform() < 0.5 ? -1.0 : 1.0) * amp;
    }
    re[k] += ci;
    im[k] += cq;
  }
}

void jammer_waveform(JammerClass jclass, std::size_t n, double sr, Rng& rng,
                     const JammerRanges& rr, std::vector<double>& re,
                     std::vector<double>& im) {
  re.assign(n, 0.0);
  im.assign(n, 0.0);
  switch (jclass) {
    case JammerClass::SingleTone: {
      double f0 = rng.uniform(rr.tone_f0_lo, rr.tone_f0_hi);
      for (std::size_t k = 0; k < n; ++k) {
        double ph = kTwoPi * f0 * static_cast<double>(k) / sr;
        re[k] = std::cos(ph);
        im[k] = std::sin(ph);
      }
      break;
    }
    case JammerClass::SingleChirp: {
      double f0 = rng.uniform(rr.chirp_f0_lo, rr.chirp_f0_hi);
      double f1 = rng.uniform(rr.chirp_f1_lo, rr.chirp_f1_hi);
      // Linear sweep f0 -> f1 over the recording; phase by integration.
      double dur = static_cast<double>(n) / sr;
      double rate = (f1 - f0) / dur;
      for (std::size_t k = 0; k < n; ++k) {
        double t = static_cast<double>(k) / sr;
        double ph = kTwoPi * (f0 * t + 0.5 * rate * t * t);
        re[k] = std::cos(ph);
        im[k] = std::sin(ph);
      }
      break;
    }
    case JammerClass::SingleAM: {
      double fc = rng.uniform(rr.am_carrier_lo, rr.am_carrier_hi);
      double fm = rng.uniform(rr.am_mod_lo, rr.am_mod_hi);
      double mi = rng.uniform(rr.am_index_lo, rr.am_index_hi);
      double drift = rng.uniform(rr.am_drift_lo, rr.am_drift_hi);
      if (rng.uniform(0.0, 1.0) < 0.5) drift = -drift;
      for (std::size_t k = 0; k < n; ++k) {
        double t = static_cast<double>(k) / sr;
        double env = 1.0 + mi * std::cos(kTwoPi * fm * t);
        double ph = kTwoPi * (fc * t + 0.5 * drift * t * t);
        re[k] = env * std::cos(ph);
        im[k] = env * std::sin(ph);
      }
      break;
    }
    case JammerClass::SingleFM: {
      double fc = rng.uniform(rr.fm_carrier_lo, rr.fm_carrier_hi);
      double fm = rng.uniform(rr.fm_mod_lo, rr.fm_mod_hi);
      double dev = rng.uniform(rr.fm_dev_lo, rr.fm_dev_hi);
      for (std::size_t k = 0; k < n; ++k) {
        double t = static_cast<double>(k) / sr;
        double ph = kTwoPi * fc * t + (dev / fm) * std::sin(kTwoPi * fm * t);
        re[k] = std::cos(ph);
        im[k] = std::sin(ph);
      }
      break;
    }
    case JammerClass::NoiseBand: {
      double center = rng.uniform(rr.nb_center_lo, rr.nb_center_hi);
      double bw = rng.uniform(rr.nb_bw_lo, rr.nb_bw_hi);
      // White complex noise lowpass-filtered by a moving average of length
      // ~sr/bw, then shifted to the drawn center frequency.
      std::size_t taps = std::max<std::size_t>(1, static_cast<std::size_t>(sr / bw));
      std::vector<double> wr(n), wi(n);
      for (std::size_t k = 0; k < n; ++k) {
        wr[k] = rng.gaussian();
        wi[k] = rng.gaussian();
      }
      double ar = 0.0, ai = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        ar += wr[k];
        ai += wi[k];
        if (k >= taps) {
          ar -= wr[k - taps];
          ai -= wi[k - taps];
        }
        double ph = kTwoPi * center * static_cast<double>(k) / sr;
        double c = std::cos(ph), s = std::sin(ph);
        re[k] = ar * c - ai * s;
        im[k] = ar * s + ai * c;
      }
      break;
    }
    case JammerClass::Clean:
      throw InvalidArgument("jammer_waveform: Clean has no jammer");
  }
}

}  // namespace

IQRecording synth_clean(double duration_s, double sample_rate, std::uint64_t seed) {
  if (duration_s <= 0.0) throw InvalidArgument("synth_clean: duration must be > 0");
  if (sample_rate <= 0.0) throw InvalidArgument("synth_clean: sample rate must be > 0");
  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  Rng rng(hash_mix(seed, 0x636C65616Eull));  // domain-separated from jammer draws
  std::vector<double> re, im;
  clean_component(n, sample_rate, rng, re, im);

  IQRecording rec;
  rec.sample_rate = sample_rate;
  rec.label = JammerClass::Clean;
  rec.seed = seed;
  rec.duration = duration_s;
  rec.i_samples.resize(n);
  rec.q_samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    rec.i_samples[k] = static_cast<float>(re[k]);
    rec.q_samples[k] = static_cast<float>(im[k]);
  }
  return rec;
}

IQRecording synth_jammed(JammerClass jclass, double jsr_db, double duration_s,
                         double sample_rate, std::uint64_t seed,
                         const JammerRanges& ranges) {
  if (jclass == JammerClass::Clean)
    throw InvalidArgument("synth_jammed: jclass must not be Clean");
  if (jsr_db < -10.0 || jsr_db > 40.0)
    throw InvalidArgument("synth_jammed: jsr_db outside [-10, 40]");
  if (duration_s <= 0.0) throw InvalidArgument("synth_jammed: duration must be > 0");
  if (sample_rate <= 0.0) throw InvalidArgument("synth_jammed: sample rate must be > 0");

  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  Rng clean_rng(hash_mix(seed, 0x636C65616Eull));
  std::vector<double> cre, cim;
  clean_component(n, sample_rate, clean_rng, cre, cim);

  Rng jam_rng(hash_mix(seed, 0x6A616D6Dull));
  std::vector<double> jre, jim;
  jammer_waveform(jclass, n, sample_rate, jam_rng, ranges, jre, jim);

  // Scale so measured jammer power / measured clean power matches the request.
  double pc = mean_power(cre, cim);
  double pj = mean_power(jre, jim);
  double scale = pj > 0.0 ? std::sqrt(std::pow(10.0, jsr_db / 10.0) * pc / pj) : 0.0;

  IQRecording rec;
  rec.sample_rate = sample_rate;
  rec.label = jclass;
  rec.seed = seed;
  rec.duration = duration_s;
  rec.jsr_db = jsr_db;
  rec.i_samples.resize(n);
  rec.q_samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    rec.i_samples[k] = static_cast<float>(cre[k] + scale * jre[k]);
    rec.q_samples[k] = static_cast<float>(cim[k] + scale * jim[k]);
  }
  return rec;
}

void write_recording(const IQRecording& rec, const std::string& path_stem) {
  const std::string iq_path = path_stem + ".iq";
  std::ofstream f(iq_path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + iq_path);
  for (std::size_t k = 0; k < rec.i_samples.size(); ++k) {
    f.write(reinterpret_cast<const char*>(&rec.i_samples[k]), 4);
    f.write(reinterpret_cast<const char*>(&rec.q_samples[k]), 4);
  }
  if (!f) throw IoError("write failed: " + iq_path);

  json side;
  side["sample_rate"] = rec.sample_rate;
  side["label"] = class_name(rec.label);
  side["seed"] = rec.seed;
  side["duration"] = rec.duration;
  side["jsr_db"] = rec.jsr_db;
  std::ofstream jf(path_stem + ".json");
  if (!jf) throw IoError("cannot open for write: " + path_stem + ".json");
  jf << side.dump(2) << "\n";
}

IQRecording read_recording(const std::string& path_stem) {
  std::ifstream jf(path_stem + ".json");
  if (!jf) throw IoError("cannot open: " + path_stem + ".json");
  json side = json::parse(jf);

  IQRecording rec;
  rec.sample_rate = side.at("sample_rate").get<double>();
  rec.label = class_from_name(side.at("label").get<std::string>());
  rec.seed = side.at("seed").get<std::uint64_t>();
  rec.duration = side.at("duration").get<double>();
  rec.jsr_db = side.value("jsr_db", 0.0);

  const std::string iq_path = path_stem + ".iq";
  std::ifstream f(iq_path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + iq_path);
  f.seekg(0, std::ios::end);
  std::streamoff bytes = f.tellg();
  f.seekg(0);
  if (bytes % 8 != 0) throw FormatError("truncated iq file: " + iq_path);
  std::size_t n = static_cast<std::size_t>(bytes / 8);
  rec.i_samples.resize(n);
  rec.q_samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    f.read(reinterpret_cast<char*>(&rec.i_samples[k]), 4);
    f.read(reinterpret_cast<char*>(&rec.q_samples[k]), 4);
  }
  if (!f) throw IoError("read failed: " + iq_path);
  return rec;
}

std::vector<SynthManifestEntry> synth_dataset(const SynthConfig& cfg,
                                              const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  for (const auto& [name, n] : cfg.counts) {
    class_from_name(name);  // rejects unknown class names
    if (n < 0) throw InvalidArgument("negative recording count for " + name);
  }

  std::vector<SynthManifestEntry> manifest;
  for (JammerClass c : all_classes()) {
    auto it = cfg.counts.find(class_name(c));
    int count = it == cfg.counts.end() ? 0 : it->second;
    if (count <= 0) continue;
    fs::path class_dir = fs::path(out_dir) / class_name(c);
    fs::create_directories(class_dir, ec);
    if (ec) throw IoError("cannot create " + class_dir.string() + ": " + ec.message());
    for (int idx = 0; idx < count; ++idx) {
      std::uint64_t seed = recording_seed(cfg.base_seed, c, idx);
      IQRecording rec;
      if (c == JammerClass::Clean) {
        rec = synth_clean(cfg.duration_s, cfg.sample_rate, seed);
      } else {
        Rng jsr_rng(hash_mix(seed, 0x6A7372ull));
        double jsr = jsr_rng.uniform(cfg.jsr_db_lo, cfg.jsr_db_hi);
        rec = synth_jammed(c, jsr, cfg.duration_s, cfg.sample_rate, seed);
      }
      char name[32];
      std::snprintf(name, sizeof(name), "%04d", idx);
      std::string stem = (class_dir / name).string();
      write_recording(rec, stem);
      std::string rel = (fs::path(class_name(c)) / name).string();
      manifest.push_back({rel + ".iq", class_name(c), seed});
    }
  }

  json m = json::array();
  for (const auto& e : manifest)
    m.push_back({{"path", e.path}, {"label", e.label}, {"seed", e.seed}});
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest under " + out_dir);
  mf << m.dump(2) << "\n";
  return manifest;
}

}  // namespace jamlab
