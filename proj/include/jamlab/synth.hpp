#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace jamlab {

enum class JammerClass { Clean, SingleTone, SingleChirp, SingleAM, SingleFM, NoiseBand };

constexpr int kNumClasses = 6;

const char* class_name(JammerClass c);
JammerClass class_from_name(const std::string& name);
std::vector<JammerClass> all_classes();

// Per-class parameter ranges for the jammer waveform draws. All draws are
// taken from the recording's own seeded generator.
struct JammerRanges {
  double tone_f0_lo = 500.0, tone_f0_hi = 7000.0;       // Hz
  double chirp_f0_lo = 200.0, chirp_f0_hi = 3000.0;     // Hz
  double chirp_f1_lo = 3500.0, chirp_f1_hi = 7500.0;    // Hz
  // modulation ranges sized so sidebands/deviation span several pixels after
  // the spectrogram is resized down to the configured img_size
  double am_carrier_lo = 1600.0, am_carrier_hi = 6000.0;  // Hz
  double am_mod_lo = 600.0, am_mod_hi = 1200.0;         // Hz
  double am_index_lo = 1.0, am_index_hi = 1.5;  // over-modulated: sidebands stay bright
  // Slow carrier drift (random sign) models oscillator instability; it also
  // keeps the narrow carrier/sideband lines from landing between the sparse
  // sample points of the image downscale, where a perfectly static line can
  // disappear from the rendered spectrogram.
  double am_drift_lo = 150.0, am_drift_hi = 300.0;      // Hz/s
  double fm_carrier_lo = 2500.0, fm_carrier_hi = 4500.0;  // Hz
  double fm_mod_lo = 100.0, fm_mod_hi = 500.0;          // Hz
  double fm_dev_lo = 2000.0, fm_dev_hi = 3000.0;        // Hz deviation
  double nb_center_lo = 1000.0, nb_center_hi = 7000.0;  // Hz
  double nb_bw_lo = 400.0, nb_bw_hi = 2000.0;           // Hz
};

struct IQRecording {
  std::vector<float> i_samples;
  std::vector<float> q_samples;
  double sample_rate = 0.0;
  JammerClass label = JammerClass::Clean;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double jsr_db = 0.0;  // meaningful for jammed recordings only
};

IQRecording synth_clean(double duration_s, double sample_rate, std::uint64_t seed);

IQRecording synth_jammed(JammerClass jclass, double jsr_db, double duration_s,
                         double sample_rate, std::uint64_t seed,
                         const JammerRanges& ranges = {});

std::uint64_t recording_seed(std::uint64_t base_seed, JammerClass c, int index);

struct SynthManifestEntry {
  std::string path;
  std::string label;
  std::uint64_t seed = 0;
};

struct SynthConfig {
  std::map<std::string, int> counts;  // class name -> recording count
  double duration_s = 1.0;
  double sample_rate = 16000.0;
  double jsr_db_lo = 10.0;
  double jsr_db_hi = 30.0;
  std::uint64_t base_seed = 0;
};

// Writes one .iq + .json sidecar per recording under out_dir/<class>/ and a
// manifest.json at the root; returns the manifest entries in written order.
std::vector<SynthManifestEntry> synth_dataset(const SynthConfig& cfg,
                                              const std::string& out_dir);

void write_recording(const IQRecording& rec, const std::string& path_stem);
IQRecording read_recording(const std::string& path_stem);

}  // namespace jamlab
