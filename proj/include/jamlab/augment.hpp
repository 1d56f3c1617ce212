#pragma once

#include <cstdint>

#include "jamlab/dsp.hpp"
#include "jamlab/rng.hpp"

namespace jamlab {

struct AugmentParams {
  double time_shift_frac = 0.10;  // max circular shift, fraction of frames
  double freq_mask_frac = 0.15;   // max masked band, fraction of bins
  double jitter_lo = 0.9;         // multiplicative jitter on channel 0
  double jitter_hi = 1.1;
};

// Seed for one view: pure function of (run seed, step, sample index, view index).
inline std::uint64_t view_seed(std::uint64_t run_seed, long step, long sample_index,
                               int view_index) {
  return hash_mix(hash_mix(hash_mix(run_seed, static_cast<std::uint64_t>(step)),
                           static_cast<std::uint64_t>(sample_index)),
                  static_cast<std::uint64_t>(view_index) + 0xA5u);
}

// One stochastic view: circular time shift (all channels), one contiguous
// frequency band masked (ch0 -> 0, ch1/ch2 -> 0.5), jitter on channel 0.
SpectrogramImage augment_view(const SpectrogramImage& x, const AugmentParams& p,
                              std::uint64_t seed);

inline std::pair<SpectrogramImage, SpectrogramImage> two_view_augment(
    const SpectrogramImage& x, const AugmentParams& p, std::uint64_t seed1,
    std::uint64_t seed2) {
  return {augment_view(x, p, seed1), augment_view(x, p, seed2)};
}

}  // namespace jamlab
