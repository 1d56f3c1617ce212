#include "jamlab/augment.hpp"

#include <algorithm>
#include <cmath>

namespace jamlab {

SpectrogramImage augment_view(const SpectrogramImage& x, const AugmentParams& p,
                              std::uint64_t seed) {
  const int S = x.img_size;
  Rng rng(seed);

  // draw order is part of the contract: shift, mask width, mask start, jitter
  const int max_shift = static_cast<int>(p.time_shift_frac * S);
  int shift = 0;
  if (max_shift > 0)
    shift = static_cast<int>(rng.below(2 * max_shift + 1)) - max_shift;

  const int max_mask = static_cast<int>(p.freq_mask_frac * S);
  int mask_w = 0, mask_y0 = 0;
  if (max_mask > 0) {
    mask_w = static_cast<int>(rng.below(max_mask + 1));
    if (mask_w > 0) mask_y0 = static_cast<int>(rng.below(S - mask_w + 1));
  }

  float jitter = static_cast<float>(rng.uniform(p.jitter_lo, p.jitter_hi));

  SpectrogramImage out;
  out.img_size = S;
  out.data.resize(x.data.size());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < S; ++y)
      for (int xx = 0; xx < S; ++xx) {
        int src = ((xx - shift) % S + S) % S;  // circular along time (x)
        out.at(c, y, xx) = x.at(c, y, src);
      }

  for (int y = mask_y0; y < mask_y0 + mask_w; ++y)
    for (int xx = 0; xx < S; ++xx) {
      out.at(0, y, xx) = 0.0f;
      out.at(1, y, xx) = 0.5f;  // neutral phase
      out.at(2, y, xx) = 0.5f;
    }

  if (jitter != 1.0f)
    for (int y = 0; y < S; ++y)
      for (int xx = 0; xx < S; ++xx)
        out.at(0, y, xx) = std::clamp(out.at(0, y, xx) * jitter, 0.0f, 1.0f);

  return out;
}

}  // namespace jamlab
