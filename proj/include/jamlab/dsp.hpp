#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace jamlab {

using MatrixXd = Eigen::MatrixXd;

// One-sided complex STFT of a real stream: freq_bins x frames with
// freq_bins = n_fft/2 + 1 and non-centered framing.
struct ComplexTFMatrix {
  MatrixXd real;
  MatrixXd imag;
  int n_fft = 0;
  int hop = 0;
  double sample_rate = 0.0;

  int bins() const { return static_cast<int>(real.rows()); }
  int frames() const { return static_cast<int>(real.cols()); }
};

// 3 x img_size x img_size image in [0,1]; channel 0 is the percentile-scaled
// log magnitude, channels 1/2 are (cos+1)/2 and (sin+1)/2 of the phase.
struct SpectrogramImage {
  int img_size = 0;
  std::vector<float> data;  // channel-major: data[c*S*S + y*S + x]

  float at(int c, int y, int x) const { return data[(c * img_size + y) * img_size + x]; }
  float& at(int c, int y, int x) { return data[(c * img_size + y) * img_size + x]; }
};

std::vector<double> zscore_standardize(const std::vector<double>& stream,
                                       double eps = 1e-6);

ComplexTFMatrix stft(const std::vector<double>& signal, int n_fft, int hop,
                     double sample_rate = 0.0);

MatrixXd percentile_scale(const MatrixXd& values, double lo_pct, double hi_pct);

// Linear-interpolation percentile of the sorted flattened matrix.
double percentile(const MatrixXd& values, double pct);

SpectrogramImage tf_channels(const ComplexTFMatrix& S_I, const ComplexTFMatrix& S_Q,
                             int img_size);

MatrixXd bilinear_resize(const MatrixXd& src, int out_h, int out_w);

std::uint8_t quantize8(float v);

}  // namespace jamlab
