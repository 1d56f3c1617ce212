#include "jamlab/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>

#include "jamlab/error.hpp"

namespace jamlab {

std::vector<double> zscore_standardize(const std::vector<double>& stream, double eps) {
  if (stream.empty()) throw InvalidArgument("zscore_standardize: empty stream");
  double mu = 0.0;
  for (double v : stream) mu += v;
  mu /= static_cast<double>(stream.size());
  double var = 0.0;
  for (double v : stream) var += (v - mu) * (v - mu);
  var /= static_cast<double>(stream.size());  // population statistics
  double denom = std::sqrt(var) + eps;
  std::vector<double> out(stream.size());
  for (std::size_t k = 0; k < stream.size(); ++k) out[k] = (stream[k] - mu) / denom;
  return out;
}

ComplexTFMatrix stft(const std::vector<double>& signal, int n_fft, int hop,
                     double sample_rate) {
  const int n = static_cast<int>(signal.size());
  if (n < n_fft) throw InvalidArgument("stft: signal shorter than n_fft");
  if (n_fft <= 0 || hop <= 0) throw InvalidArgument("stft: n_fft and hop must be > 0");

  const int frames = 1 + (n - n_fft) / hop;
  const int bins = n_fft / 2 + 1;

  // Periodic Hann: w[k] = 0.5 (1 - cos(2 pi k / n_fft))
  std::vector<double> window(n_fft);
  for (int k = 0; k < n_fft; ++k)
    window[k] = 0.5 * (1.0 - std::cos(6.283185307179586476925286766559 * k / n_fft));

  ComplexTFMatrix out;
  out.n_fft = n_fft;
  out.hop = hop;
  out.sample_rate = sample_rate;
  out.real.resize(bins, frames);
  out.imag.resize(bins, frames);

  Eigen::FFT<double> fft;
  std::vector<double> frame(n_fft);
  std::vector<std::complex<double>> spec(n_fft);
  for (int t = 0; t < frames; ++t) {
    const int start = t * hop;
    for (int k = 0; k < n_fft; ++k) frame[k] = signal[start + k] * window[k];
    fft.fwd(spec, frame);  // unnormalized forward DFT
    for (int b = 0; b < bins; ++b) {
      out.real(b, t) = spec[b].real();
      out.imag(b, t) = spec[b].imag();
    }
  }
  return out;
}

double percentile(const MatrixXd& values, double pct) {
  std::vector<double> flat(values.data(), values.data() + values.size());
  std::sort(flat.begin(), flat.end());
  const std::size_t n = flat.size();
  if (n == 1) return flat[0];
  double pos = pct / 100.0 * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, n - 1);
  double frac = pos - static_cast<double>(lo);
  return flat[lo] * (1.0 - frac) + flat[hi] * frac;
}

MatrixXd percentile_scale(const MatrixXd& values, double lo_pct, double hi_pct) {
  if (!(lo_pct < hi_pct)) throw InvalidArgument("percentile_scale: lo_pct must be < hi_pct");
  double a = percentile(values, lo_pct);
  double b = percentile(values, hi_pct);
  if (b - a < 1e-12) return MatrixXd::Zero(values.rows(), values.cols());
  return ((values.array() - a) / (b - a)).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

MatrixXd bilinear_resize(const MatrixXd& src, int out_h, int out_w) {
  const int in_h = static_cast<int>(src.rows());
  const int in_w = static_cast<int>(src.cols());
  MatrixXd dst(out_h, out_w);
  // Half-pixel-centered sampling coordinates, pinned for reproducible bytes.
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
    int y0 = static_cast<int>(std::floor(fy));
    int y1 = std::min(y0 + 1, in_h - 1);
    double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
      int x0 = static_cast<int>(std::floor(fx));
      int x1 = std::min(x0 + 1, in_w - 1);
      double wx = fx - x0;
      dst(y, x) = src(y0, x0) * (1 - wy) * (1 - wx) + src(y0, x1) * (1 - wy) * wx +
                  src(y1, x0) * wy * (1 - wx) + src(y1, x1) * wy * wx;
    }
  }
  return dst;
}

std::uint8_t quantize8(float v) {
  long r = std::lround(v * 255.0f);
  return static_cast<std::uint8_t>(std::clamp(r, 0l, 255l));
}

SpectrogramImage tf_channels(const ComplexTFMatrix& S_I, const ComplexTFMatrix& S_Q,
                             int img_size) {
  if (S_I.real.rows() != S_Q.real.rows() || S_I.real.cols() != S_Q.real.cols())
    throw InvalidArgument("tf_channels: S_I and S_Q shapes differ");
  const int bins = S_I.bins();
  const int frames = S_I.frames();

  // S = S_I + j S_Q: complex combination of the two per-stream STFTs.
  MatrixXd re = S_I.real - S_Q.imag;
  MatrixXd im = S_I.imag + S_Q.real;

  MatrixXd logmag(bins, frames), cosph(bins, frames), sinph(bins, frames);
  for (int b = 0; b < bins; ++b) {
    for (int t = 0; t < frames; ++t) {
      double r = re(b, t), i = im(b, t);
      double mag = std::sqrt(r * r + i * i);
      logmag(b, t) = std::log1p(mag);
      if (mag < 1e-300) {
        // angle of zero defined as 0
        cosph(b, t) = 1.0;
        sinph(b, t) = 0.0;
      } else {
        cosph(b, t) = r / mag;
        sinph(b, t) = i / mag;
      }
    }
  }

  MatrixXd ch0 = percentile_scale(logmag, 0.5, 99.5);
  MatrixXd ch1 = ((cosph.array() + 1.0) / 2.0).matrix();
  MatrixXd ch2 = ((sinph.array() + 1.0) / 2.0).matrix();

  SpectrogramImage img;
  img.img_size = img_size;
  img.data.resize(static_cast<std::size_t>(3) * img_size * img_size);
  const MatrixXd* chans[3] = {&ch0, &ch1, &ch2};
  for (int c = 0; c < 3; ++c) {
    MatrixXd rs = bilinear_resize(*chans[c], img_size, img_size);
    for (int y = 0; y < img_size; ++y)
      for (int x = 0; x < img_size; ++x) {
        double v = std::clamp(rs(y, x), 0.0, 1.0);
        img.at(c, y, x) = static_cast<float>(v);
      }
  }
  return img;
}

}  // namespace jamlab
