#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "tagweave/common.hpp"

namespace tagweave {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filterbank over FFT bins: n_mels rows by n_fft/2 + 1 columns.
struct MelFilterbank {
  int n_fft = 1024;
  double sample_rate = 22050.0;
  Eigen::MatrixXd weights;

  int n_mels() const { return static_cast<int>(weights.rows()); }
  int n_bins() const { return static_cast<int>(weights.cols()); }
};

// Centers are equally spaced on the mel scale between f_min and f_max; each
// filter ramps linearly between its neighbouring centers.
inline MelFilterbank mel_filterbank(int n_fft = 1024, double sample_rate = 22050.0,
                                    int n_mels = 96, double f_min = 0.0,
                                    double f_max = 11025.0) {
  if (n_fft < 2) fail(errc::param, "n_fft must be at least 2");
  if (n_mels < 1) fail(errc::param, "n_mels must be at least 1");
  if (!(f_min >= 0.0) || !(f_min < f_max) || !(f_max <= sample_rate / 2.0))
    fail(errc::param, "need 0 <= f_min < f_max <= sample_rate/2");

  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);

  // n_mels + 2 break points; filter m spans points m .. m+2.
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));

  MelFilterbank fb;
  fb.n_fft = n_fft;
  fb.sample_rate = sample_rate;
  fb.weights = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double right = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      fb.weights(m, k) = w;
    }
  }
  return fb;
}

// Filterbank projection of a power spectrogram (frames x bins).
inline Eigen::MatrixXd apply_filterbank(const MelFilterbank& fb,
                                        const Eigen::MatrixXd& spectrum) {
  if (spectrum.cols() != fb.weights.cols())
    fail(errc::shape, "spectrogram has " + std::to_string(spectrum.cols()) +
                          " bins, filterbank expects " +
                          std::to_string(fb.weights.cols()));
  return spectrum * fb.weights.transpose();
}

// f(x) = ln(1 + C x), the compression applied to mel magnitudes.
inline double log_compress(double x, double c = 10000.0) {
  if (x < 0.0) fail(errc::domain, "log_compress requires non-negative input");
  return std::log1p(c * x);
}

inline Eigen::MatrixXd log_compress(const Eigen::MatrixXd& x, double c = 10000.0) {
  if ((x.array() < 0.0).any())
    fail(errc::domain, "log_compress requires non-negative input");
  return (1.0 + c * x.array()).log().matrix();
}

// Pools a spectrogram (frames x expected_cols) into per-band mean and
// population standard deviation, concatenated. The reference classifier
// consumes these fixed-length vectors instead of the raw time axis.
inline Eigen::VectorXd pool_spectrogram(const Eigen::MatrixXd& spec,
                                        index_t expected_cols = 96) {
  if (spec.cols() != expected_cols)
    fail(errc::shape, "spectrogram has " + std::to_string(spec.cols()) +
                          " columns, expected " + std::to_string(expected_cols));
  if (spec.rows() < 1) fail(errc::shape, "spectrogram has no frames");
  if (!spec.allFinite()) fail(errc::domain, "spectrogram has non-finite values");

  const Eigen::Index d = spec.cols();
  Eigen::VectorXd out(2 * d);
  const Eigen::VectorXd mean = spec.colwise().mean();
  out.head(d) = mean;
  const Eigen::ArrayXXd centered =
      spec.array().rowwise() - mean.transpose().array();
  out.tail(d) =
      (centered.square().colwise().sum() / static_cast<double>(spec.rows()))
          .sqrt()
          .matrix()
          .transpose();
  return out;
}

}  // namespace tagweave
