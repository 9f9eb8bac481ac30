#pragma once

// MFCC baseline feature provider: pre-emphasis, Hamming-windowed frames,
// FFT magnitude, triangular mel filterbank, log, orthonormal DCT-II.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <vector>

#include "gruface/error.hpp"
#include "gruface/features.hpp"

namespace gruface {

struct MfccConfig {
  int num_filters = 26;
  int num_coefficients = 13;
  double window_seconds = 0.025;
  double hop_seconds = 0.020;
  double preemphasis = 0.97;
  double low_hz = 0.0;
  double high_hz = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;
};

/// Hop chosen so the feature rate is twice the mesh rate (k == 2).
inline MfccConfig mfcc_config_for_mesh_fps(double mesh_fps) {
  MfccConfig config;
  config.hop_seconds = 1.0 / (2.0 * mesh_fps);
  return config;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// num_filters x (fft_size / 2 + 1) triangular weights on the linear
/// frequency of each FFT bin.
inline Matrix mel_filterbank(int num_filters, int fft_size, int sample_rate, double low_hz, double high_hz) {
  const int bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(low_hz);
  const double mel_hi = hz_to_mel(high_hz);
  std::vector<double> edges(static_cast<std::size_t>(num_filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (num_filters + 1));
  }
  Matrix bank = Matrix::Zero(num_filters, bins);
  for (int m = 0; m < num_filters; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      if (f > left && f <= center) {
        bank(m, k) = (f - left) / (center - left);
      } else if (f > center && f < right) {
        bank(m, k) = (right - f) / (right - center);
      }
    }
  }
  return bank;
}

/// Orthonormal DCT-II basis, num_coefficients x num_filters.
inline Matrix dct_basis(int num_coefficients, int num_filters) {
  Matrix basis(num_coefficients, num_filters);
  for (int j = 0; j < num_coefficients; ++j) {
    const double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / num_filters);
    for (int m = 0; m < num_filters; ++m) {
      basis(j, m) = scale * std::cos(M_PI * j * (m + 0.5) / num_filters);
    }
  }
  return basis;
}

namespace detail {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

// FFTW's planner is not re-entrant; execution of a finished plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Magnitude spectrum of real frames via FFTW.
class RealFft {
 public:
  explicit RealFft(int size)
      : size_(size),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * size)), fftw_free),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (size / 2 + 1))), fftw_free) {
    std::lock_guard lock(fftw_planner_mutex());
    plan_.reset(fftw_plan_dft_r2c_1d(size_, in_.get(), out_.get(), FFTW_ESTIMATE));
  }

  void magnitude(const std::vector<double>& frame, Eigen::Ref<Vector> out) {
    std::copy(frame.begin(), frame.end(), in_.get());
    fftw_execute(plan_.get());
    for (int k = 0; k <= size_ / 2; ++k) out[k] = std::hypot(out_.get()[k][0], out_.get()[k][1]);
  }

 private:
  int size_;
  std::unique_ptr<double, decltype(&fftw_free)> in_;
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out_;
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan_;
};

}  // namespace detail

/// One row per hop; frames past the end of the signal are zero padded, so a
/// clip of N samples yields floor(N / hop) frames.
inline FeatureSequence compute_mfcc(const AudioWaveform& audio, const MfccConfig& config = {}) {
  require(audio.sample_rate >= 8000, ErrorCode::invalid_config,
          "MFCC needs a sample rate of at least 8000 Hz, got " + std::to_string(audio.sample_rate));
  require(!audio.samples.empty(), ErrorCode::empty_input, "waveform has no samples");
  require(config.num_filters >= 1 && config.num_coefficients >= 1 &&
              config.num_coefficients <= config.num_filters && config.hop_seconds > 0.0 &&
              config.window_seconds > 0.0 && config.log_floor > 0.0,
          ErrorCode::invalid_config, "invalid MFCC configuration");
  for (double s : audio.samples) require(std::isfinite(s), ErrorCode::non_finite, "waveform has non-finite samples");

  const int sr = audio.sample_rate;
  const auto window = static_cast<std::size_t>(std::lround(config.window_seconds * sr));
  const auto hop = static_cast<std::size_t>(std::lround(config.hop_seconds * sr));
  require(window >= 2 && hop >= 1, ErrorCode::invalid_config, "MFCC window or hop rounds to zero samples");
  require(audio.samples.size() >= window, ErrorCode::too_short_audio,
          "audio has " + std::to_string(audio.samples.size()) + " samples, one frame needs " +
              std::to_string(window));

  int fft_size = 1;
  while (static_cast<std::size_t>(fft_size) < window) fft_size *= 2;
  const double high = config.high_hz > 0.0 ? config.high_hz : sr / 2.0;
  const Matrix bank = mel_filterbank(config.num_filters, fft_size, sr, config.low_hz, high);
  const Matrix dct = dct_basis(config.num_coefficients, config.num_filters);

  std::vector<double> emphasized(audio.samples.size());
  emphasized[0] = audio.samples[0];
  for (std::size_t n = 1; n < audio.samples.size(); ++n) {
    emphasized[n] = audio.samples[n] - config.preemphasis * audio.samples[n - 1];
  }

  std::vector<double> hamming(window);
  for (std::size_t n = 0; n < window; ++n) {
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(window - 1));
  }

  const std::size_t num_frames = audio.samples.size() / hop;
  FeatureSequence out{Matrix(static_cast<Eigen::Index>(num_frames), config.num_coefficients),
                      static_cast<double>(sr) / static_cast<double>(hop), FeatureProvenance::mfcc};

  detail::RealFft fft(fft_size);
  std::vector<double> frame(static_cast<std::size_t>(fft_size));
  Vector spectrum(fft_size / 2 + 1);
  for (std::size_t i = 0; i < num_frames; ++i) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t start = i * hop;
    for (std::size_t n = 0; n < window && start + n < emphasized.size(); ++n) {
      frame[n] = emphasized[start + n] * hamming[n];
    }
    fft.magnitude(frame, spectrum);
    const Vector energies = (bank * spectrum).array().max(config.log_floor).log();
    out.data.row(static_cast<Eigen::Index>(i)) = (dct * energies).transpose();
  }
  return out;
}

}  // namespace gruface
