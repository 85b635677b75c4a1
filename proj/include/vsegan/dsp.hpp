#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <vector>

#include "vsegan/error.hpp"

namespace vsegan::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kWindow = 640;  // 40 ms
inline constexpr std::size_t kHop = 160;     // 10 ms
inline constexpr std::size_t kBins = kWindow / 2 + 1;
inline constexpr std::size_t kMelBands = 80;
inline constexpr double kMelMaxHz = 8000.0;
inline constexpr double kLogFloor = 1e-10;
inline constexpr std::size_t kSegmentFrames = 20;  // 200 ms of STFT frames
inline constexpr std::size_t kVideoFps = 25;
inline constexpr std::size_t kVideoFramesPerSegment = 5;
inline constexpr std::size_t kSegmentSamples = kSegmentFrames * kHop;

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

// One-sided spectrogram, rows = frames, cols = 321 bins.
using Spectrogram = Eigen::MatrixXcd;

// 80 x 20 slice of log-mel magnitudes (band x frame). norm_mean/norm_scale
// record the affine map applied by normalize(); identity when raw.
struct LogMelSegment {
  Eigen::MatrixXd values;
  double norm_mean = 0.0;
  double norm_scale = 1.0;
  bool normalized = false;
};

// Periodic Hann, length kWindow.
const std::vector<double>& hann_window();

// frames = floor((len - 640) / 160) + 1; throws ContractViolation when len < 640.
Spectrogram stft(const Waveform& w);

// Weighted overlap-add with window-square normalisation (floored at 0.01). Output length is
// (frames - 1) * 160 + 640, optionally truncated to `length`.
Waveform istft(const Spectrogram& spec, std::size_t length = 0);

Eigen::MatrixXd magnitude(const Spectrogram& spec);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// 80 x 321 triangular HTK-scale filterbank over 0-8 kHz (unnormalised peaks).
const Eigen::MatrixXd& mel_filterbank();

// magnitude (frames x 321) -> log(mel + 1e-10), 80 x frames.
Eigen::MatrixXd log_mel_spectrogram(const Eigen::MatrixXd& magnitude);

// Non-overlapping 20-frame slices; a trailing partial slice is dropped.
std::vector<LogMelSegment> slice_segments(const Eigen::MatrixXd& log_mel);

// stft magnitudes -> log-mel -> slices.
std::vector<LogMelSegment> log_mel(const Spectrogram& spec);

// Waveform is padded by (window - hop) zeros so that an input of n * 3200
// samples yields exactly 20 n frames. Returns the cropped spectrogram.
Spectrogram segment_aligned_stft(const Waveform& w);
inline std::size_t segment_count(std::size_t samples) { return samples / kSegmentSamples; }

// Non-negative least-squares estimate of 321-bin magnitudes from linear mel
// energies (80 x frames): clipped minimum-norm pseudo-inverse refined by
// projected gradient. Returns frames x 321.
Eigen::MatrixXd mel_to_magnitude(const Eigen::MatrixXd& mel, int iterations = 60);

// Raw (denormalised) log-mel segments + phase source spectrogram covering the
// same 20 * n frames -> waveform of n * 3200 samples.
Waveform mel_pseudo_inverse(const std::vector<LogMelSegment>& segments, const Spectrogram& phase_source);

double power(const std::vector<double>& x);
double snr_db(const std::vector<double>& clean, const std::vector<double>& noise);

// Tiles (or crops) noise deterministically to `length` samples.
std::vector<double> fit_length(const std::vector<double>& noise, std::size_t length);

// Noise tiled/cropped to the clean length and scaled to the requested SNR.
std::vector<double> scale_noise_to_snr(const Waveform& clean, const Waveform& noise, double snr_db);

// clean + scaled noise. Throws ContractViolation for zero-power inputs.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

// Per-iteration noise attenuation in [lo, hi] dB, a pure function of
// (seed, iteration, item).
class AttenuationSampler {
 public:
  explicit AttenuationSampler(std::uint64_t seed, double lo_db = -15.0, double hi_db = 0.0)
      : seed_(seed), lo_(lo_db), hi_(hi_db) {}
  double draw(std::uint64_t iteration, std::uint64_t item = 0) const;

 private:
  std::uint64_t seed_;
  double lo_, hi_;
};

std::vector<double> apply_attenuation(const std::vector<double>& noise, double db);

// Corpus min/max of raw log-mel values, computed on the training split.
struct NormStats {
  double min = 0.0;
  double max = 0.0;
  bool valid = false;

  double lo() const { return min - 0.01 * (max - min); }
  double hi() const { return max + 0.01 * (max - min); }
  double mean() const { return 0.5 * (hi() + lo()); }
  double scale() const { return 0.5 * (hi() - lo()); }

  void accumulate(const Eigen::MatrixXd& values);
};

LogMelSegment normalize(const LogMelSegment& seg, const NormStats& stats);
LogMelSegment denormalize(const LogMelSegment& seg);

}  // namespace vsegan::dsp
