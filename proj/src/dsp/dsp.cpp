#include "vsegan/dsp.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "vsegan/rng.hpp"

namespace vsegan::dsp {

const std::vector<double>& hann_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWindow);
    for (std::size_t i = 0; i < kWindow; ++i)
      v[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / kWindow);
    return v;
  }();
  return w;
}

Spectrogram stft(const Waveform& w) {
  require(w.size() >= kWindow,
          "stft: input of " + std::to_string(w.size()) + " samples is shorter than the 640-sample window");
  const auto& win = hann_window();
  const std::size_t frames = (w.size() - kWindow) / kHop + 1;
  Spectrogram spec(frames, kBins);
  Eigen::FFT<double> fft;
  std::vector<double> buf(kWindow);
  std::vector<std::complex<double>> out;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < kWindow; ++i) buf[i] = w.samples[t * kHop + i] * win[i];
    fft.fwd(out, buf);
    for (std::size_t k = 0; k < kBins; ++k) spec(t, k) = out[k];
  }
  return spec;
}

Waveform istft(const Spectrogram& spec, std::size_t length) {
  require(spec.cols() == static_cast<Eigen::Index>(kBins),
          "istft: expected 321 bins, got " + std::to_string(spec.cols()));
  require(spec.rows() > 0, "istft: empty spectrogram");
  const auto& win = hann_window();
  const std::size_t frames = spec.rows();
  const std::size_t full = (frames - 1) * kHop + kWindow;
  std::vector<double> y(full, 0.0), wsum(full, 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> half(kWindow);
  std::vector<double> frame;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < kBins; ++k) half[k] = spec(t, k);
    half[0] = half[0].real();
    half[kBins - 1] = half[kBins - 1].real();
    for (std::size_t k = kBins; k < kWindow; ++k) half[k] = std::conj(half[kWindow - k]);
    fft.inv(frame, half);
    for (std::size_t i = 0; i < kWindow; ++i) {
      y[t * kHop + i] += frame[i] * win[i];
      wsum[t * kHop + i] += win[i] * win[i];
    }
  }
  // Interior wsum is 1.5; the floor only touches the first and last ~60
  // samples, where dividing by w^2 would amplify any inconsistency in a
  // modified spectrogram.
  for (std::size_t i = 0; i < full; ++i) y[i] /= std::max(wsum[i], 1e-2);
  if (length > 0) y.resize(length, 0.0);
  return Waveform{std::move(y), kSampleRate};
}

Eigen::MatrixXd magnitude(const Spectrogram& spec) { return spec.cwiseAbs(); }

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const Eigen::MatrixXd& mel_filterbank() {
  static const Eigen::MatrixXd fb = [] {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(kMelBands, kBins);
    const double top = hz_to_mel(kMelMaxHz);
    std::vector<double> edges(kMelBands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] = mel_to_hz(top * i / (kMelBands + 1));
    const double bin_hz = static_cast<double>(kSampleRate) / kWindow;
    for (std::size_t b = 0; b < kMelBands; ++b) {
      const double lo = edges[b], c = edges[b + 1], hi = edges[b + 2];
      for (std::size_t k = 0; k < kBins; ++k) {
        const double f = k * bin_hz;
        double v = 0.0;
        if (f > lo && f <= c)
          v = (f - lo) / (c - lo);
        else if (f > c && f < hi)
          v = (hi - f) / (hi - c);
        m(b, k) = v;
      }
    }
    return m;
  }();
  return fb;
}

Eigen::MatrixXd log_mel_spectrogram(const Eigen::MatrixXd& mag) {
  require(mag.cols() == static_cast<Eigen::Index>(kBins), "log_mel: expected 321-bin magnitudes");
  Eigen::MatrixXd mel = mel_filterbank() * mag.transpose();
  return (mel.array() + kLogFloor).log().matrix();
}

std::vector<LogMelSegment> slice_segments(const Eigen::MatrixXd& lm) {
  std::vector<LogMelSegment> segs;
  const std::size_t n = lm.cols() / kSegmentFrames;
  for (std::size_t s = 0; s < n; ++s)
    segs.push_back(LogMelSegment{lm.middleCols(s * kSegmentFrames, kSegmentFrames), 0.0, 1.0, false});
  return segs;
}

std::vector<LogMelSegment> log_mel(const Spectrogram& spec) {
  return slice_segments(log_mel_spectrogram(magnitude(spec)));
}

Spectrogram segment_aligned_stft(const Waveform& w) {
  const std::size_t n = segment_count(w.size());
  require(n >= 1, "input shorter than one 200 ms segment (" + std::to_string(w.size()) + " samples)");
  Waveform padded{w.samples, w.sample_rate_hz};
  padded.samples.resize(n * kSegmentSamples + (kWindow - kHop), 0.0);
  std::fill(padded.samples.begin() + n * kSegmentSamples, padded.samples.end(), 0.0);
  Spectrogram spec = stft(padded);
  return spec.topRows(n * kSegmentFrames);
}

namespace {

struct PseudoInverse {
  Eigen::MatrixXd pinv;  // 321 x 80
  double inv_lipschitz;
};

const PseudoInverse& pseudo_inverse() {
  static const PseudoInverse p = [] {
    const Eigen::MatrixXd& m = mel_filterbank();
    PseudoInverse r;
    r.pinv = m.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m * m.transpose(), Eigen::EigenvaluesOnly);
    r.inv_lipschitz = 1.0 / es.eigenvalues().maxCoeff();
    return r;
  }();
  return p;
}

}  // namespace

Eigen::MatrixXd mel_to_magnitude(const Eigen::MatrixXd& mel, int iterations) {
  require(mel.rows() == static_cast<Eigen::Index>(kMelBands), "mel_to_magnitude: expected 80 mel bands");
  const auto& p = pseudo_inverse();
  const Eigen::MatrixXd& m = mel_filterbank();
  Eigen::MatrixXd x = (p.pinv * mel).cwiseMax(0.0);  // 321 x frames
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd resid = m * x - mel;
    x = (x - p.inv_lipschitz * (m.transpose() * resid)).cwiseMax(0.0);
  }
  return x.transpose();
}

Waveform mel_pseudo_inverse(const std::vector<LogMelSegment>& segments, const Spectrogram& phase_source) {
  const std::size_t frames = segments.size() * kSegmentFrames;
  require(!segments.empty(), "mel_pseudo_inverse: no segments");
  require(static_cast<std::size_t>(phase_source.rows()) == frames,
          "mel_pseudo_inverse: phase covers " + std::to_string(phase_source.rows()) + " frames but segments cover " +
              std::to_string(frames));
  Eigen::MatrixXd mel(kMelBands, frames);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    require(!segments[s].normalized, "mel_pseudo_inverse: expects denormalised segments");
    mel.middleCols(s * kSegmentFrames, kSegmentFrames) =
        (segments[s].values.array().exp() - kLogFloor).cwiseMax(0.0).matrix();
  }
  const Eigen::MatrixXd mag = mel_to_magnitude(mel);
  Spectrogram spec(frames, kBins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < kBins; ++k) {
      const std::complex<double> z = phase_source(t, k);
      const double a = std::abs(z);
      const std::complex<double> unit = a > 0 ? z / a : std::complex<double>(1.0, 0.0);
      spec(t, k) = mag(t, k) * unit;
    }
  return istft(spec, segments.size() * kSegmentSamples);
}

double power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0;
  for (double v : x) s += v * v;
  return s / x.size();
}

double snr_db(const std::vector<double>& clean, const std::vector<double>& noise) {
  return 10.0 * std::log10(power(clean) / power(noise));
}

std::vector<double> fit_length(const std::vector<double>& noise, std::size_t length) {
  require(!noise.empty(), "fit_length: empty noise");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = noise[i % noise.size()];
  return out;
}

std::vector<double> scale_noise_to_snr(const Waveform& clean, const Waveform& noise, double snr) {
  std::vector<double> n = fit_length(noise.samples, clean.size());
  const double pc = power(clean.samples), pn = power(n);
  require(pc > 0, "mix_at_snr: clean signal has zero power");
  require(pn > 0, "mix_at_snr: noise has zero power");
  const double g = std::sqrt(pc / (pn * std::pow(10.0, snr / 10.0)));
  for (double& v : n) v *= g;
  return n;
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr) {
  std::vector<double> n = scale_noise_to_snr(clean, noise, snr);
  Waveform out{clean.samples, clean.sample_rate_hz};
  for (std::size_t i = 0; i < n.size(); ++i) out.samples[i] += n[i];
  return out;
}

double AttenuationSampler::draw(std::uint64_t iteration, std::uint64_t item) const {
  Rng rng(derive_seed(seed_, iteration, item));
  return rng.uniform(lo_, hi_);
}

std::vector<double> apply_attenuation(const std::vector<double>& noise, double db) {
  const double g = std::pow(10.0, db / 20.0);
  std::vector<double> out(noise);
  for (double& v : out) v *= g;
  return out;
}

void NormStats::accumulate(const Eigen::MatrixXd& values) {
  if (values.size() == 0) return;
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  if (!valid) {
    min = lo;
    max = hi;
    valid = true;
  } else {
    min = std::min(min, lo);
    max = std::max(max, hi);
  }
}

LogMelSegment normalize(const LogMelSegment& seg, const NormStats& stats) {
  require(stats.valid && stats.max > stats.min, "normalize: corpus statistics missing");
  require(!seg.normalized, "normalize: segment already normalised");
  LogMelSegment out;
  out.norm_mean = stats.mean();
  out.norm_scale = stats.scale();
  out.values = ((seg.values.array() - out.norm_mean) / out.norm_scale).cwiseMax(-1.0).cwiseMin(1.0).matrix();
  out.normalized = true;
  return out;
}

LogMelSegment denormalize(const LogMelSegment& seg) {
  require(seg.normalized, "denormalize: segment is not normalised");
  LogMelSegment out;
  out.values = (seg.values.array() * seg.norm_scale + seg.norm_mean).matrix();
  return out;
}

}  // namespace vsegan::dsp
