#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "vsegan/dsp.hpp"
#include "vsegan/rng.hpp"

namespace vsegan::dsp {
namespace {

constexpr double kPi = std::numbers::pi;

Waveform tone(double hz, std::size_t n, double amp = 0.5) {
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2 * kPi * hz * i / kSampleRate);
  return w;
}

Waveform white(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = rng.normal() * 0.3;
  return w;
}

// Harmonic source with a slow f0 glide and syllable-rate envelope.
Waveform voiced(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  double phase = 0;
  const double f_start = rng.uniform(110, 220), glide = rng.uniform(-40, 40), am = rng.uniform(3, 6);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / kSampleRate;
    phase += 2 * kPi * (f_start + glide * t) / kSampleRate;
    double s = 0;
    for (int h = 1; h <= 5; ++h) s += std::sin(h * phase) / h;
    w.samples[i] = 0.3 * s * (0.55 + 0.45 * std::sin(2 * kPi * am * t));
  }
  return w;
}

double sisdr(const std::vector<double>& ref, const std::vector<double>& est) {
  double rr = 0, re = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    re += ref[i] * est[i];
  }
  const double a = re / rr;
  double t = 0, r = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    t += a * a * ref[i] * ref[i];
    r += (est[i] - a * ref[i]) * (est[i] - a * ref[i]);
  }
  return 10 * std::log10(t / r);
}

TEST(Stft, FrameCountFormula) {
  EXPECT_EQ(stft(Waveform{std::vector<double>(3200, 0.0)}).rows(), 17);
  EXPECT_EQ(stft(Waveform{std::vector<double>(640, 0.0)}).rows(), 1);
  EXPECT_EQ(stft(Waveform{std::vector<double>(799, 0.0)}).rows(), 1);
  EXPECT_EQ(stft(Waveform{std::vector<double>(800, 0.0)}).cols(), 321);
  EXPECT_THROW(stft(Waveform{std::vector<double>(639, 0.0)}), ContractViolation);
}

TEST(Stft, ZeroSignalGivesZeroSpectrogram) {
  auto s = stft(Waveform{std::vector<double>(2000, 0.0)});
  EXPECT_EQ(s.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, OneKilohertzPeaksAtBin40AndMatchesDirectTransform) {
  const auto w = tone(1000, 1600);
  const auto s = stft(w);
  const auto& win = hann_window();
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    Eigen::Index arg;
    s.row(t).cwiseAbs().maxCoeff(&arg);
    EXPECT_EQ(arg, 40);
  }
  // Direct DFT of frame 2.
  double worst = 0;
  for (std::size_t k = 0; k < kBins; k += 7) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < kWindow; ++i)
      acc += w.samples[2 * kHop + i] * win[i] * std::polar(1.0, -2 * kPi * double(k * i) / kWindow);
    worst = std::max(worst, std::abs(acc - s(2, k)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Stft, HannIsPeriodic) {
  const auto& w = hann_window();
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[320], 1.0, 1e-15);
  EXPECT_NEAR(w[1], w[639], 1e-15);
}

double interior_rel_err(const Waveform& x) {
  auto y = istft(stft(x));
  double num = 0, den = 0;
  // COLA holds once four windows overlap.
  for (std::size_t i = kWindow - kHop; i + kWindow - kHop < y.size(); ++i) {
    num += (y.samples[i] - x.samples[i]) * (y.samples[i] - x.samples[i]);
    den += x.samples[i] * x.samples[i];
  }
  return std::sqrt(num / den);
}

TEST(Istft, RoundTripWhiteNoise) { EXPECT_LT(interior_rel_err(white(16000, 3)), 1e-6); }

TEST(Istft, RoundTripTone) { EXPECT_LT(interior_rel_err(tone(440, 12345)), 1e-6); }

TEST(Istft, ZeroSpectrogramGivesZeroWaveform) {
  auto y = istft(Spectrogram::Zero(10, kBins));
  EXPECT_EQ(y.size(), 9 * kHop + kWindow);
  for (double v : y.samples) EXPECT_EQ(v, 0.0);
}

TEST(Istft, RejectsWrongBinCount) { EXPECT_THROW(istft(Spectrogram::Zero(4, 320)), ContractViolation); }

TEST(Mel, FilterbankNonNegativeWithAtMostTwoAdjacentFilters) {
  const auto& fb = mel_filterbank();
  ASSERT_EQ(fb.rows(), 80);
  ASSERT_EQ(fb.cols(), 321);
  EXPECT_GE(fb.minCoeff(), 0.0);
  for (Eigen::Index k = 0; k < fb.cols(); ++k) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index b = 0; b < fb.rows(); ++b)
      if (fb(b, k) > 0) support.push_back(b);
    ASSERT_LE(support.size(), 2u) << "bin " << k;
    if (support.size() == 2) EXPECT_EQ(support[1], support[0] + 1);
  }
  for (Eigen::Index b = 0; b < fb.rows(); ++b) EXPECT_GT(fb.row(b).sum(), 0.0) << "empty band " << b;
}

TEST(Mel, HtkScale) {
  EXPECT_NEAR(hz_to_mel(700), 2595 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(3210.5)), 3210.5, 1e-9);
}

TEST(Mel, UnitMagnitudeGivesLogFilterMass) {
  const auto& fb = mel_filterbank();
  auto lm = log_mel_spectrogram(Eigen::MatrixXd::Ones(3, kBins));
  for (Eigen::Index b = 0; b < 80; ++b) {
    double mass = 0;
    for (Eigen::Index k = 0; k < 321; ++k) mass += fb(b, k);
    for (Eigen::Index t = 0; t < 3; ++t) EXPECT_NEAR(lm(b, t), std::log(mass + 1e-10), 1e-12);
  }
}

TEST(Mel, FortyFramesGiveTwoSegments) {
  auto segs = slice_segments(Eigen::MatrixXd::Zero(80, 40));
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].values.rows(), 80);
  EXPECT_EQ(segs[0].values.cols(), 20);
  EXPECT_EQ(slice_segments(Eigen::MatrixXd::Zero(80, 59)).size(), 2u);
}

TEST(Mel, MonotoneInMagnitudeScale) {
  auto mag = magnitude(stft(white(4000, 9)));
  auto a = log_mel_spectrogram(mag);
  auto b = log_mel_spectrogram(mag * 1.5);
  EXPECT_GT((b - a).minCoeff(), 0.0);
}

TEST(Segments, AlignedStftGivesTwentyFramesPerSegment) {
  for (std::size_t n : {1, 2, 5}) {
    auto s = segment_aligned_stft(white(n * kSegmentSamples + 100, n));
    EXPECT_EQ(std::size_t(s.rows()), n * kSegmentFrames);
    // 200 ms of audio at 25 fps is five video frames.
    EXPECT_EQ(kSegmentFrames * kHop * kVideoFps, kVideoFramesPerSegment * std::size_t(kSampleRate));
  }
  EXPECT_THROW(segment_aligned_stft(white(3199, 1)), ContractViolation);
}

TEST(PseudoInverse, SelfReconstructionAboveTenDb) {
  double worst = 1e9;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto x = voiced(5 * kSegmentSamples, seed);
    auto s = segment_aligned_stft(x);
    auto y = mel_pseudo_inverse(log_mel(s), s);
    ASSERT_EQ(y.size(), x.size());
    worst = std::min(worst, sisdr(x.samples, y.samples));
  }
  RecordProperty("worst_sisdr_db", std::to_string(worst));
  EXPECT_GT(worst, 10.0);
}

TEST(PseudoInverse, FloorLogMelIsSilent) {
  std::vector<LogMelSegment> segs(2, LogMelSegment{Eigen::MatrixXd::Constant(80, 20, std::log(kLogFloor))});
  auto phase = segment_aligned_stft(white(2 * kSegmentSamples, 4));
  auto y = mel_pseudo_inverse(segs, phase);
  double peak = 0;
  for (double v : y.samples) peak = std::max(peak, std::abs(v));
  EXPECT_LT(peak, 1e-4);
}

TEST(PseudoInverse, ToneAtFilterCentreKeepsFrequency) {
  // Band 40's centre, rounded to a bin.
  const double top = hz_to_mel(kMelMaxHz);
  const double centre = mel_to_hz(top * 41 / 81);
  const double bin_hz = double(kSampleRate) / kWindow;
  const double f = std::round(centre / bin_hz) * bin_hz;
  auto x = tone(f, 3 * kSegmentSamples);
  auto s = segment_aligned_stft(x);
  auto y = mel_pseudo_inverse(log_mel(s), s);
  auto ys = magnitude(stft(y)).colwise().sum();
  Eigen::Index arg;
  ys.maxCoeff(&arg);
  EXPECT_LE(std::abs(double(arg) - f / bin_hz), 1.0);
}

TEST(PseudoInverse, RejectsFrameMismatch) {
  std::vector<LogMelSegment> segs(2, LogMelSegment{Eigen::MatrixXd::Zero(80, 20)});
  EXPECT_THROW(mel_pseudo_inverse(segs, Spectrogram::Zero(20, kBins)), ContractViolation);
}

TEST(Mixing, MeasuredSnrWithinTenthDb) {
  auto clean = voiced(16000, 2);
  auto noise = white(7000, 5);  // shorter, so it gets tiled
  for (double snr = -20; snr <= 20; snr += 2.5) {
    auto n = scale_noise_to_snr(clean, noise, snr);
    auto mix = mix_at_snr(clean, noise, snr);
    ASSERT_EQ(mix.size(), clean.size());
    EXPECT_NEAR(snr_db(clean.samples, n), snr, 0.1);
    std::vector<double> recovered(mix.size());
    for (std::size_t i = 0; i < mix.size(); ++i) recovered[i] = mix.samples[i] - clean.samples[i];
    EXPECT_NEAR(snr_db(clean.samples, recovered), snr, 0.1) << snr;
  }
}

TEST(Mixing, ZeroPowerRejected) {
  auto clean = voiced(4000, 1);
  Waveform silent{std::vector<double>(4000, 0.0)};
  EXPECT_THROW(mix_at_snr(clean, silent, 0), ContractViolation);
  EXPECT_THROW(mix_at_snr(silent, clean, 0), ContractViolation);
}

TEST(Mixing, TilingIsDeterministic) {
  auto t = fit_length({1, 2, 3}, 7);
  EXPECT_EQ(t, (std::vector<double>{1, 2, 3, 1, 2, 3, 1}));
}

TEST(Augment, UniformInRangeAndReproducible) {
  AttenuationSampler a(17), b(17);
  double lo = 0, hi = -100, sum = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double d = a.draw(i);
    EXPECT_EQ(d, b.draw(i));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    sum += d;
  }
  EXPECT_GE(lo, -15.0);
  EXPECT_LE(hi, 0.0);
  EXPECT_NEAR(sum / 10000, -7.5, 0.2);
  EXPECT_NE(a.draw(3, 0), a.draw(3, 1));
}

TEST(Augment, MinusFifteenDbScalesPower) {
  auto n = white(5000, 8).samples;
  auto m = apply_attenuation(n, -15);
  EXPECT_NEAR(power(m) / power(n), std::pow(10.0, -1.5), 1e-12);
}

TEST(Normalize, RoundTripAndClamp) {
  Eigen::MatrixXd v(80, 20);
  Rng rng(3);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-20, 2);
  NormStats st;
  st.accumulate(v);
  LogMelSegment seg{v};
  auto n = normalize(seg, st);
  EXPECT_LE(n.values.maxCoeff(), 1.0);
  EXPECT_GE(n.values.minCoeff(), -1.0);
  auto back = denormalize(n);
  EXPECT_LT((back.values - v).cwiseAbs().maxCoeff(), 1e-13);

  LogMelSegment hot{Eigen::MatrixXd::Constant(80, 20, st.max + 0.1 * (st.max - st.min))};
  EXPECT_EQ(normalize(hot, st).values.maxCoeff(), 1.0);
  EXPECT_THROW(normalize(seg, NormStats{}), ContractViolation);
}

}  // namespace
}  // namespace vsegan::dsp
