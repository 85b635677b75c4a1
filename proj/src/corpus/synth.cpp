#include <Eigen/Core>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>

#include "vsegan/corpus.hpp"
#include "vsegan/rng.hpp"

namespace vsegan::corpus {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFs = dsp::kSampleRate;
constexpr std::size_t kSamplesPerFrame = dsp::kSampleRate / dsp::kVideoFps;  // 640

struct Voice {
  std::vector<double> samples;
  std::vector<double> envelope;  // per sample, in [0, 1]
};

Voice make_voice(std::uint64_t seed, std::size_t n) {
  Rng rng(derive_seed(seed, 0x766f696365ULL));
  Voice v;
  v.samples.assign(n, 0.0);
  v.envelope.assign(n, 0.0);

  const int harmonics = 3 + static_cast<int>(rng.below(3));
  std::vector<double> phase(harmonics);
  for (auto& p : phase) p = rng.uniform(0, 2 * kPi);

  // f0 random walk on a 10 ms grid, reflected into [90, 300] Hz.
  const std::size_t block = 160;
  std::vector<double> f0_knots(n / block + 2);
  double f0 = rng.uniform(110, 220);
  for (auto& k : f0_knots) {
    k = f0;
    f0 += rng.normal() * 4.0;
    if (f0 < 90) f0 = 180 - f0;
    if (f0 > 300) f0 = 600 - f0;
  }

  // Syllables: random length around 1/rate, random level, occasional pause.
  // Formants are redrawn per syllable.
  const double rate = rng.uniform(3, 6);
  struct Syllable {
    std::size_t start, len;
    double level, f1, f2;
  };
  std::vector<Syllable> syl;
  for (std::size_t pos = 0; pos < n;) {
    const auto len = static_cast<std::size_t>(kFs / rate * rng.uniform(0.75, 1.25));
    const bool pause = rng.uniform() < 0.15;
    syl.push_back({pos, len, pause ? 0.0 : rng.uniform(0.45, 1.0), rng.uniform(300, 850), rng.uniform(900, 2300)});
    pos += len;
  }

  double base = 0;
  std::size_t si = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (i >= syl[si].start + syl[si].len) ++si;
    const Syllable& s = syl[si];
    const double tau = static_cast<double>(i - s.start) / s.len;
    const double env = s.level * std::pow(std::sin(kPi * tau), 1.5);

    const double frac = static_cast<double>(i % block) / block;
    const double f = f0_knots[i / block] * (1 - frac) + f0_knots[i / block + 1] * frac;
    base += 2 * kPi * f / kFs;
    double acc = 0, norm = 0;
    for (int h = 1; h <= harmonics; ++h) {
      const double fh = h * f;
      const double g = (0.3 + std::exp(-std::pow((fh - s.f1) / 150.0, 2)) + 0.7 * std::exp(-std::pow((fh - s.f2) / 250.0, 2))) /
                       std::sqrt(static_cast<double>(h));
      acc += g * std::sin(h * base + phase[h - 1]);
      norm += g;
    }
    v.samples[i] = 0.5 * env * acc / norm;
    v.envelope[i] = env;
  }
  return v;
}

io::GrayImage render_mouth(double aperture, Rng& rng) {
  io::GrayImage img{kFrameSize, kFrameSize, std::vector<std::uint8_t>(kFrameSize * kFrameSize)};
  const double cy = 48 + rng.normal() * 0.5, cx = 40 + rng.normal() * 0.5;
  const double a = 20 + 4 * aperture;   // horizontal semi-axis
  const double b = 2 + 16 * aperture;   // vertical semi-axis
  const double la = a + 5, lb = b + 5;  // lip outline
  for (std::size_t r = 0; r < kFrameSize; ++r) {
    for (std::size_t c = 0; c < kFrameSize; ++c) {
      // 4x4 supersampling for smooth edges.
      double acc = 0;
      for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
          const double y = r + (sy + 0.5) / 4 - cy, x = c + (sx + 0.5) / 4 - cx;
          const double inner = (x * x) / (a * a) + (y * y) / (b * b);
          const double outer = (x * x) / (la * la) + (y * y) / (lb * lb);
          acc += inner <= 1 ? 25 : (outer <= 1 ? 110 : 170);
        }
      }
      const double v = acc / 16 + rng.uniform(-3, 3);
      img.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

void normalize_rms(std::vector<double>& x) {
  const double p = dsp::power(x);
  if (p <= 0) return;
  const double g = 1.0 / std::sqrt(p);
  for (auto& v : x) v *= g;
}

// White noise shaped in the frequency domain by gain(f_hz), on the next
// power-of-two length, then cropped.
std::vector<double> shaped_noise(Rng& rng, std::size_t n, const std::function<double(double)>& gain) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  std::vector<std::complex<double>> x(m), X;
  for (auto& v : x) v = rng.normal();
  Eigen::FFT<double> fft;
  fft.fwd(X, x);
  for (std::size_t k = 0; k <= m / 2; ++k) {
    const double g = gain(k * kFs / m);
    X[k] *= g;
    if (k != 0 && k != m / 2) X[m - k] *= g;
  }
  fft.inv(x, X);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i].real();
  return out;
}

// Alternating on/off gate with on/off durations drawn from the given ranges.
std::vector<double> gate(Rng& rng, std::size_t n, double on_lo, double on_hi, double off_lo, double off_hi) {
  std::vector<double> g(n, 0.0);
  bool on = true;
  for (std::size_t pos = 0; pos < n;) {
    const auto len = static_cast<std::size_t>(kFs * (on ? rng.uniform(on_lo, on_hi) : rng.uniform(off_lo, off_hi)));
    for (std::size_t i = pos; i < std::min(n, pos + len); ++i) g[i] = on ? 1.0 : 0.0;
    pos += std::max<std::size_t>(len, 1);
    on = !on;
  }
  return g;
}

}  // namespace

dsp::Waveform synth_voice(std::uint64_t seed, std::size_t n_samples) {
  return dsp::Waveform{make_voice(seed, n_samples).samples};
}

std::vector<double> frame_envelope(const dsp::Waveform& w, std::size_t n_frames) {
  std::vector<double> env(n_frames, 0.0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t lo = f * kSamplesPerFrame, hi = std::min(w.size(), lo + kSamplesPerFrame);
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += w.samples[i] * w.samples[i];
    env[f] = hi > lo ? std::sqrt(s / (hi - lo)) : 0.0;
  }
  return env;
}

SynthUtterance synth_utterance(std::uint64_t seed, double duration_s) {
  require(duration_s >= 0.4, "synth_utterance: duration must be at least 0.4 s, got " + std::to_string(duration_s));
  SynthUtterance u;
  u.seed = seed;
  u.duration_s = duration_s;
  const auto n = static_cast<std::size_t>(std::lround(duration_s * kFs));
  const auto n_frames = static_cast<std::size_t>(std::lround(duration_s * dsp::kVideoFps));
  Voice v = make_voice(seed, n);
  u.clean.samples = std::move(v.samples);

  Rng rng(derive_seed(seed, 0x6672616d65ULL));
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t lo = f * kSamplesPerFrame, hi = std::min(n, lo + kSamplesPerFrame);
    double e = 0;
    for (std::size_t i = lo; i < hi; ++i) e += v.envelope[i];
    e = hi > lo ? e / (hi - lo) : 0.0;
    const double ap = std::clamp(e + rng.normal() * 0.03, 0.0, 1.0);
    u.aperture.push_back(ap);
    u.frames.push_back(render_mouth(ap, rng));
  }
  return u;
}

dsp::Waveform synth_noise(std::string_view category, std::uint64_t seed, std::size_t n) {
  Rng rng(derive_seed(seed, 0x6e6f697365ULL));
  std::vector<double> x(n, 0.0);
  auto t = [](std::size_t i) { return static_cast<double>(i) / kFs; };

  if (category == "white") {
    for (auto& v : x) v = rng.normal();
  } else if (category == "pink") {
    x = shaped_noise(rng, n, [](double f) { return f > 0 ? 1.0 / std::sqrt(f) : 0.0; });
  } else if (category == "brown") {
    x = shaped_noise(rng, n, [](double f) { return f > 0 ? 1.0 / std::max(f, 10.0) : 0.0; });
  } else if (category == "hum") {
    double ph[8];
    for (auto& p : ph) p = rng.uniform(0, 2 * kPi);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (int h = 1; h <= 8; ++h) s += std::sin(2 * kPi * 50.0 * h * t(i) + ph[h - 1]) / h;
      x[i] = s + 0.01 * rng.normal();
    }
  } else if (category == "chirp") {
    const double period = rng.uniform(0.3, 1.0), f_lo = 200, f_hi = 4000;
    double phase = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double tau = std::fmod(t(i), period) / period;
      phase += 2 * kPi * (f_lo + (f_hi - f_lo) * tau) / kFs;
      x[i] = std::sin(phase);
    }
  } else if (category == "am_tone") {
    const double fc = rng.uniform(400, 2000), fm = rng.uniform(2, 10), ph = rng.uniform(0, 2 * kPi);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = (1 + 0.8 * std::sin(2 * kPi * fm * t(i) + ph)) * std::sin(2 * kPi * fc * t(i));
  } else if (category == "clicks") {
    const double rate = rng.uniform(15, 40);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() >= rate / kFs && i != 0) continue;
      const double amp = rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
      for (std::size_t j = 0; j < 80 && i + j < n; ++j) x[i + j] += amp * std::exp(-double(j) / 16.0) * rng.normal();
    }
  } else if (category == "babble") {
    for (int k = 0; k < 5; ++k) {
      auto v = make_voice(derive_seed(seed, 0x626162ULL, k), n);
      for (std::size_t i = 0; i < n; ++i) x[i] += v.samples[i];
    }
    for (auto& v : x) v += 1e-3 * rng.normal();
  } else if (category == "narrowband") {
    const double fc = rng.uniform(500, 3000);
    x = shaped_noise(rng, n, [fc](double f) { return std::abs(f - fc) <= 100 ? 1.0 : 0.0; });
  } else if (category == "square") {
    const double f = rng.uniform(100, 400), ph = rng.uniform(0, 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::fmod(f * t(i) + ph, 1.0) < 0.5 ? 1.0 : -1.0;
  } else if (category == "burst") {
    auto g = gate(rng, n, 0.05, 0.3, 0.05, 0.3);
    for (std::size_t i = 0; i < n; ++i) x[i] = g[i] * rng.normal();
  } else if (category == "ring") {
    auto g = gate(rng, n, 0.3, 0.5, 0.15, 0.3);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = g[i] * (std::sin(2 * kPi * 440 * t(i)) + std::sin(2 * kPi * 480 * t(i)));
  } else {
    std::string names;
    for (auto c : kNoiseCategories) names += (names.empty() ? "" : ", ") + std::string(c);
    throw ContractViolation("unknown noise category '" + std::string(category) + "'; valid: " + names);
  }
  normalize_rms(x);
  return dsp::Waveform{std::move(x)};
}

}  // namespace vsegan::corpus
