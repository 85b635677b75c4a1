#include "vsegan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <utility>

#include <unsupported/Eigen/FFT>

namespace vsegan::metrics {

namespace {

constexpr int kStoiRate = 10000;
constexpr std::size_t kFrameLen = 256, kHop = 128, kFft = 512;
constexpr std::size_t kBands = 15, kSegFrames = 30;
constexpr double kMinFreq = 150.0, kDynRange = 40.0, kBeta = -15.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Hann of length n+2 without its zero end points.
std::vector<double> stoi_window() {
  std::vector<double> w(kFrameLen);
  for (std::size_t i = 0; i < kFrameLen; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * double(i + 1) / double(kFrameLen + 1));
  return w;
}

std::size_t frame_count(std::size_t n) { return n < kFrameLen ? 0 : (n - kFrameLen) / kHop + 1; }

// Drops frames more than 40 dB below the loudest frame of x and overlap-adds
// the survivors of both signals.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto& w = stoi_window();
  const std::size_t frames = frame_count(x.size());
  std::vector<double> energy(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double e = 0;
    for (std::size_t i = 0; i < kFrameLen; ++i) e += std::pow(w[i] * x[f * kHop + i], 2);
    energy[f] = 20 * std::log10(std::sqrt(e) + kEps);
  }
  const double peak = frames ? *std::max_element(energy.begin(), energy.end()) : 0;
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < frames; ++f)
    if (energy[f] > peak - kDynRange) keep.push_back(f);
  const std::size_t len = keep.empty() ? 0 : (keep.size() - 1) * kHop + kFrameLen;
  std::vector<double> xs(len, 0.0), ys(len, 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (std::size_t i = 0; i < kFrameLen; ++i) {
      xs[k * kHop + i] += w[i] * x[keep[k] * kHop + i];
      ys[k * kHop + i] += w[i] * y[keep[k] * kHop + i];
    }
  x.swap(xs);
  y.swap(ys);
}

// One-third octave band matrix over the 257 bins of a 512-point FFT at 10 kHz.
Eigen::MatrixXd third_octave_bands() {
  const std::size_t bins = kFft / 2 + 1;
  Eigen::MatrixXd obm = Eigen::MatrixXd::Zero(kBands, bins);
  std::vector<double> f(bins);
  for (std::size_t k = 0; k < bins; ++k) f[k] = double(k) * kStoiRate / double(kFft);
  auto nearest = [&f](double hz) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < f.size(); ++k)
      if (std::abs(f[k] - hz) < std::abs(f[best] - hz)) best = k;
    return best;
  };
  for (std::size_t b = 0; b < kBands; ++b) {
    const double lo = kMinFreq * std::pow(2.0, (2.0 * double(b) - 1) / 6);
    const double hi = kMinFreq * std::pow(2.0, (2.0 * double(b) + 1) / 6);
    for (std::size_t k = nearest(lo); k < nearest(hi); ++k) obm(long(b), long(k)) = 1.0;
  }
  return obm;
}

// bands x frames envelope.
Eigen::MatrixXd band_envelopes(const std::vector<double>& x) {
  static const Eigen::MatrixXd obm = third_octave_bands();
  const auto& w = stoi_window();
  const std::size_t frames = frame_count(x.size());
  Eigen::MatrixXd power(kFft / 2 + 1, frames);
  Eigen::FFT<double> fft;
  std::vector<double> buf(kFft);
  std::vector<std::complex<double>> spec;
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < kFrameLen; ++i) buf[i] = w[i] * x[f * kHop + i];
    fft.fwd(spec, buf);
    for (std::size_t k = 0; k <= kFft / 2; ++k) power(long(k), long(f)) = std::norm(spec[k]);
  }
  return (obm * power).cwiseSqrt();
}

}  // namespace

double median(std::vector<double> values) {
  require(!values.empty(), "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> resample(const std::vector<double>& x, int up, int down) {
  require(up > 0 && down > 0, "resample: rates must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return x;
  const int zero_crossings = 10;
  const int half = zero_crossings * std::max(up, down);
  const double cutoff = 0.5 / std::max(up, down);  // cycles per upsampled sample
  const double beta = 5.0;
  std::vector<double> h(2 * half + 1);
  for (int k = -half; k <= half; ++k) {
    const double t = double(k);
    const double sinc = k == 0 ? 2 * cutoff : std::sin(2 * std::numbers::pi * cutoff * t) / (std::numbers::pi * t);
    const double r = t / half;
    const double win = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1 - r * r))) / std::cyl_bessel_i(0.0, beta);
    h[std::size_t(k + half)] = up * sinc * win;
  }
  const std::size_t out_len = (x.size() * std::size_t(up) + std::size_t(down) - 1) / std::size_t(down);
  std::vector<double> y(out_len, 0.0);
  const long n_in = long(x.size());
  for (std::size_t m = 0; m < out_len; ++m) {
    // Upsampled index of output m is m*down; input sample n sits at n*up.
    const long center = long(m) * down;
    const long n_lo = std::max(0L, (center - half + up - 1) / up);
    const long n_hi = std::min(n_in - 1, (center + half) / up);
    double acc = 0;
    for (long n = n_lo; n <= n_hi; ++n) acc += x[std::size_t(n)] * h[std::size_t(center - n * up + half)];
    y[m] = acc;
  }
  return y;
}

double stoi(const dsp::Waveform& clean, const dsp::Waveform& degraded) {
  require(clean.size() == degraded.size(), "stoi: clean and degraded lengths differ (" + std::to_string(clean.size()) +
                                               " vs " + std::to_string(degraded.size()) + ")");
  require(clean.sample_rate_hz == degraded.sample_rate_hz, "stoi: sample rates differ");
  require(clean.size() * 1000 >= 384 * std::size_t(clean.sample_rate_hz), "stoi: input shorter than 384 ms");
  std::vector<double> x = resample(clean.samples, kStoiRate, clean.sample_rate_hz);
  std::vector<double> y = resample(degraded.samples, kStoiRate, degraded.sample_rate_hz);
  remove_silent_frames(x, y);
  const Eigen::MatrixXd xb = band_envelopes(x), yb = band_envelopes(y);
  require(std::size_t(xb.cols()) >= kSegFrames, "stoi: fewer than 384 ms of non-silent frames");

  const double clip = 1 + std::pow(10.0, -kBeta / 20);
  double total = 0;
  std::size_t segments = 0;
  for (std::size_t m = kSegFrames; m <= std::size_t(xb.cols()); ++m, ++segments) {
    for (std::size_t b = 0; b < kBands; ++b) {
      const Eigen::VectorXd xs = xb.row(long(b)).segment(long(m - kSegFrames), long(kSegFrames));
      Eigen::VectorXd ys = yb.row(long(b)).segment(long(m - kSegFrames), long(kSegFrames));
      ys *= xs.norm() / (ys.norm() + kEps);
      ys = ys.cwiseMin(xs * clip);
      const Eigen::VectorXd xc = xs.array() - xs.mean();
      const Eigen::VectorXd yc = ys.array() - ys.mean();
      total += xc.dot(yc) / ((xc.norm() + kEps) * (yc.norm() + kEps));
    }
  }
  // Mean correlation can dip just below zero for unrelated signals.
  return std::clamp(total / double(kBands * segments), 0.0, 1.0);
}

double si_sdr(const std::vector<double>& reference, const std::vector<double>& estimate) {
  require(reference.size() == estimate.size(), "si_sdr: lengths differ (" + std::to_string(reference.size()) + " vs " +
                                                    std::to_string(estimate.size()) + ")");
  double rr = 0, re = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    rr += reference[i] * reference[i];
    re += reference[i] * estimate[i];
  }
  require(rr > 0, "si_sdr: zero reference");
  const double alpha = re / rr;
  double target = 0, residual = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = alpha * reference[i];
    target += t * t;
    residual += (estimate[i] - t) * (estimate[i] - t);
  }
  if (residual <= 0) return target > 0 ? kSiSdrCapDb : -kSiSdrCapDb;
  if (target <= 0) return -kSiSdrCapDb;
  return std::clamp(10 * std::log10(target / residual), -kSiSdrCapDb, kSiSdrCapDb);
}

double lsd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.size() > 0,
          "lsd: spectrogram shapes differ (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  const Eigen::ArrayXXd d = 20 * (a.array().max(1e-10).log10() - b.array().max(1e-10).log10());
  // mean over frames of the per-frame mean square, then the root
  return std::sqrt(d.square().rowwise().mean().mean());
}

void score_pair(const dsp::Waveform& clean, const dsp::Waveform& noisy, const dsp::Waveform& enhanced,
                const std::string& utterance, double snr_db, EvalReport& report) {
  const std::size_t n = enhanced.size();
  require(clean.size() >= n && noisy.size() >= n, "score_pair: enhanced signal longer than its input");
  dsp::Waveform c = clean, y = noisy;
  c.samples.resize(n);
  y.samples.resize(n);
  const Eigen::MatrixXd clean_mag = dsp::magnitude(dsp::stft(c));
  for (const dsp::Waveform* est : {&std::as_const(y), &enhanced}) {
    EvalRow row;
    row.utterance = utterance;
    row.snr_db = snr_db;
    row.condition = est == &y ? "noisy" : "enhanced";
    row.stoi = stoi(c, *est);
    row.sisdr_db = si_sdr(c.samples, est->samples);
    row.lsd_db = lsd(clean_mag, dsp::magnitude(dsp::stft(*est)));
    report.rows.push_back(row);
  }
}

void summarize(EvalReport& report, const std::vector<double>& snrs) {
  report.summary.clear();
  for (double snr : snrs) {
    // utterance -> (noisy, enhanced)
    std::map<std::string, std::pair<const EvalRow*, const EvalRow*>> pairs;
    for (const auto& r : report.rows) {
      if (r.snr_db != snr) continue;
      auto& p = pairs[r.utterance];
      (r.condition == "noisy" ? p.first : p.second) = &r;
    }
    EvalSummary s;
    s.snr_db = snr;
    std::vector<double> ns, es, nd, ed, nl, el, gs, gd;
    for (const auto& [id, p] : pairs) {
      if (!p.first || !p.second) continue;
      ns.push_back(p.first->stoi);
      es.push_back(p.second->stoi);
      nd.push_back(p.first->sisdr_db);
      ed.push_back(p.second->sisdr_db);
      nl.push_back(p.first->lsd_db);
      el.push_back(p.second->lsd_db);
      gs.push_back(p.second->stoi - p.first->stoi);
      gd.push_back(p.second->sisdr_db - p.first->sisdr_db);
    }
    s.utterances = ns.size();
    if (!ns.empty()) {
      s.noisy_stoi = median(ns);
      s.enhanced_stoi = median(es);
      s.noisy_sisdr_db = median(nd);
      s.enhanced_sisdr_db = median(ed);
      s.noisy_lsd_db = median(nl);
      s.enhanced_lsd_db = median(el);
      s.median_stoi_gain = median(gs);
      s.median_sisdr_gain_db = median(gd);
    }
    report.summary.push_back(s);
  }
}

std::string EvalReport::csv() const {
  std::string out = "utterance,snr_db,condition,stoi,sisdr_db,lsd_db\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%g,%s,%.6f,%.4f,%.4f\n", r.utterance.c_str(), r.snr_db, r.condition.c_str(),
                  r.stoi, r.sisdr_db, r.lsd_db);
    out += buf;
  }
  return out;
}

std::string EvalReport::summary_text() const {
  std::ostringstream os;
  char buf[512];
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf,
                  "snr %+g dB (%zu utterances): STOI %.1f -> %.1f (median gain %+.3f), SI-SDR %.2f -> %.2f dB "
                  "(median gain %+.2f dB), LSD %.2f -> %.2f dB\n",
                  s.snr_db, s.utterances, 100 * s.noisy_stoi, 100 * s.enhanced_stoi, s.median_stoi_gain,
                  s.noisy_sisdr_db, s.enhanced_sisdr_db, s.median_sisdr_gain_db, s.noisy_lsd_db, s.enhanced_lsd_db);
    os << buf;
  }
  return os.str();
}

}  // namespace vsegan::metrics
