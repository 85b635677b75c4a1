#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsegan/dsp.hpp"

namespace vsegan::metrics {

inline constexpr double kSiSdrCapDb = 100.0;

// Classic STOI on 16 kHz input (resampled internally to 10 kHz). Inputs of
// equal length, at least 384 ms; silent frames are chosen from `clean`.
// Clamped to [0, 1].
double stoi(const dsp::Waveform& clean, const dsp::Waveform& degraded);

// Scale-invariant SDR in dB, clamped to +-100 dB.
double si_sdr(const std::vector<double>& reference, const std::vector<double>& estimate);

// Log-spectral distance between two magnitude spectrograms (frames x bins), dB.
// Magnitudes are floored at 1e-10 before the log.
double lsd(const Eigen::MatrixXd& clean_magnitude, const Eigen::MatrixXd& other_magnitude);

// Rational polyphase resampler with a Kaiser-windowed sinc (beta 5, 10 zero
// crossings at the lower rate). Output length ceil(n * up / down).
std::vector<double> resample(const std::vector<double>& x, int up, int down);

double median(std::vector<double> values);

struct EvalRow {
  std::string utterance;
  double snr_db = 0;
  std::string condition;  // "noisy" or "enhanced"
  double stoi = 0, sisdr_db = 0, lsd_db = 0;
};

struct EvalSummary {
  double snr_db = 0;
  std::size_t utterances = 0;
  double noisy_stoi = 0, enhanced_stoi = 0;  // medians
  double noisy_sisdr_db = 0, enhanced_sisdr_db = 0;
  double noisy_lsd_db = 0, enhanced_lsd_db = 0;
  double median_stoi_gain = 0, median_sisdr_gain_db = 0;  // median of per-utterance differences
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalSummary> summary;  // one per SNR, in request order

  std::string csv() const;
  std::string summary_text() const;
};

// Metrics for one (clean, noisy, enhanced) triple; the clean and noisy
// signals are truncated to the enhanced length.
void score_pair(const dsp::Waveform& clean, const dsp::Waveform& noisy, const dsp::Waveform& enhanced,
                const std::string& utterance, double snr_db, EvalReport& report);

// Fills report.summary from report.rows.
void summarize(EvalReport& report, const std::vector<double>& snrs);

}  // namespace vsegan::metrics
