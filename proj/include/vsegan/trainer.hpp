#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vsegan/adam.hpp"
#include "vsegan/checkpoint.hpp"
#include "vsegan/corpus.hpp"
#include "vsegan/dsp.hpp"
#include "vsegan/metrics.hpp"
#include "vsegan/net.hpp"
#include "vsegan/rng.hpp"

namespace vsegan::train {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t epochs = 70;
  std::size_t batch_size = 8;
  double lambda = 100.0;
  std::uint64_t seed = 1;
  double attenuation_lo_db = -15.0, attenuation_hi_db = 0.0;
  unsigned width_scale = 0;  // channel counts divided by 2^width_scale
  std::string precision = "float32";
  bool latent_noise = false;
  std::string train_manifest, val_manifest;
  std::string out_dir = "run";
  std::size_t val_utterances = 0;  // 0: the whole validation manifest

  NetConfig net_config() const;
  // Throws ContractViolation naming the offending field.
  void validate() const;
};

// Pretty-printed with sorted keys. from_json rejects unknown keys and
// type mismatches with ContractViolation; absent keys keep their defaults.
std::string to_json(const TrainConfig& c);
TrainConfig config_from_json(const std::string& text);

template <typename T>
struct GanModels {
  GanModels(const NetConfig& cfg, double lr);
  GanModels(const GanModels&) = delete;
  GanModels& operator=(const GanModels&) = delete;

  Generator<T> g;
  Discriminator<T> d;
  Adam<T> opt_g, opt_d;
};

template <typename T>
struct Batch {
  Tensor<T> clean, noisy, video, latent;  // latent is empty unless enabled
  std::vector<std::size_t> segments;      // dataset segment indices, for diagnostics
};

struct StepResult {
  LossValues losses;
  std::uint64_t g_hash_before = 0, g_hash_after_d_step = 0, g_hash_after = 0;
  std::uint64_t d_hash_before = 0, d_hash_after_d_step = 0, d_hash_after = 0;
};

// One discriminator update on real and detached fake pairs, then one
// generator update through the frozen discriminator. Throws
// ContractViolation if either network changes while it should be frozen and
// NonFiniteError (naming the step and batch segments) on NaN/Inf.
template <typename T>
StepResult train_step(GanModels<T>& m, const Batch<T>& batch, double lambda, std::uint64_t step);

// Training utterances held as complex STFTs of the clean speech and of the
// noise already scaled to the row's SNR, so each iteration's attenuated
// mixture costs one magnitude and one mel projection.
class SegmentSet {
 public:
  explicit SegmentSet(const corpus::Manifest& manifest);

  std::size_t size() const { return index_.size(); }
  std::size_t utterances() const { return utts_.size(); }

  // Min/max of clean and unattenuated noisy log-mel over the whole set.
  dsp::NormStats compute_stats() const;

  // attenuation_db[i] applies to segments[i]'s noise.
  template <typename T>
  Batch<T> make_batch(const std::vector<std::size_t>& segments, const std::vector<double>& attenuation_db,
                      const dsp::NormStats& stats) const;

 private:
  struct Utterance {
    std::string id;
    std::size_t frames = 0;  // STFT frames, a multiple of 20
    std::vector<std::complex<float>> clean, noise;  // frames x 321, row-major
    std::vector<std::uint8_t> video;                // frames/4 images of 80 x 80
  };
  Eigen::MatrixXd log_mel(const Utterance& u, std::size_t seg, double noise_gain) const;

  std::vector<Utterance> utts_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> index_;  // (utterance, segment)
};

// Generator inference on one utterance: eval-mode batch norm, denormalize,
// mel pseudo-inverse with the noisy phase. Output is the input truncated to
// whole 200 ms segments. Audio and frame counts must agree to within one
// video frame.
template <typename T>
dsp::Waveform enhance(Generator<T>& g, const dsp::NormStats& stats, const dsp::Waveform& noisy,
                      const std::vector<io::GrayImage>& frames);

// A trained generator loaded from a checkpoint, in the checkpoint's precision.
class Enhancer {
 public:
  explicit Enhancer(const std::filesystem::path& checkpoint);
  ~Enhancer();
  Enhancer(Enhancer&&) noexcept;

  dsp::Waveform enhance(const dsp::Waveform& noisy, const std::vector<io::GrayImage>& frames);
  const TrainConfig& config() const { return config_; }
  const dsp::NormStats& stats() const { return stats_; }

 private:
  struct Impl;
  TrainConfig config_;
  dsp::NormStats stats_;
  std::unique_ptr<Impl> impl_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double d_loss = 0, g_adv = 0, g_l1 = 0, g_total = 0;  // means over the epoch
  double val_stoi = 0, val_sisdr = 0;                    // medians over validation
};

std::string metrics_csv(const std::vector<EpochMetrics>& rows);

// Everything a checkpoint holds besides network weights and optimizer moments.
struct RunState {
  TrainConfig config;
  dsp::NormStats stats;
  std::size_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;
  Rng rng;                // epoch shuffles
  std::vector<EpochMetrics> history;
};

template <typename T>
ckpt::Container make_checkpoint(const RunState& state, const GanModels<T>& models);
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const RunState& state, const GanModels<T>& models);

// Config, stats, counters, rng and history only.
RunState read_run_state(const ckpt::Container& c);

// Restores weights, running statistics and Adam state into models built for
// the checkpoint's config. A parameter whose shape differs throws
// IntegrityError naming it.
template <typename T>
RunState load_checkpoint(const std::filesystem::path& path, GanModels<T>& models);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  std::size_t stop_after_epoch = 0;  // 0: run to config.epochs
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  std::filesystem::path final_checkpoint, metrics_path;
  std::vector<EpochMetrics> epochs;
  double seconds = 0;
};

// Writes <out_dir>/epoch_NNN.vsgn after every epoch and rewrites
// <out_dir>/metrics.csv. Resuming continues after the checkpoint's epoch and
// reproduces the uninterrupted run exactly.
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& out_dir, std::size_t epoch);

// Mixes every manifest row at each SNR, enhances, and scores noisy and
// enhanced signals against the clean reference.
metrics::EvalReport evaluate(const std::filesystem::path& checkpoint, const corpus::Manifest& manifest,
                             const std::vector<double>& snrs);

}  // namespace vsegan::train
