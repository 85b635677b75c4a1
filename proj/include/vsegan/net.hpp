#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vsegan/params.hpp"

namespace vsegan {

inline constexpr double kLeakySlope = 0.2;

// Encoder layer table, one entry per conv layer (two per stage).
inline constexpr std::array<std::size_t, 10> kEncoderFilters = {64, 64, 128, 128, 256, 256, 512, 512, 1024, 1024};
inline constexpr std::array<Hw, 10> kEncoderKernels = {
    Hw{5, 5}, Hw{4, 4}, Hw{4, 4}, Hw{4, 4}, Hw{2, 2}, Hw{2, 2}, Hw{2, 2}, Hw{2, 2}, Hw{2, 2}, Hw{2, 2}};
inline constexpr std::array<Hw, 10> kAudioStrides = {
    Hw{2, 2}, Hw{1, 1}, Hw{2, 2}, Hw{1, 1}, Hw{2, 1}, Hw{1, 1}, Hw{2, 1}, Hw{1, 1}, Hw{1, 5}, Hw{1, 1}};
inline constexpr std::array<Hw, 10> kVideoPools = {
    Hw{2, 4}, Hw{1, 2}, Hw{2, 2}, Hw{1, 1}, Hw{2, 1}, Hw{1, 1}, Hw{2, 1}, Hw{1, 1}, Hw{1, 5}, Hw{1, 1}};

inline constexpr std::size_t kStages = 5;
inline constexpr std::size_t kMelRows = 80, kMelCols = 20;
inline constexpr std::size_t kVideoFrames = 5, kVideoSide = 80;

inline constexpr std::array<std::size_t, 4> kDiscFilters = {64, 128, 256, 512};

struct NetConfig {
  unsigned width_shift = 0;    // every channel count is divided by 2^width_shift (min 1)
  bool latent_noise = false;   // extra generator input channel carrying N(0,1) noise
  std::uint64_t init_seed = 1;

  std::size_t channels(std::size_t base) const { return std::max<std::size_t>(1, base >> width_shift); }
  std::size_t encoder_channels(std::size_t layer) const { return channels(kEncoderFilters[layer]); }
  std::size_t stage_channels(std::size_t stage) const { return encoder_channels(2 * stage + 1); }
  std::size_t embed_width() const { return stage_channels(kStages - 1) * 5; }
};

// C x H x W after each of the 5 encoder stages for an 80 x 20 input.
std::array<Shape, kStages> stage_dims(const NetConfig& cfg);

template <typename T>
class Generator {
 public:
  explicit Generator(const NetConfig& cfg);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = default;

  const NetConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  // Stage index k is 0-based here.
  Var<T> audio_stage(const Var<T>& x, std::size_t k, BatchNormMode mode);
  Var<T> video_stage(const Var<T>& v, std::size_t k, BatchNormMode mode);
  Var<T> fusion(const Var<T>& a, const Var<T>& v, std::size_t k, BatchNormMode mode);
  Var<T> embedding(const Var<T>& a5, const Var<T>& v5);
  Var<T> decoder_stage(const Var<T>& h, const Var<T>& skip, std::size_t k, BatchNormMode mode);

  // noisy [N,1,80,20] (normalised log-mel), video [N,5,80,80] in [0,1],
  // latent [N,1,80,20] only when cfg.latent_noise. Returns [N,1,80,20] in [-1,1].
  Var<T> forward(const Var<T>& noisy, const Var<T>& video, BatchNormMode mode, const Var<T>& latent = {});

 private:
  struct ConvBn {
    Var<T> weight, gamma, beta;
    BatchNormStats<T>* stats = nullptr;
  };
  Var<T> conv_bn(const ConvBn& l, const Var<T>& x, Hw stride, BatchNormMode mode, bool transpose = false);

  NetConfig cfg_;
  ParamStore<T> store_;
  std::vector<ConvBn> audio_, video_, fusion_, decoder_;
  Var<T> fc1_w_, fc1_b_, fc2_w_, fc2_b_, out_bias_;
};

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const NetConfig& cfg);
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;
  Discriminator(Discriminator&&) = default;

  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  // candidate, condition: [N,1,80,20] -> [N]. Unbounded.
  Var<T> forward(const Var<T>& candidate, const Var<T>& condition, BatchNormMode mode);

 private:
  NetConfig cfg_;
  ParamStore<T> store_;
  std::array<Var<T>, 4> w_;
  Var<T> b0_;
  std::array<Var<T>, 4> gamma_, beta_;
  std::array<BatchNormStats<T>*, 4> stats_{};
  Var<T> head_w_, head_b_;
};

// 1/2 mean((D(y)-1)^2) + 1/2 mean(D(y_hat)^2)
template <typename T>
Var<T> d_loss(const Var<T>& d_real, const Var<T>& d_fake);

template <typename T>
struct GLoss {
  Var<T> adv;    // 1/2 mean((D(y_hat)-1)^2)
  Var<T> l1;     // mean |y_hat - y|
  Var<T> total;  // adv + lambda * l1
};

template <typename T>
GLoss<T> g_loss(const Var<T>& d_fake, const Var<T>& y_hat, const Var<T>& y, double lambda);

struct LossValues {
  double d_loss = 0, g_adv = 0, g_l1 = 0, g_total = 0, lambda = 0;
};

// g_total is recomputed in double from the reported components so that the
// decomposition holds exactly.
inline LossValues make_loss_values(double d, double adv, double l1, double lambda) {
  return LossValues{d, adv, l1, adv + lambda * l1, lambda};
}

}  // namespace vsegan
