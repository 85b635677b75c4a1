#include <algorithm>
#include <cmath>

#include "vsegan/trainer.hpp"

namespace vsegan::train {

namespace {

constexpr std::size_t kPixels = corpus::kFrameSize * corpus::kFrameSize;
constexpr std::size_t kChunk = 16;  // segments per generator call

}  // namespace

template <typename T>
dsp::Waveform enhance(Generator<T>& g, const dsp::NormStats& stats, const dsp::Waveform& noisy,
                      const std::vector<io::GrayImage>& frames) {
  require(noisy.sample_rate_hz == dsp::kSampleRate, "enhance: audio must be 16 kHz");
  require(!frames.empty(), "enhance: no video frames");
  const double covered = double(noisy.size()) * double(dsp::kVideoFps) / double(dsp::kSampleRate);
  require(std::abs(covered - double(frames.size())) <= 1.0,
          "enhance: length mismatch, audio covers " + std::to_string(covered) + " video frames but " +
              std::to_string(frames.size()) + " were given");
  const std::size_t n_seg = std::min(dsp::segment_count(noisy.size()), frames.size() / dsp::kVideoFramesPerSegment);
  require(n_seg > 0, "enhance: input shorter than one 200 ms segment");
  for (const auto& f : frames)
    require(f.width == corpus::kFrameSize && f.height == corpus::kFrameSize, "enhance: video frames must be 80x80");

  dsp::Waveform y = noisy;
  y.samples.resize(n_seg * dsp::kSegmentSamples);
  const auto spec = dsp::segment_aligned_stft(y);
  const auto segs = dsp::log_mel(spec);

  std::vector<dsp::LogMelSegment> out(n_seg);
  NoGradGuard no_grad;
  for (std::size_t s0 = 0; s0 < n_seg; s0 += kChunk) {
    const std::size_t n = std::min(kChunk, n_seg - s0);
    Tensor<T> x({n, 1, dsp::kMelBands, dsp::kSegmentFrames});
    Tensor<T> v({n, dsp::kVideoFramesPerSegment, corpus::kFrameSize, corpus::kFrameSize});
    std::vector<dsp::LogMelSegment> normed(n);
    for (std::size_t i = 0; i < n; ++i) {
      normed[i] = dsp::normalize(segs[s0 + i], stats);
      for (std::size_t m = 0; m < dsp::kMelBands; ++m)
        for (std::size_t t = 0; t < dsp::kSegmentFrames; ++t) x.at(i, 0, m, t) = T(normed[i].values(long(m), long(t)));
      for (std::size_t f = 0; f < dsp::kVideoFramesPerSegment; ++f) {
        const auto& img = frames[(s0 + i) * dsp::kVideoFramesPerSegment + f];
        T* dst = v.data().data() + (i * dsp::kVideoFramesPerSegment + f) * kPixels;
        for (std::size_t p = 0; p < kPixels; ++p) dst[p] = T(img.pixels[p]) / T(255);
      }
    }
    // With latent noise enabled, inference feeds its mean (zeros).
    Var<T> latent;
    if (g.config().latent_noise) latent = Var<T>(Tensor<T>({n, 1, dsp::kMelBands, dsp::kSegmentFrames}));
    const Var<T> y_hat = g.forward(Var<T>(x), Var<T>(v), BatchNormMode::kEval, latent);
    for (std::size_t i = 0; i < n; ++i) {
      dsp::LogMelSegment e = normed[i];
      for (std::size_t m = 0; m < dsp::kMelBands; ++m)
        for (std::size_t t = 0; t < dsp::kSegmentFrames; ++t) e.values(long(m), long(t)) = double(y_hat.value().at(i, 0, m, t));
      out[s0 + i] = dsp::denormalize(e);
    }
  }
  return dsp::mel_pseudo_inverse(out, spec);
}

template dsp::Waveform enhance(Generator<float>&, const dsp::NormStats&, const dsp::Waveform&,
                               const std::vector<io::GrayImage>&);
template dsp::Waveform enhance(Generator<double>&, const dsp::NormStats&, const dsp::Waveform&,
                               const std::vector<io::GrayImage>&);

struct Enhancer::Impl {
  std::unique_ptr<Generator<float>> g32;
  std::unique_ptr<Generator<double>> g64;
};

Enhancer::Enhancer(const std::filesystem::path& checkpoint) : impl_(std::make_unique<Impl>()) {
  const auto c = ckpt::load(checkpoint);
  const RunState st = read_run_state(c);
  config_ = st.config;
  stats_ = st.stats;
  if (config_.precision == "float64") {
    impl_->g64 = std::make_unique<Generator<double>>(config_.net_config());
    ckpt::restore_store(c, impl_->g64->store());
  } else {
    impl_->g32 = std::make_unique<Generator<float>>(config_.net_config());
    ckpt::restore_store(c, impl_->g32->store());
  }
}

Enhancer::~Enhancer() = default;
Enhancer::Enhancer(Enhancer&&) noexcept = default;

dsp::Waveform Enhancer::enhance(const dsp::Waveform& noisy, const std::vector<io::GrayImage>& frames) {
  return impl_->g64 ? train::enhance(*impl_->g64, stats_, noisy, frames)
                    : train::enhance(*impl_->g32, stats_, noisy, frames);
}

metrics::EvalReport evaluate(const std::filesystem::path& checkpoint, const corpus::Manifest& manifest,
                             const std::vector<double>& snrs) {
  require(!snrs.empty(), "evaluate: empty SNR list");
  require(!manifest.rows.empty(), "evaluate: manifest has no rows");
  Enhancer enhancer(checkpoint);
  metrics::EvalReport report;
  for (const auto& row : manifest.rows) {
    const auto clean = io::read_wav(manifest.base_dir / row.wav);
    const auto frames = io::read_frames(manifest.base_dir / row.frames);
    const auto noise = corpus::row_noise(manifest, row, clean.size());
    for (double snr : snrs) {
      const auto noisy = dsp::mix_at_snr(clean, noise, snr);
      metrics::score_pair(clean, noisy, enhancer.enhance(noisy, frames), row.id, snr, report);
    }
  }
  metrics::summarize(report, snrs);
  return report;
}

}  // namespace vsegan::train
