#include <cmath>

#include "vsegan/trainer.hpp"

namespace vsegan::train {

namespace {

constexpr std::size_t kPixels = corpus::kFrameSize * corpus::kFrameSize;
constexpr std::size_t kFramesPerVideo = dsp::kSegmentFrames / dsp::kVideoFramesPerSegment;

}  // namespace

SegmentSet::SegmentSet(const corpus::Manifest& manifest) {
  require(!manifest.rows.empty(), "training manifest has no rows");
  for (const auto& row : manifest.rows) {
    auto clean = io::read_wav(manifest.base_dir / row.wav);
    const auto frames = io::read_frames(manifest.base_dir / row.frames);
    const std::size_t n_seg = std::min(dsp::segment_count(clean.size()), frames.size() / dsp::kVideoFramesPerSegment);
    require(n_seg > 0, "utterance " + row.id + " is shorter than one 200 ms segment");
    const double expected = double(clean.size()) / double(dsp::kHop * kFramesPerVideo);
    require(std::abs(expected - double(frames.size())) <= 1.0,
            "utterance " + row.id + ": audio covers " + std::to_string(expected) + " video frames but " +
                std::to_string(frames.size()) + " were found");

    const auto noise = corpus::row_noise(manifest, row, clean.size());
    dsp::Waveform scaled{dsp::scale_noise_to_snr(clean, noise, row.snr_db)};
    clean.samples.resize(n_seg * dsp::kSegmentSamples);
    scaled.samples.resize(n_seg * dsp::kSegmentSamples);

    Utterance u;
    u.id = row.id;
    const auto sc = dsp::segment_aligned_stft(clean), sn = dsp::segment_aligned_stft(scaled);
    u.frames = std::size_t(sc.rows());
    u.clean.resize(std::size_t(sc.size()));
    u.noise.resize(std::size_t(sn.size()));
    for (long t = 0; t < sc.rows(); ++t)
      for (long k = 0; k < sc.cols(); ++k) {
        u.clean[std::size_t(t * sc.cols() + k)] = std::complex<float>(sc(t, k));
        u.noise[std::size_t(t * sn.cols() + k)] = std::complex<float>(sn(t, k));
      }
    u.video.reserve(n_seg * dsp::kVideoFramesPerSegment * kPixels);
    for (std::size_t f = 0; f < n_seg * dsp::kVideoFramesPerSegment; ++f) {
      require(frames[f].width == corpus::kFrameSize && frames[f].height == corpus::kFrameSize,
              "utterance " + row.id + ": video frames must be 80x80");
      u.video.insert(u.video.end(), frames[f].pixels.begin(), frames[f].pixels.end());
    }
    for (std::size_t s = 0; s < n_seg; ++s) index_.emplace_back(std::uint32_t(utts_.size()), std::uint32_t(s));
    utts_.push_back(std::move(u));
  }
}

Eigen::MatrixXd SegmentSet::log_mel(const Utterance& u, std::size_t seg, double noise_gain) const {
  Eigen::MatrixXd mag(dsp::kSegmentFrames, dsp::kBins);
  const float g = float(noise_gain);
  for (std::size_t t = 0; t < dsp::kSegmentFrames; ++t) {
    const std::size_t base = (seg * dsp::kSegmentFrames + t) * dsp::kBins;
    for (std::size_t k = 0; k < dsp::kBins; ++k)
      mag(long(t), long(k)) = std::abs(std::complex<double>(u.clean[base + k] + g * u.noise[base + k]));
  }
  return dsp::log_mel_spectrogram(mag);
}

dsp::NormStats SegmentSet::compute_stats() const {
  dsp::NormStats stats;
  for (const auto& [ui, s] : index_) {
    stats.accumulate(log_mel(utts_[ui], s, 0.0));
    stats.accumulate(log_mel(utts_[ui], s, 1.0));
  }
  return stats;
}

template <typename T>
Batch<T> SegmentSet::make_batch(const std::vector<std::size_t>& segments, const std::vector<double>& attenuation_db,
                                const dsp::NormStats& stats) const {
  require(!segments.empty() && segments.size() == attenuation_db.size(), "make_batch: need one attenuation per segment");
  const std::size_t n = segments.size();
  Batch<T> b;
  b.segments = segments;
  b.clean = Tensor<T>({n, 1, dsp::kMelBands, dsp::kSegmentFrames});
  b.noisy = Tensor<T>({n, 1, dsp::kMelBands, dsp::kSegmentFrames});
  b.video = Tensor<T>({n, dsp::kVideoFramesPerSegment, corpus::kFrameSize, corpus::kFrameSize});
  for (std::size_t i = 0; i < n; ++i) {
    require(segments[i] < index_.size(), "make_batch: segment index out of range");
    const auto [ui, s] = index_[segments[i]];
    const Utterance& u = utts_[ui];
    dsp::LogMelSegment c, y;
    c.values = log_mel(u, s, 0.0);
    y.values = log_mel(u, s, std::pow(10.0, attenuation_db[i] / 20));
    const auto cn = dsp::normalize(c, stats), yn = dsp::normalize(y, stats);
    for (std::size_t m = 0; m < dsp::kMelBands; ++m)
      for (std::size_t t = 0; t < dsp::kSegmentFrames; ++t) {
        b.clean.at(i, 0, m, t) = T(cn.values(long(m), long(t)));
        b.noisy.at(i, 0, m, t) = T(yn.values(long(m), long(t)));
      }
    const std::uint8_t* px = u.video.data() + std::size_t(s) * dsp::kVideoFramesPerSegment * kPixels;
    T* dst = b.video.data().data() + i * dsp::kVideoFramesPerSegment * kPixels;
    for (std::size_t p = 0; p < dsp::kVideoFramesPerSegment * kPixels; ++p) dst[p] = T(px[p]) / T(255);
  }
  return b;
}

template Batch<float> SegmentSet::make_batch(const std::vector<std::size_t>&, const std::vector<double>&,
                                             const dsp::NormStats&) const;
template Batch<double> SegmentSet::make_batch(const std::vector<std::size_t>&, const std::vector<double>&,
                                              const dsp::NormStats&) const;

}  // namespace vsegan::train
