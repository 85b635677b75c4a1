#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsegan/dsp.hpp"
#include "vsegan/io.hpp"

namespace vsegan::corpus {

inline constexpr std::size_t kFrameSize = 80;

struct SynthUtterance {
  dsp::Waveform clean;
  std::vector<io::GrayImage> frames;  // 25 fps, 80 x 80
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::vector<double> aperture;  // per frame, in [0, 1], as rendered
};

// Harmonic voice with a random-walk f0, formant emphasis and syllabic
// amplitude modulation; the frames show an ellipse whose height follows the
// same envelope. duration_s >= 0.4.
SynthUtterance synth_utterance(std::uint64_t seed, double duration_s);

// Audio only, used by babble noise.
dsp::Waveform synth_voice(std::uint64_t seed, std::size_t n_samples);

inline constexpr std::array<std::string_view, 12> kNoiseCategories = {
    "white", "pink", "brown", "hum", "chirp", "am_tone", "clicks", "babble", "narrowband", "square", "burst", "ring"};

// Unit-RMS noise of the given category. Unknown names throw ContractViolation
// listing the valid ones.
dsp::Waveform synth_noise(std::string_view category, std::uint64_t seed, std::size_t n_samples);

// Per-frame RMS of the waveform over each 40 ms video frame.
std::vector<double> frame_envelope(const dsp::Waveform& w, std::size_t n_frames);

struct ManifestRow {
  std::string id;
  std::uint64_t utterance_seed = 0;
  double duration_s = 0.0;
  std::string noise_category;
  std::uint64_t noise_seed = 0;
  double snr_db = 0.0;
  std::string wav;     // relative to the manifest directory
  std::string frames;  // directory, relative to the manifest directory
  std::string noise_wav;  // optional user-supplied noise file; empty => synthesized
};

struct Manifest {
  std::string split;
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;  // not serialized; set on load
};

struct SeedRange {
  std::uint64_t begin = 0;
  std::uint64_t count = 0;
  bool overlaps(const SeedRange& o) const {
    return count > 0 && o.count > 0 && begin < o.begin + o.count && o.begin < begin + count;
  }
};

struct CorpusConfig {
  std::filesystem::path out_dir;
  std::size_t n_train = 200, n_val = 20, n_test = 20;
  std::uint64_t seed = 1;
  // Utterance seeds per split default to seed-offset blocks 1e6 apart.
  std::optional<std::array<SeedRange, 3>> seed_ranges;
  double min_duration_s = 2.0, max_duration_s = 3.0;
  double train_snr_lo_db = -5.0, train_snr_hi_db = 0.0;
  double test_snr_db = 0.0;
  std::vector<std::string> holdout_noise;  // used only by val/test when non-empty

  std::array<SeedRange, 3> resolved_seed_ranges() const;
};

struct CorpusManifests {
  Manifest train, val, test;
};

// Writes <out>/<split>.json plus WAV/PGM files per utterance. Throws
// ContractViolation when split seed ranges overlap.
CorpusManifests build_corpus(const CorpusConfig& config);

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& m);

// Noise for a row: the user file when noise_wav is set, else synthesized.
dsp::Waveform row_noise(const Manifest& m, const ManifestRow& row, std::size_t n_samples);

}  // namespace vsegan::corpus
