#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "vsegan/corpus.hpp"
#include "vsegan/rng.hpp"

namespace vsegan::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::array<SeedRange, 3> CorpusConfig::resolved_seed_ranges() const {
  if (seed_ranges) return *seed_ranges;
  const std::uint64_t base = seed * 10'000'000ULL;
  return {SeedRange{base, n_train}, SeedRange{base + 1'000'000, n_val}, SeedRange{base + 2'000'000, n_test}};
}

std::string manifest_to_json(const Manifest& m) {
  json rows = json::array();
  for (const auto& r : m.rows) {
    json j = {{"id", r.id},
              {"utterance_seed", r.utterance_seed},
              {"duration_s", r.duration_s},
              {"noise_category", r.noise_category},
              {"noise_seed", r.noise_seed},
              {"snr_db", r.snr_db},
              {"wav", r.wav},
              {"frames", r.frames}};
    if (!r.noise_wav.empty()) j["noise_wav"] = r.noise_wav;
    rows.push_back(std::move(j));
  }
  json doc = {{"split", m.split}, {"sample_rate_hz", dsp::kSampleRate}, {"fps", dsp::kVideoFps}, {"rows", rows}};
  return doc.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text, const fs::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  try {
    const json doc = json::parse(text);
    if (doc.value("sample_rate_hz", dsp::kSampleRate) != dsp::kSampleRate)
      throw ContractViolation("manifest sample rate must be 16000 Hz");
    m.split = doc.value("split", "");
    for (const auto& j : doc.at("rows")) {
      ManifestRow r;
      r.id = j.at("id").get<std::string>();
      r.utterance_seed = j.value("utterance_seed", std::uint64_t{0});
      r.duration_s = j.value("duration_s", 0.0);
      r.noise_category = j.value("noise_category", "");
      r.noise_seed = j.value("noise_seed", std::uint64_t{0});
      r.snr_db = j.at("snr_db").get<double>();
      r.wav = j.at("wav").get<std::string>();
      r.frames = j.at("frames").get<std::string>();
      r.noise_wav = j.value("noise_wav", "");
      m.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  return manifest_from_json(io::read_text(path), path.parent_path());
}

void save_manifest(const fs::path& path, const Manifest& m) { io::write_text(path, manifest_to_json(m)); }

dsp::Waveform row_noise(const Manifest& m, const ManifestRow& row, std::size_t n_samples) {
  if (!row.noise_wav.empty()) {
    auto w = io::read_wav(m.base_dir / row.noise_wav);
    w.samples = dsp::fit_length(w.samples, n_samples);
    return w;
  }
  return synth_noise(row.noise_category, row.noise_seed, n_samples);
}

CorpusManifests build_corpus(const CorpusConfig& c) {
  const auto ranges = c.resolved_seed_ranges();
  const char* names[3] = {"train", "val", "test"};
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      require(!ranges[a].overlaps(ranges[b]),
              std::string("utterance seed ranges of ") + names[a] + " and " + names[b] + " overlap");
  require(c.min_duration_s >= 0.4 && c.max_duration_s >= c.min_duration_s, "invalid utterance duration range");
  require(c.train_snr_hi_db >= c.train_snr_lo_db, "invalid training SNR range");
  for (const auto& h : c.holdout_noise)
    require(std::find(kNoiseCategories.begin(), kNoiseCategories.end(), h) != kNoiseCategories.end(),
            "unknown held-out noise category '" + h + "'");

  std::vector<std::string> train_pool, eval_pool;
  for (auto cat : kNoiseCategories) {
    const bool held = std::find(c.holdout_noise.begin(), c.holdout_noise.end(), cat) != c.holdout_noise.end();
    if (!held) train_pool.emplace_back(cat);
    if (held || c.holdout_noise.empty()) eval_pool.emplace_back(cat);
  }
  require(!train_pool.empty(), "every noise category is held out");

  CorpusManifests out;
  Manifest* splits[3] = {&out.train, &out.val, &out.test};
  for (int s = 0; s < 3; ++s) {
    Manifest& m = *splits[s];
    m.split = names[s];
    m.base_dir = c.out_dir;
    const auto& pool = s == 0 ? train_pool : eval_pool;
    for (std::uint64_t i = 0; i < ranges[s].count; ++i) {
      Rng rng(derive_seed(c.seed, 100 + s, i));
      ManifestRow r;
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04llu", names[s], static_cast<unsigned long long>(i));
      r.id = id;
      r.utterance_seed = ranges[s].begin + i;
      // Whole 200 ms segments keep audio and video trivially aligned.
      const double d = rng.uniform(c.min_duration_s, c.max_duration_s);
      r.duration_s = std::max(0.4, std::round(d / 0.2) * 0.2);
      r.noise_category = pool[i % pool.size()];
      r.noise_seed = rng.next_u64() >> 11;
      r.snr_db = s == 0 ? rng.uniform(c.train_snr_lo_db, c.train_snr_hi_db) : c.test_snr_db;
      r.wav = std::string(names[s]) + "/" + r.id + "/clean.wav";
      r.frames = std::string(names[s]) + "/" + r.id + "/frames";

      const auto u = synth_utterance(r.utterance_seed, r.duration_s);
      io::write_wav(c.out_dir / r.wav, u.clean);
      io::write_frames(c.out_dir / r.frames, u.frames);
      if (s != 0) {
        // Convenience input for the enhance command.
        const auto noise = row_noise(m, r, u.clean.size());
        io::write_wav(c.out_dir / names[s] / r.id / "noisy.wav", dsp::mix_at_snr(u.clean, noise, r.snr_db));
      }
      m.rows.push_back(std::move(r));
    }
    save_manifest(c.out_dir / (std::string(names[s]) + ".json"), m);
  }
  return out;
}

}  // namespace vsegan::corpus
