#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "vsegan/trainer.hpp"

namespace vsegan::train {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566, kAttenuationStream = 0x6174746e, kLatentStream = 0x6c617465;

struct ValUtterance {
  std::string id;
  dsp::Waveform clean, noisy;
  std::vector<io::GrayImage> frames;
};

std::vector<ValUtterance> load_validation(const TrainConfig& cfg) {
  std::vector<ValUtterance> out;
  if (cfg.val_manifest.empty()) return out;
  const auto m = corpus::load_manifest(cfg.val_manifest);
  for (const auto& row : m.rows) {
    if (cfg.val_utterances && out.size() == cfg.val_utterances) break;
    ValUtterance v;
    v.id = row.id;
    v.clean = io::read_wav(m.base_dir / row.wav);
    v.frames = io::read_frames(m.base_dir / row.frames);
    v.noisy = dsp::mix_at_snr(v.clean, corpus::row_noise(m, row, v.clean.size()), row.snr_db);
    out.push_back(std::move(v));
  }
  return out;
}

// Keys that may differ between a checkpoint and the config resuming it.
bool resumable_key(const std::string& k) { return k == "epochs" || k == "out_dir"; }

void check_resume_compatible(const TrainConfig& ckpt_cfg, const TrainConfig& cfg) {
  const auto a = nlohmann::json::parse(to_json(ckpt_cfg)), b = nlohmann::json::parse(to_json(cfg));
  for (const auto& [key, v] : a.items())
    if (!resumable_key(key) && b.at(key) != v)
      throw ContractViolation("resume: config key '" + key + "' differs from the checkpoint (" + v.dump() + " vs " +
                              b.at(key).dump() + ")");
}

template <typename T>
void dump_batch(const fs::path& path, const Batch<T>& b) {
  ckpt::Container c;
  c.config_json = "{}";
  c.records.push_back(ckpt::tensor_record("batch.clean", b.clean));
  c.records.push_back(ckpt::tensor_record("batch.noisy", b.noisy));
  c.records.push_back(ckpt::tensor_record("batch.video", b.video));
  c.records.push_back(ckpt::u64_record("batch.segments", {b.segments.begin(), b.segments.end()}));
  ckpt::save(path, c);
}

template <typename T>
TrainResult run(const TrainConfig& cfg, const TrainOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  auto log = [&opt](const std::string& s) {
    if (opt.log) opt.log(s);
  };
  auto elapsed = [&t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  char buf[512];

  require(!cfg.train_manifest.empty(), "config: train_manifest must be set");
  const fs::path out_dir = cfg.out_dir;
  fs::create_directories(out_dir);
  const SegmentSet data(corpus::load_manifest(cfg.train_manifest));
  const auto val = load_validation(cfg);
  std::snprintf(buf, sizeof buf, "loaded %zu training utterances (%zu segments), %zu validation utterances",
                data.utterances(), data.size(), val.size());
  log(buf);

  GanModels<T> models(cfg.net_config(), cfg.lr);
  RunState st;
  if (opt.resume) {
    st = load_checkpoint(*opt.resume, models);
    check_resume_compatible(st.config, cfg);
    require(st.epoch <= cfg.epochs, "resume: checkpoint is past the configured number of epochs");
    st.config = cfg;
    log("resumed from " + opt.resume->string() + " after epoch " + std::to_string(st.epoch));
  } else {
    st.config = cfg;
    st.stats = data.compute_stats();
    st.rng = Rng(derive_seed(cfg.seed, kShuffleStream));
  }
  std::snprintf(buf, sizeof buf, "log-mel range [%.3f, %.3f]; G %zu parameters, D %zu parameters", st.stats.min,
                st.stats.max, models.g.store().parameter_count(), models.d.store().parameter_count());
  log(buf);

  const dsp::AttenuationSampler sampler(derive_seed(cfg.seed, kAttenuationStream), cfg.attenuation_lo_db,
                                        cfg.attenuation_hi_db);
  TrainResult result;
  result.metrics_path = out_dir / "metrics.csv";
  const std::size_t last_epoch = opt.stop_after_epoch ? std::min(opt.stop_after_epoch, cfg.epochs) : cfg.epochs;

  for (std::size_t epoch = st.epoch + 1; epoch <= last_epoch; ++epoch) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    st.rng.shuffle(order.begin(), order.end());

    EpochMetrics em;
    em.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + long(b0),
                                         order.begin() + long(std::min(order.size(), b0 + cfg.batch_size)));
      std::vector<double> att(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) att[i] = sampler.draw(st.step, i);
      Batch<T> batch = data.make_batch<T>(idx, att, st.stats);
      if (cfg.latent_noise) {
        Rng lr(derive_seed(cfg.seed, kLatentStream, st.step));
        batch.latent = Tensor<T>({idx.size(), 1, dsp::kMelBands, dsp::kSegmentFrames});
        for (auto& v : batch.latent.data()) v = T(lr.normal());
      }
      StepResult r;
      try {
        r = train_step(models, batch, cfg.lambda, st.step);
      } catch (const NonFiniteError& e) {
        const fs::path dump = out_dir / ("nonfinite_step_" + std::to_string(st.step) + ".vsgn");
        dump_batch(dump, batch);
        throw NonFiniteError(std::string(e.what()) + "; batch written to " + dump.string());
      }
      em.d_loss += r.losses.d_loss;
      em.g_adv += r.losses.g_adv;
      em.g_l1 += r.losses.g_l1;
      ++steps;
      ++st.step;
      if (st.step % 100 == 0) {
        std::snprintf(buf, sizeof buf, "epoch %zu step %llu: d_loss %.4f g_adv %.4f g_l1 %.4f (%.0f s)", epoch,
                      (unsigned long long)st.step, r.losses.d_loss, r.losses.g_adv, r.losses.g_l1, elapsed());
        log(buf);
      }
    }
    em.d_loss /= double(steps);
    em.g_adv /= double(steps);
    em.g_l1 /= double(steps);
    em.g_total = em.g_adv + cfg.lambda * em.g_l1;
    em.step = st.step;

    em.val_stoi = em.val_sisdr = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      std::vector<double> s, d;
      for (const auto& v : val) {
        const auto e = enhance(models.g, st.stats, v.noisy, v.frames);
        dsp::Waveform c = v.clean;
        c.samples.resize(e.size());
        s.push_back(metrics::stoi(c, e));
        d.push_back(metrics::si_sdr(c.samples, e.samples));
      }
      em.val_stoi = metrics::median(s);
      em.val_sisdr = metrics::median(d);
    }

    st.epoch = epoch;
    st.history.push_back(em);
    result.final_checkpoint = epoch_checkpoint_path(out_dir, epoch);
    save_checkpoint(result.final_checkpoint, st, models);
    io::write_text(result.metrics_path, metrics_csv(st.history));
    std::snprintf(buf, sizeof buf, "epoch %zu/%zu: d_loss %.4f g_adv %.4f g_l1 %.4f val STOI %.3f SI-SDR %.2f dB (%.0f s)",
                  epoch, cfg.epochs, em.d_loss, em.g_adv, em.g_l1, em.val_stoi, em.val_sisdr, elapsed());
    log(buf);
  }
  if (result.final_checkpoint.empty() && st.epoch > 0) result.final_checkpoint = epoch_checkpoint_path(out_dir, st.epoch);
  io::write_text(result.metrics_path, metrics_csv(st.history));
  result.epochs = st.history;
  result.seconds = elapsed();
  return result;
}

}  // namespace

fs::path epoch_checkpoint_path(const fs::path& out_dir, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%03zu.vsgn", epoch);
  return out_dir / name;
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  return config.precision == "float64" ? run<double>(config, options) : run<float>(config, options);
}

}  // namespace vsegan::train
