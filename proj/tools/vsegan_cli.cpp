// vsegan: command-line front end for corpus synthesis, training, enhancement
// and evaluation. Exit codes: 0 success, 1 other failure (including a failed
// gradient check), 2 usage, 3 contract violation, 4 integrity error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "vsegan/corpus.hpp"
#include "vsegan/gradient_suite.hpp"
#include "vsegan/io.hpp"
#include "vsegan/trainer.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace vsegan;

constexpr int kExitFailure = 1, kExitUsage = 2, kExitContract = 3, kExitIntegrity = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void log_line(const std::string& s) { std::cerr << s << std::endl; }

// Flags win over the config file: each set flag overwrites its key.
json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ContractViolation("config " + path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ContractViolation("config " + path + ": top level must be an object");
  return j;
}

void echo(const std::string& command, const json& resolved) {
  std::cout << json{{"command", command}, {"config", resolved}}.dump(2) << std::endl;
}

std::vector<double> parse_snr_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size() || !std::isfinite(v))
      throw UsageError("--snr: '" + item + "' is not a number in list '" + s + "'");
    out.push_back(v);
  }
  if (out.empty() || (!s.empty() && s.back() == ',')) throw UsageError("--snr: malformed list '" + s + "'");
  return out;
}

// synth-data -------------------------------------------------------------

struct SynthFlags {
  std::string config, out;
  std::optional<std::size_t> train, val, test;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthFlags& f) {
  json j = load_config_file(f.config);
  if (!f.out.empty()) j["out"] = f.out;
  if (f.train) j["train"] = *f.train;
  if (f.val) j["val"] = *f.val;
  if (f.test) j["test"] = *f.test;
  if (f.seed) j["seed"] = *f.seed;
  if (!j.contains("out")) throw UsageError("synth-data: --out is required");

  corpus::CorpusConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "out") c.out_dir = v.get<std::string>();
      else if (key == "train") c.n_train = v.get<std::size_t>();
      else if (key == "val") c.n_val = v.get<std::size_t>();
      else if (key == "test") c.n_test = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "min_duration_s") c.min_duration_s = v.get<double>();
      else if (key == "max_duration_s") c.max_duration_s = v.get<double>();
      else if (key == "train_snr_db") {
        require(v.is_array() && v.size() == 2, "synth-data: train_snr_db must be [lo, hi]");
        c.train_snr_lo_db = v[0].get<double>();
        c.train_snr_hi_db = v[1].get<double>();
      } else if (key == "test_snr_db") c.test_snr_db = v.get<double>();
      else if (key == "holdout_noise") c.holdout_noise = v.get<std::vector<std::string>>();
      else throw ContractViolation("synth-data: unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ContractViolation("synth-data: bad value for '" + key + "': " + e.what());
    }
  }
  const json resolved = {{"out", c.out_dir.string()},
                         {"train", c.n_train},
                         {"val", c.n_val},
                         {"test", c.n_test},
                         {"seed", c.seed},
                         {"min_duration_s", c.min_duration_s},
                         {"max_duration_s", c.max_duration_s},
                         {"train_snr_db", {c.train_snr_lo_db, c.train_snr_hi_db}},
                         {"test_snr_db", c.test_snr_db},
                         {"holdout_noise", c.holdout_noise}};
  echo("synth-data", resolved);
  const auto m = corpus::build_corpus(c);
  log_line("wrote " + std::to_string(m.train.rows.size()) + "/" + std::to_string(m.val.rows.size()) + "/" +
           std::to_string(m.test.rows.size()) + " utterances to " + c.out_dir.string());
  return 0;
}

// train --------------------------------------------------------------------

struct TrainFlags {
  std::string config, resume, out_dir, train_manifest, val_manifest, precision;
  std::optional<double> lr, lambda;
  std::optional<std::size_t> epochs, batch_size, stop_after;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> width_scale;
};

int run_train(const TrainFlags& f) {
  json j = load_config_file(f.config);
  if (f.lr) j["lr"] = *f.lr;
  if (f.lambda) j["lambda"] = *f.lambda;
  if (f.epochs) j["epochs"] = *f.epochs;
  if (f.batch_size) j["batch_size"] = *f.batch_size;
  if (f.seed) j["seed"] = *f.seed;
  if (f.width_scale) j["width_scale"] = *f.width_scale;
  if (!f.out_dir.empty()) j["out_dir"] = f.out_dir;
  if (!f.train_manifest.empty()) j["train_manifest"] = f.train_manifest;
  if (!f.val_manifest.empty()) j["val_manifest"] = f.val_manifest;
  if (!f.precision.empty()) j["precision"] = f.precision;
  const train::TrainConfig cfg = train::config_from_json(j.dump());
  echo("train", json::parse(train::to_json(cfg)));

  train::TrainOptions opt;
  if (!f.resume.empty()) opt.resume = f.resume;
  if (f.stop_after) opt.stop_after_epoch = *f.stop_after;
  opt.log = log_line;
  const auto r = train::train(cfg, opt);
  log_line("final checkpoint " + r.final_checkpoint.string() + ", metrics " + r.metrics_path.string());
  return 0;
}

// enhance ----------------------------------------------------------------

int run_enhance(const std::string& ckpt, const std::string& wav, const std::string& frames, const std::string& out) {
  echo("enhance", {{"ckpt", ckpt}, {"wav", wav}, {"frames", frames}, {"out", out}});
  train::Enhancer e(ckpt);
  const auto noisy = io::read_wav(wav);
  const auto enhanced = e.enhance(noisy, io::read_frames(frames));
  io::write_wav(out, enhanced);
  char buf[160];
  std::snprintf(buf, sizeof buf, "wrote %.2f s of enhanced audio (input %.2f s)", enhanced.duration_s(),
                noisy.duration_s());
  log_line(buf);
  return 0;
}

// evaluate -----------------------------------------------------------------

int run_evaluate(const std::string& ckpt, const std::string& manifest, const std::string& snr, const std::string& out) {
  const auto snrs = parse_snr_list(snr);
  echo("evaluate", {{"ckpt", ckpt}, {"manifest", manifest}, {"snr", snrs}, {"out", out}});
  const auto report = train::evaluate(ckpt, corpus::load_manifest(manifest), snrs);
  io::write_text(out, report.csv());
  std::cout << report.summary_text();
  return 0;
}

// export-spec --------------------------------------------------------------

int run_export_spec(const std::string& wav, const std::string& out) {
  echo("export-spec", {{"wav", wav}, {"out", out}});
  const auto lm = dsp::log_mel_spectrogram(dsp::magnitude(dsp::stft(io::read_wav(wav))));
  io::GrayImage img;
  img.width = std::size_t(lm.cols());
  img.height = std::size_t(lm.rows());
  img.pixels.resize(img.width * img.height);
  const double lo = lm.minCoeff(), hi = lm.maxCoeff();
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      // Low frequencies at the bottom of the image.
      const double v = lm(long(img.height - 1 - r), long(c));
      img.at(r, c) = hi > lo ? std::uint8_t(std::lround(255.0 * (v - lo) / (hi - lo))) : 0;
    }
  io::write_pgm(out, img);
  log_line("wrote " + std::to_string(img.height) + " x " + std::to_string(img.width) + " spectrogram to " + out);
  return 0;
}

// gradcheck ------------------------------------------------------------------

int run_gradcheck(unsigned scale, std::uint64_t seed, std::size_t per_group) {
  echo("gradcheck", {{"scale", scale}, {"seed", seed}, {"per_group", per_group}});
  const auto rep = run_gradient_suite(scale, seed, per_group);
  for (const auto& e : rep.entries) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %-40s max rel err %.3e (tol %.0e, %zu checked, %zu skipped)",
                  e.passed() ? "PASS" : "FAIL", e.name.c_str(), e.max_rel_error, e.tolerance, e.checked, e.skipped);
    std::cout << buf << "\n";
  }
  std::printf("%s in %.1f s\n", rep.passed() ? "all checks passed" : "gradient check FAILED", rep.seconds);
  return rep.passed() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-visual speech enhancement GAN toolkit"};
  app.require_subcommand(1);

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic audio-visual corpus and manifests");
  synth->add_option("--config", sf.config, "JSON config file");
  synth->add_option("--out", sf.out, "Output directory");
  synth->add_option("--train", sf.train, "Training utterances");
  synth->add_option("--val", sf.val, "Validation utterances");
  synth->add_option("--test", sf.test, "Test utterances");
  synth->add_option("--seed", sf.seed, "Corpus seed");

  TrainFlags tf;
  auto* trn = app.add_subcommand("train", "Train generator and discriminator");
  trn->add_option("--config", tf.config, "JSON config file")->check(CLI::ExistingFile);
  trn->add_option("--resume", tf.resume, "Checkpoint to resume from");
  trn->add_option("--lr", tf.lr);
  trn->add_option("--lambda", tf.lambda);
  trn->add_option("--epochs", tf.epochs);
  trn->add_option("--batch-size", tf.batch_size);
  trn->add_option("--seed", tf.seed);
  trn->add_option("--width-scale", tf.width_scale, "Divide channel counts by 2^s");
  trn->add_option("--precision", tf.precision, "float32 or float64");
  trn->add_option("--out-dir", tf.out_dir);
  trn->add_option("--train-manifest", tf.train_manifest);
  trn->add_option("--val-manifest", tf.val_manifest);
  trn->add_option("--stop-after", tf.stop_after, "Stop after this epoch (resume later)");

  std::string e_ckpt, e_wav, e_frames, e_out;
  auto* enh = app.add_subcommand("enhance", "Enhance one noisy recording");
  enh->add_option("--ckpt", e_ckpt)->required();
  enh->add_option("--wav", e_wav)->required();
  enh->add_option("--frames", e_frames, "Directory of 80x80 PGM frames at 25 fps")->required();
  enh->add_option("--out", e_out)->required();

  std::string v_ckpt, v_manifest, v_snr = "-5,0", v_out;
  auto* ev = app.add_subcommand("evaluate", "Score noisy and enhanced speech on a manifest");
  ev->add_option("--ckpt", v_ckpt)->required();
  ev->add_option("--manifest", v_manifest)->required();
  ev->add_option("--snr", v_snr, "Comma-separated SNRs in dB")->capture_default_str();
  ev->add_option("--out", v_out, "CSV output")->required();

  std::string x_wav, x_out;
  auto* exp = app.add_subcommand("export-spec", "Write a log-mel spectrogram as an 8-bit PGM");
  exp->add_option("--wav", x_wav)->required();
  exp->add_option("--out", x_out)->required();

  unsigned g_scale = 8;
  std::uint64_t g_seed = 1;
  std::size_t g_per_group = 20;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and the generator loss");
  gc->add_option("--scale", g_scale, "Width scale of the end-to-end check")->capture_default_str();
  gc->add_option("--seed", g_seed)->capture_default_str();
  gc->add_option("--per-group", g_per_group, "Sampled entries per parameter group")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return run_synth(sf);
    if (*trn) return run_train(tf);
    if (*enh) return run_enhance(e_ckpt, e_wav, e_frames, e_out);
    if (*ev) return run_evaluate(v_ckpt, v_manifest, v_snr, v_out);
    if (*exp) return run_export_spec(x_wav, x_out);
    if (*gc) return run_gradcheck(g_scale, g_seed, g_per_group);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
