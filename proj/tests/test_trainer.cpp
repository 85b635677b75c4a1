#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vsegan/trainer.hpp"

namespace vsegan::train {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("vsegan_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// A tiny corpus shared by the whole suite: 4 train, 2 val, 2 test utterances.
class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch("trainer_corpus"));
    corpus::CorpusConfig c;
    c.out_dir = *dir_;
    c.n_train = 4;
    c.n_val = 2;
    c.n_test = 2;
    c.seed = 7;
    c.min_duration_s = 1.6;
    c.max_duration_s = 2.0;
    corpus::build_corpus(c);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  static TrainConfig tiny_config(const std::string& out) {
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 4;
    c.width_scale = 6;
    c.train_manifest = (*dir_ / "train.json").string();
    c.val_manifest = (*dir_ / "val.json").string();
    c.out_dir = scratch(out).string();
    return c;
  }

  static fs::path* dir_;
};

fs::path* TrainerTest::dir_ = nullptr;

TEST(TrainConfig, DefaultsMatchFullRegime) {
  const TrainConfig c;
  EXPECT_EQ(c.lr, 1e-4);
  EXPECT_EQ(c.epochs, 70u);
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.lambda, 100.0);
  EXPECT_EQ(c.attenuation_lo_db, -15.0);
  EXPECT_EQ(c.attenuation_hi_db, 0.0);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.lr = 3e-4;
  c.width_scale = 4;
  c.train_manifest = "a/train.json";
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));

  EXPECT_THROW(config_from_json(R"({"lambda": -1})"), ContractViolation);
  EXPECT_THROW(config_from_json(R"({"epochs": -3})"), ContractViolation);
  EXPECT_THROW(config_from_json(R"({"batch_size": 0})"), ContractViolation);
  EXPECT_THROW(config_from_json(R"({"precision": "float16"})"), ContractViolation);
  EXPECT_THROW(config_from_json(R"({"attenuation_db": [0, -15]})"), ContractViolation);
  try {
    config_from_json(R"({"learning_rate": 0.1})");
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(Checkpoint, ContainerRoundTripAndCorruption) {
  ckpt::Container c;
  c.config_json = R"({"a": 1})";
  c.records.push_back(ckpt::tensor_record("w", Tensor<float>({2, 3}, 1.5f)));
  c.records.push_back(ckpt::tensor_record("x", Tensor<double>({4}, -2.0)));
  c.records.push_back(ckpt::u64_record("n", {7, 9}));
  c.rng_state = "state";
  const std::string bytes = ckpt::encode(c);
  ASSERT_EQ(bytes.substr(0, 4), "VSGN");
  const auto d = ckpt::decode(bytes);
  EXPECT_EQ(ckpt::encode(d), bytes);
  EXPECT_EQ(ckpt::read_u64(d, "n"), (std::vector<std::uint64_t>{7, 9}));
  Tensor<double> w({2, 3});
  ckpt::read_tensor(d, "w", w);
  EXPECT_EQ(w[5], 1.5);

  for (std::size_t pos : {std::size_t(20), bytes.size() / 2, bytes.size() - 1}) {
    std::string bad = bytes;
    bad[pos] ^= 0x10;
    EXPECT_THROW(ckpt::decode(bad), IntegrityError) << "flip at " << pos;
  }
  EXPECT_THROW(ckpt::decode(bytes.substr(0, bytes.size() - 5)), IntegrityError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(ckpt::decode(magic), IntegrityError);
  std::string version = bytes;
  version[4] = 2;
  try {
    ckpt::decode(version);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  Tensor<double> wrong({3, 2});
  EXPECT_THROW(ckpt::read_tensor(d, "w", wrong), IntegrityError);
}

TEST_F(TrainerTest, BatchesAreNormalisedAndAttenuationLowersNoise) {
  const SegmentSet set(corpus::load_manifest(*dir_ / "train.json"));
  EXPECT_EQ(set.utterances(), 4u);
  EXPECT_GE(set.size(), 32u);  // >= 1.6 s each
  const auto stats = set.compute_stats();
  ASSERT_TRUE(stats.valid);
  const auto loud = set.make_batch<float>({0, 1}, {0.0, 0.0}, stats);
  const auto quiet = set.make_batch<float>({0, 1}, {-15.0, -15.0}, stats);
  EXPECT_EQ(loud.clean.shape(), (Shape{2, 1, 80, 20}));
  EXPECT_EQ(loud.video.shape(), (Shape{2, 5, 80, 80}));
  double d_loud = 0, d_quiet = 0;
  for (std::size_t i = 0; i < loud.clean.size(); ++i) {
    EXPECT_LE(std::abs(loud.noisy[i]), 1.0f);
    d_loud += std::abs(loud.noisy[i] - loud.clean[i]);
    d_quiet += std::abs(quiet.noisy[i] - quiet.clean[i]);
  }
  EXPECT_LT(d_quiet, d_loud);
  EXPECT_EQ(loud.clean, quiet.clean);
  for (float v : loud.video.data()) ASSERT_TRUE(v >= 0 && v <= 1);
}

TEST_F(TrainerTest, StepHonoursFreezingContract) {
  const SegmentSet set(corpus::load_manifest(*dir_ / "train.json"));
  const auto stats = set.compute_stats();
  GanModels<float> m(tiny_config("freeze").net_config(), 1e-3);
  for (std::uint64_t step = 0; step < 3; ++step) {
    const auto b = set.make_batch<float>({step, step + 4, step + 8}, {-3.0, -7.0, -11.0}, stats);
    const auto r = train_step(m, b, 100.0, step);
    EXPECT_NE(r.d_hash_after_d_step, r.d_hash_before) << "D did not move in its step";
    EXPECT_EQ(r.g_hash_after_d_step, r.g_hash_before) << "G moved during the D step";
    EXPECT_NE(r.g_hash_after, r.g_hash_after_d_step) << "G did not move in its step";
    EXPECT_EQ(r.d_hash_after, r.d_hash_after_d_step) << "D moved during the G step";
    EXPECT_GE(r.losses.d_loss, 0.0);
    EXPECT_DOUBLE_EQ(r.losses.g_total, r.losses.g_adv + 100.0 * r.losses.g_l1);
  }
  // The discriminator is trainable again after the step.
  for (const auto& p : m.d.store().params()) EXPECT_TRUE(p.var.requires_grad());
}

TEST_F(TrainerTest, IdenticalSeedsGiveIdenticalLosses) {
  const SegmentSet set(corpus::load_manifest(*dir_ / "train.json"));
  const auto stats = set.compute_stats();
  const auto cfg = tiny_config("determinism");
  GanModels<float> a(cfg.net_config(), 1e-4), b(cfg.net_config(), 1e-4);
  for (std::uint64_t step = 0; step < 10; ++step) {
    const auto batch = set.make_batch<float>({step % 16, (step * 5 + 1) % 16}, {-1.0, -9.0}, stats);
    const auto ra = train_step(a, batch, 100.0, step), rb = train_step(b, batch, 100.0, step);
    ASSERT_EQ(ra.losses.d_loss, rb.losses.d_loss);
    ASSERT_EQ(ra.losses.g_total, rb.losses.g_total);
  }
}

TEST_F(TrainerTest, NonFiniteInputNamesStepAndBatch) {
  const SegmentSet set(corpus::load_manifest(*dir_ / "train.json"));
  const auto stats = set.compute_stats();
  GanModels<float> m(tiny_config("nonfinite").net_config(), 1e-4);
  auto b = set.make_batch<float>({2, 5}, {0.0, 0.0}, stats);
  b.noisy[7] = std::nanf("");
  try {
    train_step(m, b, 100.0, 42);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 42"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2,5]"), std::string::npos) << msg;
  }
  for (const auto& p : m.d.store().params()) EXPECT_TRUE(p.var.requires_grad());
}

TEST_F(TrainerTest, DiscriminatorOptimumBeatsChance) {
  // G fixed: D alone on real vs generated pairs drives d_loss below 0.5.
  const SegmentSet set(corpus::load_manifest(*dir_ / "train.json"));
  const auto stats = set.compute_stats();
  GanModels<float> m(tiny_config("dopt").net_config(), 1e-3);
  const auto b = set.make_batch<float>({0, 3, 6, 9, 12, 15}, {0, 0, 0, 0, 0, 0}, stats);
  Var<float> clean(b.clean), noisy(b.noisy), video(b.video);
  Tensor<float> fake;
  {
    NoGradGuard ng;
    fake = m.g.forward(noisy, video, BatchNormMode::kEval).value();
  }
  double first = 0, last = 0;
  for (int it = 0; it < 150; ++it) {
    m.d.store().zero_grad();
    auto dl = d_loss(m.d.forward(clean, noisy, BatchNormMode::kTrain),
                     m.d.forward(Var<float>(fake), noisy, BatchNormMode::kTrain));
    dl.backward();
    m.opt_d.step();
    (it == 0 ? first : last) = dl.item();
  }
  EXPECT_GE(last, 0.0);
  EXPECT_LT(last, 0.5);
  EXPECT_LT(last, first);
}

TEST_F(TrainerTest, CheckpointSaveLoadSaveIsByteIdentical) {
  const auto cfg = tiny_config("ckpt");
  const SegmentSet set(corpus::load_manifest(cfg.train_manifest));
  RunState st;
  st.config = cfg;
  st.stats = set.compute_stats();
  st.epoch = 2;
  st.step = 17;
  st.rng = Rng(99);
  st.rng.normal();  // leaves a cached spare in the state
  st.history.push_back({1, 8, 0.4, 0.3, 0.2, 20.3, 0.7, 3.5});
  GanModels<float> m(cfg.net_config(), cfg.lr);
  train_step(m, set.make_batch<float>({0, 1, 2}, {0, -1, -2}, st.stats), cfg.lambda, 0);

  const fs::path a = fs::path(cfg.out_dir) / "a.vsgn", b = fs::path(cfg.out_dir) / "b.vsgn";
  save_checkpoint(a, st, m);
  GanModels<float> m2(cfg.net_config(), cfg.lr);
  const RunState st2 = load_checkpoint(a, m2);
  save_checkpoint(b, st2, m2);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(st2.step, 17u);
  EXPECT_EQ(st2.history.size(), 1u);
  EXPECT_EQ(m2.g.store().hash(), m.g.store().hash());
  EXPECT_EQ(m2.opt_g.state().step_count, 1u);

  auto wide = cfg;
  wide.width_scale = 5;
  GanModels<float> m3(wide.net_config(), cfg.lr);
  try {
    load_checkpoint(a, m3);
    FAIL() << "expected a shape error";
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("g.audio.conv1.weight"), std::string::npos) << e.what();
  }

  std::string bytes = slurp(a);
  bytes[bytes.size() / 3] ^= 0x01;
  const fs::path bad = fs::path(cfg.out_dir) / "bad.vsgn";
  std::ofstream(bad, std::ios::binary) << bytes;
  EXPECT_THROW(load_checkpoint(bad, m2), IntegrityError);
}

TEST_F(TrainerTest, ResumeReproducesUninterruptedRun) {
  const auto full_cfg = tiny_config("run_full");
  const auto full = train(full_cfg);
  ASSERT_EQ(full.epochs.size(), 3u);
  const std::string csv = slurp(full.metrics_path);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,step,d_loss,g_adv,g_l1,g_total,val_stoi,val_sisdr");
  for (const auto& e : full.epochs) {
    EXPECT_TRUE(std::isfinite(e.val_stoi));
    EXPECT_TRUE(std::isfinite(e.val_sisdr));
  }

  auto part_cfg = tiny_config("run_part");
  TrainOptions first;
  first.stop_after_epoch = 1;
  const auto part = train(part_cfg, first);
  ASSERT_EQ(part.epochs.size(), 1u);
  TrainOptions rest;
  rest.resume = epoch_checkpoint_path(part_cfg.out_dir, 1);
  const auto resumed = train(part_cfg, rest);

  EXPECT_EQ(slurp(resumed.metrics_path), csv);
  // Only out_dir differs inside the config JSON, so compare everything after it.
  auto strip = [](std::string s) {
    const auto c = ckpt::decode(s);
    return std::make_pair(c.records.size(), ckpt::encode({"", c.records, c.rng_state}));
  };
  EXPECT_EQ(strip(slurp(resumed.final_checkpoint)), strip(slurp(full.final_checkpoint)));

  // Full-run determinism: a second uninterrupted run has the same log.
  const auto again = train(tiny_config("run_again"));
  EXPECT_EQ(slurp(again.metrics_path), csv);
}

TEST_F(TrainerTest, ResumeRejectsCorruptOrIncompatibleCheckpoint) {
  auto cfg = tiny_config("run_corrupt");
  cfg.epochs = 1;
  const auto r = train(cfg);
  std::string bytes = slurp(r.final_checkpoint);
  bytes[bytes.size() - 100] ^= 0x40;
  const fs::path bad = fs::path(cfg.out_dir) / "bad.vsgn";
  std::ofstream(bad, std::ios::binary) << bytes;
  TrainOptions opt;
  opt.resume = bad;
  cfg.epochs = 2;
  EXPECT_THROW(train(cfg, opt), IntegrityError);

  opt.resume = r.final_checkpoint;
  auto other = cfg;
  other.lambda = 10;
  EXPECT_THROW(train(other, opt), ContractViolation);
}

TEST_F(TrainerTest, EnhanceTruncatesToWholeSegmentsAndChecksAlignment) {
  auto cfg = tiny_config("enhance");
  cfg.epochs = 1;
  const auto r = train(cfg);
  Enhancer e(r.final_checkpoint);
  const auto m = corpus::load_manifest(*dir_ / "test.json");
  const auto& row = m.rows[0];
  const auto noisy = io::read_wav(m.base_dir / fs::path(row.wav).parent_path() / "noisy.wav");
  auto frames = io::read_frames(m.base_dir / row.frames);
  const auto out = e.enhance(noisy, frames);
  EXPECT_EQ(out.size(), dsp::segment_count(noisy.size()) * dsp::kSegmentSamples);
  for (double v : out.samples) ASSERT_TRUE(std::isfinite(v));
  EXPECT_GT(dsp::power(out.samples), 0.0);

  auto short_frames = frames;
  short_frames.resize(frames.size() - 5);
  EXPECT_THROW(e.enhance(noisy, short_frames), ContractViolation);
  EXPECT_THROW(e.enhance(noisy, {}), ContractViolation);
}

TEST_F(TrainerTest, EvaluateRowCountAndDeterminism) {
  auto cfg = tiny_config("evaluate");
  cfg.epochs = 1;
  const auto r = train(cfg);
  const auto m = corpus::load_manifest(*dir_ / "test.json");
  const auto a = evaluate(r.final_checkpoint, m, {-5.0, 0.0});
  EXPECT_EQ(a.rows.size(), m.rows.size() * 2 * 2);
  ASSERT_EQ(a.summary.size(), 2u);
  EXPECT_EQ(a.summary[0].utterances, m.rows.size());
  for (const auto& row : a.rows) {
    EXPECT_GE(row.stoi, 0.0);
    EXPECT_LE(row.stoi, 1.0);
  }
  EXPECT_EQ(evaluate(r.final_checkpoint, m, {-5.0, 0.0}).csv(), a.csv());
}

}  // namespace
}  // namespace vsegan::train
