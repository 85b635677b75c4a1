#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vsegan/grad_check.hpp"
#include "vsegan/net.hpp"

namespace vsegan {
namespace {

using testing::random_tensor;

template <typename T>
Var<T> rand_var(Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
  return Var<T>(random_tensor<T>(std::move(s), seed, lo, hi));
}

NetConfig tiny(unsigned shift = 6) {
  NetConfig c;
  c.width_shift = shift;
  c.init_seed = 5;
  return c;
}

TEST(Architecture, StageDimsFollowLayerTable) {
  const auto d = stage_dims(NetConfig{});
  const std::array<Shape, 5> want = {Shape{64, 40, 10}, Shape{128, 20, 5}, Shape{256, 10, 5}, Shape{512, 5, 5},
                                     Shape{1024, 5, 1}};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(d[k], want[k]) << "stage " << k + 1;
}

// Runs the Table-width encoders on real tensors and compares both streams.
TEST(Architecture, AudioAndVideoStreamsMatchAtEveryStageFullWidth) {
  NoGradGuard ng;
  Generator<float> g(NetConfig{});
  Var<float> a = rand_var<float>({1, 1, 80, 20}, 1);
  Var<float> v = rand_var<float>({1, 5, 80, 80}, 2, 0, 1);
  const auto want = stage_dims(NetConfig{});
  for (std::size_t k = 0; k < 5; ++k) {
    a = g.audio_stage(a, k, BatchNormMode::kEval);
    v = g.video_stage(v, k, BatchNormMode::kEval);
    EXPECT_EQ(a.shape(), v.shape()) << "stage " << k + 1;
    EXPECT_EQ(a.shape(), (Shape{1, want[k][0], want[k][1], want[k][2]}));
  }
  auto skip = g.fusion(a, v, 4, BatchNormMode::kEval);
  EXPECT_EQ(skip.shape(), (Shape{1, 1024, 5, 1}));
  auto h = g.embedding(a, v);
  EXPECT_EQ(h.shape(), (Shape{1, 1024, 5, 1}));

  std::size_t fc = 0;
  for (const auto& p : g.store().params())
    if (p.name.rfind("g.embed.", 0) == 0) fc += p.var.value().size();
  EXPECT_EQ(fc, 10240u * 5120 + 5120 + 5120u * 5120 + 5120);
}

TEST(Architecture, FirstStageShapes) {
  NoGradGuard ng;
  Generator<float> g(tiny(0));
  EXPECT_EQ(g.audio_stage(rand_var<float>({1, 1, 80, 20}, 1), 0, BatchNormMode::kEval).shape(),
            (Shape{1, 64, 40, 10}));
  EXPECT_EQ(g.video_stage(rand_var<float>({1, 5, 80, 80}, 1), 0, BatchNormMode::kEval).shape(),
            (Shape{1, 64, 40, 10}));
}

TEST(Architecture, WrongStageInputNamesStage) {
  Generator<float> g(tiny());
  try {
    g.audio_stage(rand_var<float>({1, 2, 20, 5}, 1), 1, BatchNormMode::kEval);
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("stage 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(g.fusion(rand_var<float>({1, 1, 40, 10}, 1), rand_var<float>({1, 1, 40, 9}, 1), 0, BatchNormMode::kEval),
               ContractViolation);
  EXPECT_THROW(g.decoder_stage(rand_var<float>({1, 16, 5, 1}, 1), rand_var<float>({1, 16, 5, 5}, 1), 0,
                               BatchNormMode::kEval),
               ContractViolation);
}

TEST(Fusion, ZeroInputsGiveZeroOutput) {
  Generator<double> g(tiny(4));
  auto z = Var<double>(Tensor<double>(Shape{1, 4, 40, 10}));
  auto out = g.fusion(z, z, 0, BatchNormMode::kEval);
  for (double x : out.value().data()) EXPECT_EQ(x, 0.0);
}

TEST(Fusion, GradientReachesBothStreams) {
  Generator<double> g(tiny(4));
  Var<double> a(random_tensor<double>({2, 4, 40, 10}, 1), true);
  Var<double> v(random_tensor<double>({2, 4, 40, 10}, 2), true);
  auto out = g.fusion(a, v, 0, BatchNormMode::kTrainFrozenStats);
  sum(mul(out, rand_var<double>(out.shape(), 3))).backward();
  double na = 0, nv = 0;
  for (double x : a.grad().data()) na += x * x;
  for (double x : v.grad().data()) nv += x * x;
  EXPECT_GT(na, 0.0);
  EXPECT_GT(nv, 0.0);
}

TEST(Decoder, RestoresInputDimsEvenWithZeroSkips) {
  NoGradGuard ng;
  Generator<float> g(tiny(3));
  const auto dims = stage_dims(g.config());
  Var<float> h = rand_var<float>({2, dims[4][0], 5, 1}, 4);
  for (std::size_t k = 0; k < 5; ++k) {
    const Shape& s = dims[4 - k];
    h = g.decoder_stage(h, Var<float>(Tensor<float>(Shape{2, s[0], s[1], s[2]})), k, BatchNormMode::kTrain);
  }
  EXPECT_EQ(h.shape(), (Shape{2, 1, 80, 20}));
  for (float x : h.value().data()) {
    EXPECT_LE(x, 1.0f);
    EXPECT_GE(x, -1.0f);
  }
}

TEST(Generator, EvalForwardIsDeterministicAndBounded) {
  NoGradGuard ng;
  Generator<float> g(tiny(4));
  auto y = rand_var<float>({3, 1, 80, 20}, 1);
  auto v = rand_var<float>({3, 5, 80, 80}, 2, 0, 1);
  auto a = g.forward(y, v, BatchNormMode::kEval);
  auto b = g.forward(y, v, BatchNormMode::kEval);
  EXPECT_EQ(a.shape(), (Shape{3, 1, 80, 20}));
  EXPECT_EQ(a.value(), b.value());
  for (float x : a.value().data()) EXPECT_LE(std::abs(x), 1.0f);
}

TEST(Generator, EveryProbedVideoPixelMovesOutput) {
  NoGradGuard ng;
  Generator<double> g(tiny(4));
  auto y = rand_var<double>({1, 1, 80, 20}, 1);
  auto v = random_tensor<double>({1, 5, 80, 80}, 2, 0, 1);
  const auto base = g.forward(y, Var<double>(v), BatchNormMode::kEval).value();
  Rng rng(11);
  for (int probe = 0; probe < 8; ++probe) {
    auto p = v;
    const std::size_t idx = rng.below(p.size());
    p[idx] = p[idx] > 0.5 ? p[idx] - 0.5 : p[idx] + 0.5;
    const auto out = g.forward(y, Var<double>(p), BatchNormMode::kEval).value();
    EXPECT_GT(testing::max_abs_diff(out, base), 0.0) << "pixel " << idx;
  }
}

TEST(Generator, LatentNoiseChannelIsOptional) {
  NoGradGuard ng;
  NetConfig c = tiny(5);
  c.latent_noise = true;
  Generator<float> g(c);
  auto y = rand_var<float>({1, 1, 80, 20}, 1);
  auto v = rand_var<float>({1, 5, 80, 80}, 2, 0, 1);
  EXPECT_THROW(g.forward(y, v, BatchNormMode::kEval), ContractViolation);
  auto a = g.forward(y, v, BatchNormMode::kEval, rand_var<float>({1, 1, 80, 20}, 3));
  auto b = g.forward(y, v, BatchNormMode::kEval, rand_var<float>({1, 1, 80, 20}, 4));
  EXPECT_GT(testing::max_abs_diff(a.value(), b.value()), 0.0);
}

TEST(Discriminator, ScalarPerItemDeterministicAndAsymmetric) {
  NoGradGuard ng;
  Discriminator<double> d(tiny(2));
  auto c = rand_var<double>({4, 1, 80, 20}, 1);
  auto n = rand_var<double>({4, 1, 80, 20}, 2);
  auto out = d.forward(c, n, BatchNormMode::kEval);
  EXPECT_EQ(out.shape(), (Shape{4}));
  EXPECT_EQ(out.value(), d.forward(c, n, BatchNormMode::kEval).value());
  EXPECT_GT(testing::max_abs_diff(out.value(), d.forward(n, c, BatchNormMode::kEval).value()), 1e-6);
  EXPECT_THROW(d.forward(c, rand_var<double>({4, 1, 80, 19}, 2), BatchNormMode::kEval), ContractViolation);
}

TEST(Discriminator, CandidateGradientMatchesFiniteDifferences) {
  Discriminator<double> d(tiny(4));
  ParamStore<double> in;
  auto c = in.add("candidate", random_tensor<double>({2, 1, 80, 20}, 1));
  auto n = rand_var<double>({2, 1, 80, 20}, 2);
  d.store().set_trainable(false);
  auto loss = [&] { return sum(d.forward(c, n, BatchNormMode::kTrainFrozenStats)); };
  auto rep = grad_check(loss, in.params(), {1e-6, 1e-8, 200, 3});
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error();
}

TEST(Losses, DiscriminatorOptimumAndWorstCase) {
  Var<double> ones(Tensor<double>(Shape{3}, 1.0)), zeros(Tensor<double>(Shape{3}, 0.0));
  EXPECT_EQ(d_loss(ones, zeros).item(), 0.0);
  EXPECT_EQ(d_loss(zeros, ones).item(), 1.0);
}

TEST(Losses, MatchHandEvaluationAtRandomInit) {
  NoGradGuard ng;
  Discriminator<double> d(tiny(3));
  auto y = rand_var<double>({3, 1, 80, 20}, 1);
  auto yh = rand_var<double>({3, 1, 80, 20}, 2);
  auto n = rand_var<double>({3, 1, 80, 20}, 3);
  auto real = d.forward(y, n, BatchNormMode::kEval), fake = d.forward(yh, n, BatchNormMode::kEval);
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i)
    want += 0.5 * (real.value()[i] - 1) * (real.value()[i] - 1) / 3 + 0.5 * fake.value()[i] * fake.value()[i] / 3;
  EXPECT_NEAR(d_loss(real, fake).item(), want, 1e-12);

  auto g = g_loss(fake, yh, y, 7.0);
  double adv = 0, l1 = 0;
  for (std::size_t i = 0; i < 3; ++i) adv += 0.5 * (fake.value()[i] - 1) * (fake.value()[i] - 1) / 3;
  for (std::size_t i = 0; i < y.value().size(); ++i) l1 += std::abs(yh.value()[i] - y.value()[i]) / y.value().size();
  EXPECT_NEAR(g.adv.item(), adv, 1e-12);
  EXPECT_NEAR(g.l1.item(), l1, 1e-12);
  const auto lv = make_loss_values(0, g.adv.item(), g.l1.item(), 7.0);
  EXPECT_EQ(lv.g_total, lv.g_adv + 7.0 * lv.g_l1);
}

TEST(Losses, GeneratorJointOptimumAndLambda) {
  Var<double> one(Tensor<double>(Shape{2}, 1.0));
  auto y = rand_var<double>({2, 1, 80, 20}, 1);
  EXPECT_EQ(g_loss(one, y, y, 100).total.item(), 0.0);

  Var<double> dz(Tensor<double>(Shape{2}, 0.3));
  auto yh = rand_var<double>({2, 1, 80, 20}, 2);
  auto g0 = g_loss(dz, yh, y, 0.0);
  EXPECT_EQ(g0.total.item(), g0.adv.item());
  EXPECT_NEAR(g0.adv.item(), 0.5 * 0.49, 1e-15);

  Tensor<double> shifted = y.value();
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += (i % 2 ? 0.01 : -0.01);
  auto g100 = g_loss(one, Var<double>(shifted), y, 100.0);
  EXPECT_NEAR(g100.total.item(), 1.0, 1e-12);
  EXPECT_THROW(g_loss(one, y, y, -1.0), ContractViolation);
}

}  // namespace
}  // namespace vsegan
