#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vsegan/ops.hpp"

namespace vsegan {
namespace {

using testing::dot;
using testing::max_abs_diff;
using testing::random_tensor;

// Direct-summation "same" convolution, written independently of im2col.
Tensor<double> conv2d_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* b,
                             std::size_t sh, std::size_t sw) {
  const long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long F = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const long Ho = (H + sh - 1) / sh, Wo = (W + sw - 1) / sw;
  const long pad_h = std::max(0L, (Ho - 1) * long(sh) + KH - H) / 2;
  const long pad_w = std::max(0L, (Wo - 1) * long(sw) + KW - W) / 2;
  Tensor<double> out(Shape{std::size_t(N), std::size_t(F), std::size_t(Ho), std::size_t(Wo)});
  for (long n = 0; n < N; ++n)
    for (long f = 0; f < F; ++f)
      for (long oh = 0; oh < Ho; ++oh)
        for (long ow = 0; ow < Wo; ++ow) {
          double acc = b ? (*b)[f] : 0.0;
          for (long c = 0; c < C; ++c)
            for (long i = 0; i < KH; ++i)
              for (long j = 0; j < KW; ++j) {
                const long ih = oh * sh + i - pad_h, iw = ow * sw + j - pad_w;
                if (ih < 0 || iw < 0 || ih >= H || iw >= W) continue;
                acc += x.at(n, c, ih, iw) * w.at(f, c, i, j);
              }
          out.at(n, f, oh, ow) = acc;
        }
  return out;
}

Tensor<double> maxpool_oracle(const Tensor<double>& x, std::size_t ph, std::size_t pw) {
  const std::size_t Ho = (x.dim(2) + ph - 1) / ph, Wo = (x.dim(3) + pw - 1) / pw;
  Tensor<double> out(Shape{x.dim(0), x.dim(1), Ho, Wo});
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      for (std::size_t oh = 0; oh < Ho; ++oh)
        for (std::size_t ow = 0; ow < Wo; ++ow) {
          double m = -INFINITY;
          for (std::size_t i = oh * ph; i < std::min(x.dim(2), oh * ph + ph); ++i)
            for (std::size_t j = ow * pw; j < std::min(x.dim(3), ow * pw + pw); ++j) m = std::max(m, x.at(n, c, i, j));
          out.at(n, c, oh, ow) = m;
        }
  return out;
}

TEST(Conv2d, UnitKernelScales) {
  Var<float> x(Tensor<float>(Shape{1, 1, 4, 4}, 1.0f));
  Var<float> w(Tensor<float>(Shape{1, 1, 1, 1}, 2.0f));
  Var<float> b(Tensor<float>(Shape{1}, 0.0f));
  auto y = conv2d(x, w, b, {1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (float v : y.value().data()) EXPECT_EQ(v, 2.0f);
}

TEST(Conv2d, FirstEncoderLayerShape) {
  Var<float> x(random_tensor<float>({1, 1, 80, 20}, 1));
  Var<float> w(random_tensor<float>({64, 1, 5, 5}, 2));
  auto y = conv2d(x, w, Var<float>(), {2, 2});
  EXPECT_EQ(y.shape(), (Shape{1, 64, 40, 10}));
}

TEST(Conv2d, MatchesDirectSummation) {
  auto x = random_tensor<double>({1, 2, 6, 6}, 3);
  auto w = random_tensor<double>({3, 2, 3, 3}, 4);
  auto b = random_tensor<double>({3}, 5);
  auto y = conv2d(Var<double>(x), Var<double>(w), Var<double>(b), {2, 1});
  auto ref = conv2d_oracle(x, w, &b, 2, 1);
  ASSERT_EQ(y.shape(), ref.shape());
  EXPECT_LT(max_abs_diff(y.value(), ref), 1e-6);
}

TEST(Conv2d, MatchesDirectSummationEvenKernelsAndBatch) {
  for (auto [k, sh, sw] : {std::tuple{4, 2, 2}, {2, 2, 1}, {2, 1, 5}, {5, 2, 2}, {4, 1, 1}}) {
    auto x = random_tensor<double>({2, 3, 9, 7}, 10 + k);
    auto w = random_tensor<double>({4, 3, std::size_t(k), std::size_t(k)}, 20 + k);
    auto y = conv2d(Var<double>(x), Var<double>(w), Var<double>(), {std::size_t(sh), std::size_t(sw)});
    EXPECT_LT(max_abs_diff(y.value(), conv2d_oracle(x, w, nullptr, sh, sw)), 1e-9) << k << " " << sh << " " << sw;
  }
}

TEST(Conv2d, ChannelMismatchIsContractViolation) {
  Var<float> x(random_tensor<float>({1, 3, 4, 4}, 1));
  Var<float> w(random_tensor<float>({2, 2, 3, 3}, 2));
  EXPECT_THROW(conv2d(x, w, Var<float>(), {1, 1}), ContractViolation);
  EXPECT_THROW(conv2d(x, Var<float>(random_tensor<float>({2, 3, 3, 3}, 2)), Var<float>(), {0, 1}), ContractViolation);
}

TEST(ConvTranspose2d, UnitKernelPlacesOnStrideLattice) {
  Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  auto y = conv_transpose2d(Var<float>(x), Var<float>(Tensor<float>(Shape{1, 1, 1, 1}, 1.0f)), Var<float>(), {2, 2});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const std::vector<float> expect{1, 0, 2, 0, 0, 0, 0, 0, 3, 0, 4, 0, 0, 0, 0, 0};
  EXPECT_EQ(y.value().storage(), expect);
}

TEST(ConvTranspose2d, MirrorsDeepestStride) {
  Var<float> x(random_tensor<float>({1, 1024, 5, 1}, 1));
  Var<float> w(random_tensor<float>({1024, 16, 2, 2}, 2));
  auto y = conv_transpose2d(x, w, Var<float>(), {1, 5});
  EXPECT_EQ(y.shape(), (Shape{1, 16, 5, 5}));
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
  struct Case {
    Shape big;
    std::size_t k, sh, sw;
  };
  for (const auto& c : {Case{{2, 3, 80, 20}, 5, 2, 2}, Case{{1, 4, 40, 10}, 4, 1, 1}, Case{{2, 2, 20, 5}, 2, 2, 1},
                        Case{{1, 3, 5, 5}, 2, 1, 5}, Case{{1, 2, 8, 9}, 3, 2, 3}}) {
    const std::size_t F = 5;
    auto a = random_tensor<double>(c.big, 7);
    auto w = random_tensor<double>({F, c.big[1], c.k, c.k}, 8);
    auto fwd = conv2d(Var<double>(a), Var<double>(w), Var<double>(), {c.sh, c.sw});
    auto b = random_tensor<double>(fwd.shape(), 9);
    auto adj = conv_transpose2d(Var<double>(b), Var<double>(w), Var<double>(), {c.sh, c.sw});
    ASSERT_EQ(adj.shape(), a.shape());
    const double lhs = dot(fwd.value(), b), rhs = dot(a, adj.value());
    EXPECT_LT(std::abs(lhs - rhs) / std::abs(lhs), 1e-6);
  }
}

TEST(ConvTranspose2d, ChannelMismatch) {
  EXPECT_THROW(conv_transpose2d(Var<float>(random_tensor<float>({1, 3, 2, 2}, 1)),
                                Var<float>(random_tensor<float>({2, 1, 2, 2}, 1)), Var<float>(), {2, 2}),
               ContractViolation);
}

TEST(MaxPool2d, SmallExample) {
  Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  auto y = maxpool2d(Var<float>(x), {2, 2});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value()[0], 4.0f);
}

TEST(MaxPool2d, FirstVideoPoolShape) {
  auto y = maxpool2d(Var<float>(random_tensor<float>({1, 64, 80, 80}, 3)), {2, 4});
  EXPECT_EQ(y.shape(), (Shape{1, 64, 40, 20}));
}

TEST(MaxPool2d, MatchesDirectScan) {
  for (auto [ph, pw] : {std::pair{2, 2}, {1, 5}, {3, 3}}) {
    auto x = random_tensor<double>({1, 1, 6, 8}, 11);
    auto y = maxpool2d(Var<double>(x), {std::size_t(ph), std::size_t(pw)});
    EXPECT_EQ(y.value(), maxpool_oracle(x, ph, pw));
  }
}

TEST(MaxPool2d, TieRoutesGradientToFirstMaximum) {
  Var<double> x(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>{5, 5, 5, 1}), true);
  sum(maxpool2d(x, {2, 2})).backward();
  EXPECT_EQ(x.grad().storage(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(BatchNorm2d, UnitAffineCentresChannels) {
  auto x = random_tensor<double>({4, 3, 5, 6}, 12, -3, 7);
  Var<double> g(Tensor<double>(Shape{3}, 1.0)), b(Tensor<double>(Shape{3}, 0.0));
  BatchNormStats<double> st(3);
  auto y = batchnorm2d(Var<double>(x), g, b, st, BatchNormMode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 30; ++i) s += y.value()[(n * 3 + c) * 30 + i];
    EXPECT_LT(std::abs(s / 120), 1e-5);
  }
}

TEST(BatchNorm2d, AffineParametersSetMomentsPerChannel) {
  auto x = random_tensor<double>({8, 2, 4, 4}, 13, -1, 4);
  Var<double> g(Tensor<double>(Shape{2}, 2.0)), b(Tensor<double>(Shape{2}, 3.0));
  BatchNormStats<double> st(2);
  auto y = batchnorm2d(Var<double>(x), g, b, st, BatchNormMode::kTrain);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, ss = 0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t i = 0; i < 16; ++i) {
        const double v = y.value()[(n * 2 + c) * 16 + i];
        s += v;
        ss += v * v;
      }
    const double mu = s / 128, var = ss / 128 - mu * mu;
    EXPECT_NEAR(mu, 3.0, 1e-4);
    EXPECT_NEAR(var, 4.0, 1e-4);
  }
}

TEST(BatchNorm2d, RunningStatisticsAndEvalDeterminism) {
  auto x = random_tensor<float>({4, 2, 3, 3}, 14, 1, 3);
  Var<float> g(Tensor<float>(Shape{2}, 1.0f)), b(Tensor<float>(Shape{2}, 0.0f));
  BatchNormStats<float> st(2);
  batchnorm2d(Var<float>(x), g, b, st, BatchNormMode::kTrain);
  // running = 0.9 * 0 + 0.1 * mean; mean of U(1,3) is near 2.
  EXPECT_NEAR(st.running_mean[0], 0.2, 0.05);
  auto frozen = st.running_mean;
  batchnorm2d(Var<float>(x), g, b, st, BatchNormMode::kTrainFrozenStats);
  EXPECT_EQ(st.running_mean, frozen);
  auto e1 = batchnorm2d(Var<float>(x), g, b, st, BatchNormMode::kEval);
  auto e2 = batchnorm2d(Var<float>(x), g, b, st, BatchNormMode::kEval);
  EXPECT_EQ(e1.value(), e2.value());
}

TEST(BatchNorm2d, SingleElementTrainIsDegenerate) {
  Var<float> g(Tensor<float>(Shape{2}, 1.0f)), b(Tensor<float>(Shape{2}, 0.0f));
  BatchNormStats<float> st(2);
  EXPECT_THROW(batchnorm2d(Var<float>(random_tensor<float>({1, 2, 1, 1}, 1)), g, b, st, BatchNormMode::kTrain),
               ContractViolation);
  EXPECT_NO_THROW(batchnorm2d(Var<float>(random_tensor<float>({1, 2, 1, 1}, 1)), g, b, st, BatchNormMode::kEval));
}

TEST(LeakyRelu, Values) {
  Var<double> x(Tensor<double>(Shape{3}, std::vector<double>{-1, 0, 2}));
  auto y = leaky_relu(x, 0.2);
  EXPECT_DOUBLE_EQ(y.value()[0], -0.2);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.0);
  EXPECT_DOUBLE_EQ(y.value()[2], 2.0);
  EXPECT_THROW(leaky_relu(x, 1.5), ContractViolation);
}

TEST(LeakyRelu, IdentityOnNonNegative) {
  auto x = random_tensor<float>({50}, 15, 0, 3);
  EXPECT_EQ(leaky_relu(Var<float>(x), 0.2).value(), x);
}

TEST(LeakyRelu, SubgradientAtZeroIsSlope) {
  Var<double> x(Tensor<double>(Shape{1}, 0.0), true);
  sum(leaky_relu(x, 0.2)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.2);
}

TEST(Linear, IdentityAndHandArithmetic) {
  auto x = random_tensor<double>({2, 3}, 16);
  Tensor<double> eye(Shape{3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 4] = 1;
  auto y = linear(Var<double>(x), Var<double>(eye), Var<double>(Tensor<double>(Shape{3}, 0.0)));
  EXPECT_EQ(y.value(), x);

  Tensor<double> in(Shape{1, 3}, std::vector<double>{1, 2, 3});
  Tensor<double> w(Shape{2, 3}, std::vector<double>{1, 1, 1, 0, 0, 1});
  Tensor<double> b(Shape{2}, std::vector<double>{0, 1});
  auto z = linear(Var<double>(in), Var<double>(w), Var<double>(b));
  EXPECT_EQ(z.value().storage(), (std::vector<double>{6, 4}));
  EXPECT_THROW(linear(Var<double>(in), Var<double>(Tensor<double>(Shape{2, 4})), Var<double>()), ContractViolation);
}

TEST(ConcatFlatten, StageFiveShapes) {
  Var<float> a(random_tensor<float>({1, 1024, 5, 1}, 1)), b(random_tensor<float>({1, 1024, 5, 1}, 2));
  EXPECT_EQ(concat<float>({a, b}, 1).shape(), (Shape{1, 2048, 5, 1}));
  EXPECT_EQ(flatten(a).shape(), (Shape{1, 5120}));
}

TEST(ConcatFlatten, SplitInvertsConcatBitExact) {
  auto a = random_tensor<float>({2, 3, 4, 2}, 3), b = random_tensor<float>({2, 5, 4, 2}, 4);
  auto parts = split(concat<float>({Var<float>(a), Var<float>(b)}, 1), 1, {3, 5});
  EXPECT_EQ(parts[0].value(), a);
  EXPECT_EQ(parts[1].value(), b);
  auto c = random_tensor<float>({2, 3, 4, 7}, 5);
  auto p2 = split(concat<float>({Var<float>(a), Var<float>(c)}, 3), 3, {2, 7});
  EXPECT_EQ(p2[0].value(), a);
  EXPECT_EQ(p2[1].value(), c);
}

TEST(ConcatFlatten, RaggedShapesRejected) {
  Var<float> a(random_tensor<float>({1, 2, 3, 3}, 1)), b(random_tensor<float>({1, 2, 4, 3}, 2));
  EXPECT_THROW(concat<float>({a, b}, 1), ContractViolation);
}

TEST(Finiteness, NonFiniteOutputThrows) {
  Tensor<float> x(Shape{2}, std::vector<float>{1.0f, std::numeric_limits<float>::infinity()});
  EXPECT_THROW(scale(Var<float>(x), 1.0), NonFiniteError);
}

TEST(Shapes, ForwardShapesDependOnlyOnDims) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Var<float> x(random_tensor<float>({2, 3, 11, 7}, seed, -100, 100));
    Var<float> w(random_tensor<float>({4, 3, 3, 2}, seed + 50, -100, 100));
    EXPECT_EQ(conv2d(x, w, Var<float>(), {3, 2}).shape(), (Shape{2, 4, 4, 4}));
    EXPECT_EQ(maxpool2d(x, {2, 3}).shape(), (Shape{2, 3, 6, 3}));
  }
}

TEST(NoGrad, GuardSkipsGraphRecording) {
  Var<double> w(Tensor<double>(Shape{2}, 1.0), true);
  NoGradGuard guard;
  auto y = sum(square(w));
  EXPECT_FALSE(y.requires_grad());
}

}  // namespace
}  // namespace vsegan
