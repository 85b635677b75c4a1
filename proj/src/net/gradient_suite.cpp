#include "vsegan/gradient_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "vsegan/grad_check.hpp"
#include "vsegan/net.hpp"
#include "vsegan/rng.hpp"

namespace vsegan {

namespace {

constexpr double kOpTol = 1e-6, kE2e64Tol = 1e-4, kE2e32Tol = 1e-3;

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

using OpFn = std::function<Var<double>(const std::vector<Var<double>>&)>;

// loss = sum(op(inputs) * R) for a fixed random R.
SuiteEntry check_op(const std::string& name, const std::vector<Shape>& shapes, const OpFn& op, Rng& rng,
                    double lo = -1, double hi = 1) {
  ParamStore<double> store;
  std::vector<Var<double>> vars;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    vars.push_back(store.add("in" + std::to_string(i), random_tensor<double>(shapes[i], rng, lo, hi)));
  Tensor<double> r;
  {
    NoGradGuard ng;
    r = random_tensor<double>(op(vars).shape(), rng);
  }
  auto loss = [&] { return sum(mul(op(vars), Var<double>(r))); };
  const auto rep = grad_check(loss, store.params(), {kOpTol, 1e-8, 0, rng.next_u64()});
  std::size_t n = 0;
  for (const auto& p : rep.params) n += p.checked;
  return SuiteEntry{"op " + name, rep.max_rel_error(), kOpTol, n, 0};
}

struct Sample {
  std::size_t param, index;
};

const char* kGroups[] = {"g.audio.", "g.video.", "g.fusion", "g.embed.", "g.decoder."};

std::vector<Sample> sample_group(const ParamStore<double>& store, const std::string& prefix, std::size_t count, Rng& rng) {
  std::vector<Sample> all;
  for (std::size_t p = 0; p < store.params().size(); ++p) {
    if (store.params()[p].name.rfind(prefix, 0) != 0) continue;
    for (std::size_t i = 0; i < store.params()[p].var.value().size(); ++i) all.push_back({p, i});
  }
  rng.shuffle(all.begin(), all.end());
  if (all.size() > count) all.resize(count);
  return all;
}

struct E2eBatch {
  Tensor<double> noisy, video, clean;
};

template <typename T>
Var<T> generator_loss(Generator<T>& g, Discriminator<T>& d, const E2eBatch& b, double lambda) {
  Var<T> noisy(b.noisy.cast<T>()), video(b.video.cast<T>()), clean(b.clean.cast<T>());
  Var<T> y_hat = g.forward(noisy, video, BatchNormMode::kTrainFrozenStats);
  Var<T> score = d.forward(y_hat, noisy, BatchNormMode::kTrainFrozenStats);
  return g_loss(score, y_hat, clean, lambda).total;
}

}  // namespace

SuiteReport run_gradient_suite(unsigned width_shift, std::uint64_t seed, std::size_t per_group) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  Rng rng(derive_seed(seed, 0x6763));
  auto& out = report.entries;

  out.push_back(check_op("conv2d k3 s(2,1)", {{2, 2, 6, 6}, {3, 2, 3, 3}, {3}},
                         [](const auto& v) { return conv2d(v[0], v[1], v[2], {2, 1}); }, rng));
  out.push_back(check_op("conv2d k5 s(2,2)", {{1, 2, 10, 6}, {2, 2, 5, 5}, {2}},
                         [](const auto& v) { return conv2d(v[0], v[1], v[2], {2, 2}); }, rng));
  out.push_back(check_op("conv_transpose2d k4 s(2,1)", {{2, 3, 3, 2}, {3, 2, 4, 4}, {2}},
                         [](const auto& v) { return conv_transpose2d(v[0], v[1], v[2], {2, 1}); }, rng));
  out.push_back(check_op("conv_transpose2d k2 s(1,5)", {{1, 2, 3, 1}, {2, 2, 2, 2}, {2}},
                         [](const auto& v) { return conv_transpose2d(v[0], v[1], v[2], {1, 5}); }, rng));
  out.push_back(check_op("maxpool2d (2,4)", {{2, 2, 6, 8}}, [](const auto& v) { return maxpool2d(v[0], {2, 4}); }, rng));
  for (auto mode : {BatchNormMode::kTrain, BatchNormMode::kEval}) {
    BatchNormStats<double> st(3);
    st.running_mean = random_tensor<double>({3}, rng);
    st.running_var = random_tensor<double>({3}, rng, 0.5, 2.0);
    out.push_back(check_op(mode == BatchNormMode::kTrain ? "batchnorm2d train" : "batchnorm2d eval",
                           {{2, 3, 4, 3}, {3}, {3}},
                           [&st, mode](const auto& v) {
                             // Train mode would move the running stats on every
                             // evaluation; the output does not depend on them.
                             return batchnorm2d(v[0], v[1], v[2], st,
                                                mode == BatchNormMode::kTrain ? BatchNormMode::kTrainFrozenStats : mode);
                           },
                           rng));
  }
  out.push_back(check_op("leaky_relu", {{3, 4, 5}}, [](const auto& v) { return leaky_relu(v[0], kLeakySlope); }, rng));
  out.push_back(check_op("tanh", {{3, 4, 5}}, [](const auto& v) { return tanh(v[0]); }, rng));
  out.push_back(check_op("linear", {{3, 5}, {4, 5}, {4}}, [](const auto& v) { return linear(v[0], v[1], v[2]); }, rng));
  out.push_back(check_op("concat/split", {{2, 3, 2, 2}, {2, 4, 2, 2}},
                         [](const auto& v) {
                           auto parts = split(concat<double>({v[0], v[1]}, 1), 1, {4, 3});
                           return concat<double>({mul(parts[0], parts[0]), parts[1]}, 1);
                         },
                         rng));
  out.push_back(check_op("flatten/reshape", {{2, 3, 2, 2}},
                         [](const auto& v) { return reshape(square(flatten(v[0])), Shape{4, 6}); }, rng));
  out.push_back(check_op("add/sub/mul/scale/add_scalar", {{4, 5}, {4, 5}},
                         [](const auto& v) { return mul(add(v[0], scale(v[1], 1.5)), add_scalar(sub(v[0], v[1]), 0.3)); },
                         rng));
  out.push_back(check_op("abs/square", {{4, 5}}, [](const auto& v) { return mul(abs(v[0]), square(v[0])); }, rng, 0.2, 1.0));
  out.push_back(check_op("sum/mean", {{4, 5}},
                         [](const auto& v) { return add(scale(sum(square(v[0])), 0.1), mean(v[0])); }, rng));

  // End to end: generator loss through a frozen discriminator.
  NetConfig cfg;
  cfg.width_shift = width_shift;
  cfg.init_seed = derive_seed(seed, 0x6e6574);
  const double lambda = 100.0;
  E2eBatch batch{random_tensor<double>({2, 1, 80, 20}, rng), random_tensor<double>({2, 5, 80, 80}, rng, 0, 1),
                 random_tensor<double>({2, 1, 80, 20}, rng)};

  Generator<float> g32(cfg);
  Discriminator<float> d32(cfg);
  Generator<double> g64(cfg);
  Discriminator<double> d64(cfg);
  g64.store().copy_from(g32.store());
  d64.store().copy_from(d32.store());
  d32.store().set_trainable(false);
  d64.store().set_trainable(false);

  generator_loss(g32, d32, batch, lambda).backward();
  generator_loss(g64, d64, batch, lambda).backward();

  // Rounding noise in both the float32 gradient and the differenced loss
  // scales with the largest terms involved, so relative errors are floored at
  // 1e-4 of the model's largest gradient.
  double gmax = 0;
  for (const auto& p : g64.store().params())
    for (double v : p.var.grad().data()) gmax = std::max(gmax, std::abs(v));
  const double floor = 1e-4 * gmax;

  NoGradGuard ng;
  for (const char* group : kGroups) {
    SuiteEntry e64{std::string("g_total fp64 ") + group, 0, kE2e64Tol, 0, 0};
    SuiteEntry e32{std::string("g_total fp32 ") + group, 0, kE2e32Tol, 0, 0};
    for (const Sample& s : sample_group(g64.store(), group, 4 * per_group, rng)) {
      if (e64.checked == per_group) break;
      Var<double> p = g64.store().params()[s.param].var;
      double& x = p.mutable_value()[s.index];
      const double orig = x, h = 1e-5 * std::max(1.0, std::abs(orig));
      const double f0 = generator_loss(g64, d64, batch, lambda).item();
      x = orig + h;
      const double fp = generator_loss(g64, d64, batch, lambda).item();
      x = orig - h;
      const double fm = generator_loss(g64, d64, batch, lambda).item();
      x = orig;
      // A leaky-ReLU kink or a max-pool switch inside [x-h, x+h] shows up as
      // disagreeing one-sided slopes; such points are not differentiable.
      const double up = (fp - f0) / h, down = (f0 - fm) / h;
      if (std::abs(up - down) > kE2e64Tol * std::max({std::abs(up), std::abs(down), floor})) {
        ++e64.skipped;
        ++e32.skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2 * h);
      auto rel = [numeric](double analytic, double floor) {
        return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      };
      e64.max_rel_error = std::max(e64.max_rel_error, rel(p.grad()[s.index], floor));
      e32.max_rel_error = std::max(e32.max_rel_error, rel(g32.store().params()[s.param].var.grad()[s.index], floor));
      ++e64.checked;
      ++e32.checked;
    }
    out.push_back(e64);
    out.push_back(e32);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace vsegan
