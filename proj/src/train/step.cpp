#include <cmath>

#include "vsegan/trainer.hpp"

namespace vsegan::train {

template <typename T>
GanModels<T>::GanModels(const NetConfig& cfg, double lr)
    : g(cfg), d(cfg), opt_g(g.store(), AdamHyper{lr}), opt_d(d.store(), AdamHyper{lr}) {}

namespace {

// Re-enables the discriminator even when the generator step throws.
template <typename T>
class FreezeGuard {
 public:
  explicit FreezeGuard(ParamStore<T>& s) : s_(s) { s_.set_trainable(false); }
  ~FreezeGuard() { s_.set_trainable(true); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParamStore<T>& s_;
};

std::string describe(std::uint64_t step, const std::vector<std::size_t>& segments) {
  std::string s = "step " + std::to_string(step) + ", batch segments [";
  for (std::size_t i = 0; i < segments.size(); ++i) s += (i ? "," : "") + std::to_string(segments[i]);
  return s + "]";
}

}  // namespace

template <typename T>
StepResult train_step(GanModels<T>& m, const Batch<T>& batch, double lambda, std::uint64_t step) {
  StepResult r;
  auto& gs = m.g.store();
  auto& ds = m.d.store();
  try {
    Var<T> clean(batch.clean), noisy(batch.noisy), video(batch.video), latent;
    if (!batch.latent.data().empty()) latent = Var<T>(batch.latent);
    r.g_hash_before = gs.hash();
    r.d_hash_before = ds.hash();

    // Discriminator: real pairs toward 1, fake pairs toward 0. The fake is
    // detached so nothing reaches the generator.
    Var<T> y_hat = m.g.forward(noisy, video, BatchNormMode::kTrain, latent);
    ds.zero_grad();
    Var<T> dl = d_loss(m.d.forward(clean, noisy, BatchNormMode::kTrain),
                       m.d.forward(y_hat.detach(), noisy, BatchNormMode::kTrain));
    dl.backward();
    m.opt_d.step();
    r.g_hash_after_d_step = gs.hash();
    r.d_hash_after_d_step = ds.hash();
    if (r.g_hash_after_d_step != r.g_hash_before)
      throw ContractViolation("freezing contract: generator changed during the discriminator update at step " +
                              std::to_string(step));

    // Generator through the updated, frozen discriminator.
    GLoss<T> gl;
    {
      FreezeGuard<T> frozen(ds);
      gs.zero_grad();
      gl = g_loss(m.d.forward(y_hat, noisy, BatchNormMode::kTrainFrozenStats), y_hat, clean, lambda);
      gl.total.backward();
      m.opt_g.step();
    }
    r.g_hash_after = gs.hash();
    r.d_hash_after = ds.hash();
    if (r.d_hash_after != r.d_hash_after_d_step)
      throw ContractViolation("freezing contract: discriminator changed during the generator update at step " +
                              std::to_string(step));

    r.losses = make_loss_values(dl.item(), gl.adv.item(), gl.l1.item(), lambda);
    if (!std::isfinite(r.losses.d_loss) || !std::isfinite(r.losses.g_total))
      throw NonFiniteError("non-finite loss (d_loss " + std::to_string(r.losses.d_loss) + ", g_total " +
                           std::to_string(r.losses.g_total) + ")");
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(describe(step, batch.segments) + ": " + e.what());
  }
  return r;
}

template struct GanModels<float>;
template struct GanModels<double>;
template StepResult train_step(GanModels<float>&, const Batch<float>&, double, std::uint64_t);
template StepResult train_step(GanModels<double>&, const Batch<double>&, double, std::uint64_t);

}  // namespace vsegan::train
