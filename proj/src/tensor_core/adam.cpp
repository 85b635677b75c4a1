#include "vsegan/adam.hpp"

#include <cmath>

namespace vsegan {

template <typename T>
void adam_step(std::span<Tensor<T>*> params, std::span<const Tensor<T>* const> grads,
               std::span<const std::string> names, AdamState<T>& state, const AdamHyper& hyper) {
  require(params.size() == grads.size() && params.size() == names.size(),
          "adam_step: params/grads/names length mismatch");
  require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
          "adam_step: moment arrays do not match the registered parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<T>* g = grads[i];
    if (g == nullptr || g->empty()) continue;
    require(g->shape() == params[i]->shape(), "adam_step: gradient shape mismatch for " + names[i]);
    if (!g->all_finite()) throw NonFiniteError("adam_step: non-finite gradient for parameter " + names[i]);
  }

  const std::uint64_t t = state.step_count + 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    Tensor<T>& m = state.first_moment[i];
    Tensor<T>& v = state.second_moment[i];
    const Tensor<T>* g = grads[i];
    const bool has_g = g != nullptr && !g->empty();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = has_g ? static_cast<double>((*g)[k]) : 0.0;
      const double mk = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * gk;
      const double vk = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = hyper.lr * (mk / bc1) / (std::sqrt(vk / bc2) + hyper.eps);
      p[k] = static_cast<T>(p[k] - update);
    }
  }
  state.step_count = t;
}

template <typename T>
void Adam<T>::init_state() {
  state_.first_moment.clear();
  state_.second_moment.clear();
  for (const auto& p : store_->params()) {
    state_.first_moment.emplace_back(p.var.shape(), T{0});
    state_.second_moment.emplace_back(p.var.shape(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  auto& ps = store_->params();
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  std::vector<std::string> names;
  for (auto& p : ps) {
    values.push_back(&p.var.mutable_value());
    grads.push_back(p.var.has_grad() ? &p.var.grad() : nullptr);
    names.push_back(p.name);
  }
  adam_step<T>(values, grads, names, state_, hyper_);
}

template void adam_step<float>(std::span<Tensor<float>*>, std::span<const Tensor<float>* const>,
                               std::span<const std::string>, AdamState<float>&, const AdamHyper&);
template void adam_step<double>(std::span<Tensor<double>*>, std::span<const Tensor<double>* const>,
                                std::span<const std::string>, AdamState<double>&, const AdamHyper&);
template class Adam<float>;
template class Adam<double>;

}  // namespace vsegan
