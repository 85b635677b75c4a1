#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vsegan/params.hpp"

namespace vsegan {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::uint64_t step_count = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
};

// One bias-corrected Adam update over parallel lists. A missing gradient
// (empty tensor) counts as zero. All gradients are validated before any
// parameter is touched; a NaN/Inf gradient throws NonFiniteError naming the
// parameter and leaves params and state unchanged.
template <typename T>
void adam_step(std::span<Tensor<T>*> params, std::span<const Tensor<T>* const> grads,
               std::span<const std::string> names, AdamState<T>& state, const AdamHyper& hyper);

// Adam bound to a ParamStore; moments are created lazily on first step.
template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& store, AdamHyper hyper) : store_(&store), hyper_(hyper) { init_state(); }

  void step();
  AdamState<T>& state() { return state_; }
  const AdamState<T>& state() const { return state_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_lr(double lr) { hyper_.lr = lr; }

 private:
  void init_state();

  ParamStore<T>* store_;
  AdamHyper hyper_;
  AdamState<T> state_;
};

}  // namespace vsegan
