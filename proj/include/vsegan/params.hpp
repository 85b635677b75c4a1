#pragma once

#include <cstdint>
#include <cstring>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "vsegan/ops.hpp"

namespace vsegan {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <typename T>
struct NamedStats {
  std::string name;
  BatchNormStats<T> stats;
};

// Ordered, named collection of trainable leaves plus batch-norm running
// statistics. Registration order is the serialization order.
template <typename T>
class ParamStore {
 public:
  Var<T> add(std::string name, Tensor<T> init) {
    for (const auto& p : params_) require(p.name != name, "duplicate parameter name " + name);
    params_.push_back({std::move(name), Var<T>(std::move(init), true)});
    return params_.back().var;
  }

  BatchNormStats<T>& add_stats(std::string name, std::size_t channels) {
    stats_.push_back({std::move(name), BatchNormStats<T>(channels)});
    return stats_.back().stats;
  }

  std::vector<NamedParam<T>>& params() { return params_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }
  std::deque<NamedStats<T>>& stats() { return stats_; }
  const std::deque<NamedStats<T>>& stats() const { return stats_; }

  Var<T> find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p.var;
    throw ContractViolation("unknown parameter " + name);
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  void set_trainable(bool on) {
    for (auto& p : params_) p.var.set_requires_grad(on);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var.value().size();
    return n;
  }

  // FNV-1a over names and raw parameter bytes.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t len) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& p : params_) {
      mix(p.name.data(), p.name.size());
      mix(p.var.value().ptr(), p.var.value().size() * sizeof(T));
    }
    return h;
  }

  // Copies values (and running stats) from a store with identical layout,
  // possibly of another precision.
  template <typename U>
  void copy_from(const ParamStore<U>& other) {
    require(other.params().size() == params_.size() && other.stats().size() == stats_.size(),
            "copy_from: parameter layout mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& src = other.params()[i].var.value();
      require(src.shape() == params_[i].var.shape(), "copy_from: shape mismatch for " + params_[i].name);
      params_[i].var.mutable_value() = src.template cast<T>();
    }
    for (std::size_t i = 0; i < stats_.size(); ++i) {
      stats_[i].stats.running_mean = other.stats()[i].stats.running_mean.template cast<T>();
      stats_[i].stats.running_var = other.stats()[i].stats.running_var.template cast<T>();
    }
  }

 private:
  std::vector<NamedParam<T>> params_;
  std::deque<NamedStats<T>> stats_;
};

}  // namespace vsegan
