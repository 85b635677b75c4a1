#pragma once

#include <cstddef>
#include <vector>

#include "vsegan/autograd.hpp"

namespace vsegan {

struct Hw {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Hw&, const Hw&) = default;
};

// "Same" padding geometry: output = ceil(input / stride), padding split
// floor-first like TensorFlow.
struct ConvGeometry {
  std::size_t in_h, in_w, out_h, out_w, k_h, k_w, stride_h, stride_w, pad_top, pad_left;

  static ConvGeometry same(std::size_t in_h, std::size_t in_w, Hw kernel, Hw stride);
};

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// input [N,C,H,W], weight [F,C,kh,kw], optional bias [F] (pass an undefined Var
// for none) -> [N,F,ceil(H/sh),ceil(W/sw)].
template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, Hw stride);

// Adjoint of conv2d with "same" padding. input [N,Cin,H,W], weight
// [Cin,Cout,kh,kw], optional bias [Cout] -> [N,Cout,H*sh,W*sw].
template <typename T>
Var<T> conv_transpose2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, Hw stride);

// Non-overlapping max pooling with ceil-mode partial windows. Ties route the
// gradient to the first row-major maximum.
template <typename T>
Var<T> maxpool2d(const Var<T>& input, Hw window);

enum class BatchNormMode {
  kTrain,           // batch statistics, running stats updated
  kTrainFrozenStats,  // batch statistics, running stats left untouched
  kEval,            // running statistics
};

template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  explicit BatchNormStats(std::size_t channels = 1)
      : running_mean(Shape{channels}, T{0}), running_var(Shape{channels}, T{1}) {}
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename T>
Var<T> batchnorm2d(const Var<T>& input, const Var<T>& gamma, const Var<T>& beta,
                   BatchNormStats<T>& stats, BatchNormMode mode);

template <typename T>
Var<T> leaky_relu(const Var<T>& input, double slope);

template <typename T>
Var<T> tanh(const Var<T>& input);

// input [N,Din], weight [Dout,Din], optional bias [Dout] -> [N,Dout].
template <typename T>
Var<T> linear(const Var<T>& input, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> concat(const std::vector<Var<T>>& inputs, std::size_t axis);

template <typename T>
std::vector<Var<T>> split(const Var<T>& input, std::size_t axis, const std::vector<std::size_t>& sizes);

template <typename T>
Var<T> reshape(const Var<T>& input, Shape shape);

// [N,...] -> [N, prod(...)]
template <typename T>
Var<T> flatten(const Var<T>& input);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, double s);
template <typename T>
Var<T> add_scalar(const Var<T>& a, double s);
template <typename T>
Var<T> square(const Var<T>& a);
template <typename T>
Var<T> abs(const Var<T>& a);
template <typename T>
Var<T> sum(const Var<T>& a);
template <typename T>
Var<T> mean(const Var<T>& a);

}  // namespace vsegan
