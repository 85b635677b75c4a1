#include "vsegan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace vsegan {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

template <typename T>
bool wants_grad(const Node<T>& n, std::size_t i) {
  return i < n.parents.size() && n.parents[i]->requires_grad;
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* arg) {
  require(s.size() == rank, std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) +
                                ", got " + to_string(s));
}

// col[(c*kh+i)*kw+j, oh*Wo+ow] = x[c, oh*sh+i-pt, ow*sw+j-pl] (zero outside).
template <typename T>
void im2col(const T* x, std::size_t channels, const ConvGeometry& g, T* col) {
  const std::size_t P = g.out_h * g.out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* xc = x + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.k_h; ++i) {
      for (std::size_t j = 0; j < g.k_w; ++j) {
        T* dst = col + ((c * g.k_h + i) * g.k_w + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride_h + i) - static_cast<long>(g.pad_top);
          T* row = dst + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) {
            std::fill(row, row + g.out_w, T{0});
            continue;
          }
          const T* src = xc + ih * g.in_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride_w + j) - static_cast<long>(g.pad_left);
            row[ow] = (iw < 0 || iw >= static_cast<long>(g.in_w)) ? T{0} : src[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col entries back into x.
template <typename T>
void col2im(const T* col, std::size_t channels, const ConvGeometry& g, T* x) {
  const std::size_t P = g.out_h * g.out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    T* xc = x + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.k_h; ++i) {
      for (std::size_t j = 0; j < g.k_w; ++j) {
        const T* src = col + ((c * g.k_h + i) * g.k_w + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride_h + i) - static_cast<long>(g.pad_top);
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          T* dst = xc + ih * g.in_w;
          const T* row = src + oh * g.out_w;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const long iw = static_cast<long>(ow * g.stride_w + j) - static_cast<long>(g.pad_left);
            if (iw >= 0 && iw < static_cast<long>(g.in_w)) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

void check_stride(Hw s, const char* op) {
  require(s.h >= 1 && s.w >= 1, std::string(op) + ": stride components must be >= 1");
}

template <typename T>
Var<T> elementwise_unary(const Var<T>& a, const std::string& op, auto fwd, auto dfdx) {
  Tensor<T> out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return make_result<T>(std::move(out), op, {a}, [dfdx](Node<T>& n) {
    auto& p = *n.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * dfdx(p.value[i], n.value[i]);
  });
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  require(a == b, std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

}  // namespace

ConvGeometry ConvGeometry::same(std::size_t in_h, std::size_t in_w, Hw kernel, Hw stride) {
  ConvGeometry g{};
  g.in_h = in_h;
  g.in_w = in_w;
  g.k_h = kernel.h;
  g.k_w = kernel.w;
  g.stride_h = stride.h;
  g.stride_w = stride.w;
  g.out_h = ceil_div(in_h, stride.h);
  g.out_w = ceil_div(in_w, stride.w);
  const long need_h = static_cast<long>((g.out_h - 1) * stride.h + kernel.h) - static_cast<long>(in_h);
  const long need_w = static_cast<long>((g.out_w - 1) * stride.w + kernel.w) - static_cast<long>(in_w);
  g.pad_top = static_cast<std::size_t>(std::max(0L, need_h)) / 2;
  g.pad_left = static_cast<std::size_t>(std::max(0L, need_w)) / 2;
  return g;
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, Hw stride) {
  require_rank(input.shape(), 4, "conv2d", "input");
  require_rank(weight.shape(), 4, "conv2d", "weight");
  check_stride(stride, "conv2d");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t F = weight.dim(0);
  require(weight.dim(1) == C, "conv2d: input has " + std::to_string(C) + " channels but weight expects " +
                                  std::to_string(weight.dim(1)));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{F}, "conv2d: bias must be [" + std::to_string(F) + "]");

  const auto g = ConvGeometry::same(H, W, {weight.dim(2), weight.dim(3)}, stride);
  const std::size_t K = C * g.k_h * g.k_w, P = g.out_h * g.out_w;
  Tensor<T> out(Shape{N, F, g.out_h, g.out_w});
  MatR<T> col(K, P);
  CMapR<T> wm(weight.value().ptr(), F, K);
  for (std::size_t n = 0; n < N; ++n) {
    im2col(input.value().ptr() + n * C * H * W, C, g, col.data());
    MapR<T> y(out.ptr() + n * F * P, F, P);
    y.noalias() = wm * col;
    if (has_bias)
      for (std::size_t f = 0; f < F; ++f) y.row(f).array() += bias.value()[f];
  }

  std::vector<Var<T>> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result<T>(std::move(out), "conv2d", parents, [g, N, C, F, K, P](Node<T>& node) {
    auto& in = *node.parents[0];
    auto& w = *node.parents[1];
    const bool g_in = wants_grad(node, 0), g_w = wants_grad(node, 1), g_b = wants_grad(node, 2);
    CMapR<T> wm(w.value.ptr(), F, K);
    MatR<T> col(K, P), dcol(K, P);
    const std::size_t in_stride = C * g.in_h * g.in_w;
    for (std::size_t n = 0; n < N; ++n) {
      CMapR<T> dy(node.grad.ptr() + n * F * P, F, P);
      if (g_w) {
        im2col(in.value.ptr() + n * in_stride, C, g, col.data());
        MapR<T>(w.grad_buffer().ptr(), F, K).noalias() += dy * col.transpose();
      }
      if (g_in) {
        dcol.noalias() = wm.transpose() * dy;
        col2im(dcol.data(), C, g, in.grad_buffer().ptr() + n * in_stride);
      }
      if (g_b) {
        auto& gb = node.parents[2]->grad_buffer();
        for (std::size_t f = 0; f < F; ++f) gb[f] += dy.row(f).sum();
      }
    }
  });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& input, const Var<T>& weight, const Var<T>& bias, Hw stride) {
  require_rank(input.shape(), 4, "conv_transpose2d", "input");
  require_rank(weight.shape(), 4, "conv_transpose2d", "weight");
  check_stride(stride, "conv_transpose2d");
  const std::size_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  require(weight.dim(0) == Cin, "conv_transpose2d: input has " + std::to_string(Cin) +
                                    " channels but weight expects " + std::to_string(weight.dim(0)));
  const std::size_t Cout = weight.dim(1);
  const bool has_bias = bias.defined();
  if (has_bias)
    require(bias.shape() == Shape{Cout}, "conv_transpose2d: bias must be [" + std::to_string(Cout) + "]");

  // Geometry of the conv2d this op is the adjoint of: big -> small.
  const auto g = ConvGeometry::same(H * stride.h, W * stride.w, {weight.dim(2), weight.dim(3)}, stride);
  const std::size_t K = Cout * g.k_h * g.k_w, P = H * W, big = g.in_h * g.in_w;
  Tensor<T> out(Shape{N, Cout, g.in_h, g.in_w});
  MatR<T> col(K, P);
  CMapR<T> wm(weight.value().ptr(), Cin, K);
  for (std::size_t n = 0; n < N; ++n) {
    CMapR<T> x(input.value().ptr() + n * Cin * P, Cin, P);
    col.noalias() = wm.transpose() * x;
    T* y = out.ptr() + n * Cout * big;
    col2im(col.data(), Cout, g, y);
    if (has_bias)
      for (std::size_t c = 0; c < Cout; ++c)
        for (std::size_t i = 0; i < big; ++i) y[c * big + i] += bias.value()[c];
  }

  std::vector<Var<T>> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result<T>(std::move(out), "conv_transpose2d", parents,
                        [g, N, Cin, Cout, K, P, big](Node<T>& node) {
                          auto& in = *node.parents[0];
                          auto& w = *node.parents[1];
                          const bool g_in = wants_grad(node, 0), g_w = wants_grad(node, 1),
                                     g_b = wants_grad(node, 2);
                          CMapR<T> wm(w.value.ptr(), Cin, K);
                          MatR<T> dcol(K, P);
                          for (std::size_t n = 0; n < N; ++n) {
                            const T* dy = node.grad.ptr() + n * Cout * big;
                            im2col(dy, Cout, g, dcol.data());
                            if (g_in)
                              MapR<T>(in.grad_buffer().ptr() + n * Cin * P, Cin, P).noalias() += wm * dcol;
                            if (g_w) {
                              CMapR<T> x(in.value.ptr() + n * Cin * P, Cin, P);
                              MapR<T>(w.grad_buffer().ptr(), Cin, K).noalias() += x * dcol.transpose();
                            }
                            if (g_b) {
                              auto& gb = node.parents[2]->grad_buffer();
                              for (std::size_t c = 0; c < Cout; ++c) {
                                T s{0};
                                for (std::size_t i = 0; i < big; ++i) s += dy[c * big + i];
                                gb[c] += s;
                              }
                            }
                          }
                        });
}

template <typename T>
Var<T> maxpool2d(const Var<T>& input, Hw window) {
  require_rank(input.shape(), 4, "maxpool2d", "input");
  require(window.h >= 1 && window.w >= 1, "maxpool2d: window components must be >= 1");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Ho = ceil_div(H, window.h), Wo = ceil_div(W, window.w);
  Tensor<T> out(Shape{N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto& x = input.value();
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow, ++o) {
        std::size_t best = base + oh * window.h * W + ow * window.w;
        for (std::size_t i = oh * window.h; i < std::min(H, (oh + 1) * window.h); ++i)
          for (std::size_t j = ow * window.w; j < std::min(W, (ow + 1) * window.w); ++j) {
            const std::size_t idx = base + i * W + j;
            if (x[idx] > x[best]) best = idx;
          }
        out[o] = x[best];
        (*argmax)[o] = best;
      }
    }
  }
  return make_result<T>(std::move(out), "maxpool2d", {input}, [argmax](Node<T>& node) {
    auto& g = node.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < argmax->size(); ++o) g[(*argmax)[o]] += node.grad[o];
  });
}

template <typename T>
Var<T> batchnorm2d(const Var<T>& input, const Var<T>& gamma, const Var<T>& beta, BatchNormStats<T>& stats,
                   BatchNormMode mode) {
  require_rank(input.shape(), 4, "batchnorm2d", "input");
  const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C},
          "batchnorm2d: gamma/beta must be [" + std::to_string(C) + "]");
  require(stats.running_mean.shape() == Shape{C}, "batchnorm2d: running stats channel mismatch");
  const std::size_t M = N * HW;
  const bool train = mode != BatchNormMode::kEval;
  if (train)
    require(M >= 2, "batchnorm2d: degenerate statistics, train mode needs N*H*W >= 2 (got " +
                        std::to_string(M) + ")");

  const auto& x = input.value();
  Tensor<T> out(input.shape());
  auto xhat = std::make_shared<Tensor<T>>(input.shape());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  for (std::size_t c = 0; c < C; ++c) {
    double mu, var;
    if (train) {
      double s = 0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) s += x[(n * C + c) * HW + i];
      mu = s / M;
      double ss = 0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < HW; ++i) {
          const double d = x[(n * C + c) * HW + i] - mu;
          ss += d * d;
        }
      var = ss / M;
      if (mode == BatchNormMode::kTrain) {
        stats.running_mean[c] = static_cast<T>(kBatchNormMomentum * stats.running_mean[c] +
                                               (1 - kBatchNormMomentum) * mu);
        stats.running_var[c] = static_cast<T>(kBatchNormMomentum * stats.running_var[c] +
                                              (1 - kBatchNormMomentum) * var * M / (M - 1));
      }
    } else {
      mu = stats.running_mean[c];
      var = stats.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + kBatchNormEps);
    (*inv_std)[c] = is;
    const double gc = gamma.value()[c], bc = beta.value()[c];
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < HW; ++i) {
        const std::size_t k = (n * C + c) * HW + i;
        const double xh = (x[k] - mu) * is;
        (*xhat)[k] = static_cast<T>(xh);
        out[k] = static_cast<T>(gc * xh + bc);
      }
  }

  return make_result<T>(std::move(out), "batchnorm2d", {input, gamma, beta},
                        [xhat, inv_std, train, N, C, HW, M](Node<T>& node) {
                          const auto& gam = node.parents[1]->value;
                          const auto& dy = node.grad;
                          for (std::size_t c = 0; c < C; ++c) {
                            double sum_dy = 0, sum_dy_xh = 0;
                            for (std::size_t n = 0; n < N; ++n)
                              for (std::size_t i = 0; i < HW; ++i) {
                                const std::size_t k = (n * C + c) * HW + i;
                                sum_dy += dy[k];
                                sum_dy_xh += dy[k] * (*xhat)[k];
                              }
                            if (wants_grad(node, 1)) node.parents[1]->grad_buffer()[c] += sum_dy_xh;
                            if (wants_grad(node, 2)) node.parents[2]->grad_buffer()[c] += sum_dy;
                            if (!wants_grad(node, 0)) continue;
                            auto& dx = node.parents[0]->grad_buffer();
                            const double gi = gam[c] * (*inv_std)[c];
                            for (std::size_t n = 0; n < N; ++n)
                              for (std::size_t i = 0; i < HW; ++i) {
                                const std::size_t k = (n * C + c) * HW + i;
                                if (train)
                                  dx[k] += static_cast<T>(gi * (dy[k] - sum_dy / M - (*xhat)[k] * sum_dy_xh / M));
                                else
                                  dx[k] += static_cast<T>(gi * dy[k]);
                              }
                          }
                        });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& input, double slope) {
  require(slope > 0 && slope < 1, "leaky_relu: slope must lie in (0,1)");
  const T s = static_cast<T>(slope);
  return elementwise_unary<T>(
      input, "leaky_relu", [s](T x) { return x > 0 ? x : s * x; },
      [s](T x, T) { return x > 0 ? T{1} : s; });
}

template <typename T>
Var<T> tanh(const Var<T>& input) {
  return elementwise_unary<T>(
      input, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> linear(const Var<T>& input, const Var<T>& weight, const Var<T>& bias) {
  require_rank(input.shape(), 2, "linear", "input");
  require_rank(weight.shape(), 2, "linear", "weight");
  const std::size_t N = input.dim(0), Din = input.dim(1), Dout = weight.dim(0);
  require(weight.dim(1) == Din, "linear: input width " + std::to_string(Din) + " does not match weight " +
                                    to_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{Dout}, "linear: bias must be [" + std::to_string(Dout) + "]");
  Tensor<T> out(Shape{N, Dout});
  MapR<T> y(out.ptr(), N, Dout);
  y.noalias() = CMapR<T>(input.value().ptr(), N, Din) * CMapR<T>(weight.value().ptr(), Dout, Din).transpose();
  if (has_bias)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t d = 0; d < Dout; ++d) y(n, d) += bias.value()[d];
  std::vector<Var<T>> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result<T>(std::move(out), "linear", parents, [N, Din, Dout](Node<T>& node) {
    CMapR<T> dy(node.grad.ptr(), N, Dout);
    if (wants_grad(node, 0))
      MapR<T>(node.parents[0]->grad_buffer().ptr(), N, Din).noalias() +=
          dy * CMapR<T>(node.parents[1]->value.ptr(), Dout, Din);
    if (wants_grad(node, 1))
      MapR<T>(node.parents[1]->grad_buffer().ptr(), Dout, Din).noalias() +=
          dy.transpose() * CMapR<T>(node.parents[0]->value.ptr(), N, Din);
    if (wants_grad(node, 2)) {
      auto& gb = node.parents[2]->grad_buffer();
      for (std::size_t d = 0; d < Dout; ++d) gb[d] += dy.col(d).sum();
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& inputs, std::size_t axis) {
  require(!inputs.empty(), "concat: no inputs");
  const Shape& first = inputs[0].shape();
  require(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> sizes;
  for (const auto& in : inputs) {
    const Shape& s = in.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    require(ok, "concat: ragged shapes " + to_string(first) + " vs " + to_string(s));
    sizes.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t total = out_shape[axis];

  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const T* src = inputs[k].value().ptr();
    const std::size_t block = sizes[k] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(src + o * block, src + (o + 1) * block, out.ptr() + (o * total + offset) * inner);
    offset += sizes[k];
  }
  return make_result<T>(std::move(out), "concat", inputs, [sizes, outer, inner, total](Node<T>& node) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t block = sizes[k] * inner;
      if (wants_grad(node, k)) {
        T* dst = node.parents[k]->grad_buffer().ptr();
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = node.grad.ptr() + (o * total + offset) * inner;
          for (std::size_t i = 0; i < block; ++i) dst[o * block + i] += src[i];
        }
      }
      offset += sizes[k];
    }
  });
}

template <typename T>
std::vector<Var<T>> split(const Var<T>& input, std::size_t axis, const std::vector<std::size_t>& sizes) {
  const Shape& s = input.shape();
  require(axis < s.size(), "split: axis out of range");
  require(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == s[axis],
          "split: sizes do not sum to dim " + std::to_string(s[axis]));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t total = s[axis];
  std::vector<Var<T>> parts;
  std::size_t offset = 0;
  for (std::size_t sz : sizes) {
    Shape ps = s;
    ps[axis] = sz;
    Tensor<T> out(ps);
    const std::size_t block = sz * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      const T* src = input.value().ptr() + (o * total + offset) * inner;
      std::copy(src, src + block, out.ptr() + o * block);
    }
    parts.push_back(make_result<T>(std::move(out), "split", {input}, [outer, inner, total, offset, block](Node<T>& node) {
      T* dst = node.parents[0]->grad_buffer().ptr();
      for (std::size_t o = 0; o < outer; ++o) {
        T* d = dst + (o * total + offset) * inner;
        for (std::size_t i = 0; i < block; ++i) d[i] += node.grad[o * block + i];
      }
    }));
    offset += sz;
  }
  return parts;
}

template <typename T>
Var<T> reshape(const Var<T>& input, Shape shape) {
  Tensor<T> out = input.value().reshaped(std::move(shape));
  return make_result<T>(std::move(out), "reshape", {input}, [](Node<T>& node) {
    auto& g = node.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
  });
}

template <typename T>
Var<T> flatten(const Var<T>& input) {
  require(input.shape().size() >= 1, "flatten: needs a batch dimension");
  const std::size_t N = input.dim(0);
  return reshape(input, Shape{N, input.value().size() / N});
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), "add", {a, b}, [](Node<T>& node) {
    for (std::size_t k = 0; k < 2; ++k)
      if (wants_grad(node, k)) {
        auto& g = node.parents[k]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
      }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), "sub", {a, b}, [](Node<T>& node) {
    if (wants_grad(node, 0)) {
      auto& g = node.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    }
    if (wants_grad(node, 1)) {
      auto& g = node.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= node.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), "mul", {a, b}, [](Node<T>& node) {
    for (std::size_t k = 0; k < 2; ++k)
      if (wants_grad(node, k)) {
        auto& g = node.parents[k]->grad_buffer();
        const auto& other = node.parents[1 - k]->value;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * other[i];
      }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
  const T k = static_cast<T>(s);
  return elementwise_unary<T>(a, "scale", [k](T x) { return k * x; }, [k](T, T) { return k; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, double s) {
  const T k = static_cast<T>(s);
  return elementwise_unary<T>(a, "add_scalar", [k](T x) { return x + k; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return elementwise_unary<T>(a, "square", [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return elementwise_unary<T>(
      a, "abs", [](T x) { return std::abs(x); },
      [](T x, T) { return x > 0 ? T{1} : (x < 0 ? T{-1} : T{0}); });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  double s = 0;
  for (T v : a.value().data()) s += v;
  return make_result<T>(Tensor<T>(Shape{}, static_cast<T>(s)), "sum", {a}, [](Node<T>& node) {
    auto& g = node.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

#define VSEGAN_INSTANTIATE_OPS(T)                                                                      \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, Hw);                             \
  template Var<T> conv_transpose2d(const Var<T>&, const Var<T>&, const Var<T>&, Hw);                   \
  template Var<T> maxpool2d(const Var<T>&, Hw);                                                        \
  template Var<T> batchnorm2d(const Var<T>&, const Var<T>&, const Var<T>&, BatchNormStats<T>&,         \
                              BatchNormMode);                                                          \
  template Var<T> leaky_relu(const Var<T>&, double);                                                   \
  template Var<T> tanh(const Var<T>&);                                                                 \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                 \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                                     \
  template std::vector<Var<T>> split(const Var<T>&, std::size_t, const std::vector<std::size_t>&);     \
  template Var<T> reshape(const Var<T>&, Shape);                                                       \
  template Var<T> flatten(const Var<T>&);                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> scale(const Var<T>&, double);                                                        \
  template Var<T> add_scalar(const Var<T>&, double);                                                   \
  template Var<T> square(const Var<T>&);                                                               \
  template Var<T> abs(const Var<T>&);                                                                  \
  template Var<T> sum(const Var<T>&);                                                                  \
  template Var<T> mean(const Var<T>&);

VSEGAN_INSTANTIATE_OPS(float)
VSEGAN_INSTANTIATE_OPS(double)

#undef VSEGAN_INSTANTIATE_OPS

}  // namespace vsegan
