#ifndef ORALSCAN_LAYERS_HPP
#define ORALSCAN_LAYERS_HPP

// Forward and backward primitives for every layer type in the classifier:
// 2-D convolution, ReLU, 2x2 max-pool, fully connected, softmax and the
// cross-entropy objective. All functions are pure; gradients are wired by hand.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "oralscan/tensor.hpp"

namespace oralscan {

template <typename Scalar>
struct ConvKernelSet {
  Tensor<Scalar> weights;  // [out_channels, in_channels, kh, kw]
  Tensor<Scalar> bias;     // [out_channels]
  Index stride = 1;
  Index padding = 0;

  ConvKernelSet() = default;
  ConvKernelSet(Tensor<Scalar> w, Tensor<Scalar> b, Index stride_ = 1, Index padding_ = 0)
      : weights(std::move(w)), bias(std::move(b)), stride(stride_), padding(padding_) {
    validate();
  }

  Index out_channels() const { return weights.dim(0); }
  Index in_channels() const { return weights.dim(1); }
  Index kernel_h() const { return weights.dim(2); }
  Index kernel_w() const { return weights.dim(3); }
  Index patch_size() const { return in_channels() * kernel_h() * kernel_w(); }

  void validate() const {
    if (weights.rank() != 4) {
      throw ShapeError("conv weights must be rank 4 [out,in,kh,kw], got " + shape_string(weights.shape()));
    }
    require_shape(bias.shape(), {weights.dim(0)}, "conv bias");
    if (stride < 1) throw ShapeError("conv stride must be >= 1");
    if (padding < 0) throw ShapeError("conv padding must be >= 0");
  }
};

/// Flat input index of the winning element for each pooled cell.
struct PoolIndexMap {
  Shape input_shape;
  Shape output_shape;
  std::vector<Index> argmax;
};

template <typename Scalar>
Shape conv2d_output_shape(const Shape& input, const ConvKernelSet<Scalar>& k) {
  k.validate();
  if (input.size() != 3) throw ShapeError("conv input must be [C,H,W], got " + shape_string(input));
  if (input[0] != k.in_channels()) {
    throw ShapeError("conv input has " + std::to_string(input[0]) + " channels, kernel expects " +
                     std::to_string(k.in_channels()));
  }
  const Index span_h = input[1] + 2 * k.padding - k.kernel_h();
  const Index span_w = input[2] + 2 * k.padding - k.kernel_w();
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv kernel " + shape_string(k.weights.shape()) + " larger than padded input " +
                     shape_string(input) + " (zero-sized output)");
  }
  return {k.out_channels(), span_h / k.stride + 1, span_w / k.stride + 1};
}

namespace detail {

template <typename Acc>
using AccMatrix = Eigen::Matrix<Acc, Eigen::Dynamic, Eigen::Dynamic>;

/// Unfolds every receptive field into one column: rows follow (c, i, j), columns (oy, ox).
template <typename Scalar, typename Acc = Accumulator<Scalar>>
AccMatrix<Acc> im2col(const Tensor<Scalar>& input, const ConvKernelSet<Scalar>& k, const Shape& out) {
  const Index C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const Index kh = k.kernel_h(), kw = k.kernel_w();
  const Index Ho = out[1], Wo = out[2];
  AccMatrix<Acc> cols(k.patch_size(), Ho * Wo);
  for (Index c = 0; c < C; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Index row = (c * kh + i) * kw + j;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index y = oy * k.stride - k.padding + i;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index x = ox * k.stride - k.padding + j;
            const bool inside = y >= 0 && y < H && x >= 0 && x < W;
            cols(row, oy * Wo + ox) = inside ? static_cast<Acc>(input(c, y, x)) : Acc{0};
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar, typename Acc>
Tensor<Scalar> col2im(const AccMatrix<Acc>& cols, const Shape& input_shape, const ConvKernelSet<Scalar>& k,
                      const Shape& out) {
  const Index C = input_shape[0], H = input_shape[1], W = input_shape[2];
  const Index kh = k.kernel_h(), kw = k.kernel_w();
  const Index Ho = out[1], Wo = out[2];
  Eigen::Matrix<Acc, Eigen::Dynamic, 1> grad = Eigen::Matrix<Acc, Eigen::Dynamic, 1>::Zero(C * H * W);
  for (Index c = 0; c < C; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Index row = (c * kh + i) * kw + j;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index y = oy * k.stride - k.padding + i;
          if (y < 0 || y >= H) continue;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index x = ox * k.stride - k.padding + j;
            if (x < 0 || x >= W) continue;
            grad[(c * H + y) * W + x] += cols(row, oy * Wo + ox);
          }
        }
      }
    }
  }
  return Tensor<Scalar>(input_shape, grad.template cast<Scalar>());
}

}  // namespace detail

/// Cross-correlation with zero padding; each output is the window dot product plus bias.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const ConvKernelSet<Scalar>& k) {
  using Acc = Accumulator<Scalar>;
  const Shape out = conv2d_output_shape(input.shape(), k);
  const auto cols = detail::im2col(input, k, out);
  const detail::AccMatrix<Acc> w = k.weights.as_matrix(k.out_channels(), k.patch_size()).template cast<Acc>();
  detail::AccMatrix<Acc> result = w * cols;
  result.colwise() += k.bias.values().template cast<Acc>();
  Tensor<Scalar> y(out);
  y.as_matrix(out[0], out[1] * out[2]) = result.template cast<Scalar>();
  return y;
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const ConvKernelSet<Scalar>& k,
                                  const Tensor<Scalar>& grad_out) {
  using Acc = Accumulator<Scalar>;
  const Shape out = conv2d_output_shape(input.shape(), k);
  require_shape(grad_out.shape(), out, "conv2d_backward grad_out");

  const auto cols = detail::im2col(input, k, out);
  const detail::AccMatrix<Acc> g = grad_out.as_matrix(out[0], out[1] * out[2]).template cast<Acc>();
  const detail::AccMatrix<Acc> w = k.weights.as_matrix(k.out_channels(), k.patch_size()).template cast<Acc>();

  ConvGrads<Scalar> grads;
  grads.bias = Tensor<Scalar>(k.bias.shape(), g.rowwise().sum().template cast<Scalar>());
  grads.weights = Tensor<Scalar>(k.weights.shape());
  grads.weights.as_matrix(k.out_channels(), k.patch_size()) = (g * cols.transpose()).template cast<Scalar>();
  const detail::AccMatrix<Acc> grad_cols = w.transpose() * g;
  grads.input = detail::col2im<Scalar, Acc>(grad_cols, input.shape(), k, out);
  return grads;
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.values().cwiseMax(Scalar{0}));
}

/// Subgradient at exactly zero is taken as zero.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  require_shape(grad_out.shape(), x.shape(), "relu_backward grad_out");
  typename Tensor<Scalar>::Vector g =
      (x.values().array() > Scalar{0}).select(grad_out.values(), Scalar{0});
  return Tensor<Scalar>(x.shape(), std::move(g));
}

/// 2x2 max-pool with stride 2. Ties go to the lowest flat index.
template <typename Scalar>
std::pair<Tensor<Scalar>, PoolIndexMap> maxpool2_forward(const Tensor<Scalar>& x) {
  if (x.rank() != 3) throw ShapeError("maxpool input must be [C,H,W], got " + shape_string(x.shape()));
  const Index C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("maxpool requires even spatial dims, got " + shape_string(x.shape()));
  }
  const Index Ho = H / 2, Wo = W / 2;
  Tensor<Scalar> y({C, Ho, Wo});
  PoolIndexMap map{x.shape(), y.shape(), std::vector<Index>(static_cast<std::size_t>(C * Ho * Wo))};
  for (Index c = 0; c < C; ++c) {
    for (Index oy = 0; oy < Ho; ++oy) {
      for (Index ox = 0; ox < Wo; ++ox) {
        Index best = (c * H + 2 * oy) * W + 2 * ox;
        Scalar best_value = x[best];
        for (Index dy = 0; dy < 2; ++dy) {
          for (Index dx = 0; dx < 2; ++dx) {
            const Index idx = (c * H + 2 * oy + dy) * W + 2 * ox + dx;
            if (x[idx] > best_value) {
              best = idx;
              best_value = x[idx];
            }
          }
        }
        const Index out = (c * Ho + oy) * Wo + ox;
        y[out] = best_value;
        map.argmax[static_cast<std::size_t>(out)] = best;
      }
    }
  }
  return {std::move(y), std::move(map)};
}

template <typename Scalar>
Tensor<Scalar> maxpool2_backward(const PoolIndexMap& idx, const Tensor<Scalar>& grad_out) {
  require_shape(grad_out.shape(), idx.output_shape, "maxpool2_backward grad_out");
  Tensor<Scalar> grad(idx.input_shape);
  for (Index i = 0; i < grad_out.size(); ++i) grad[idx.argmax[static_cast<std::size_t>(i)]] += grad_out[i];
  return grad;
}

template <typename Scalar>
struct DenseLayer {
  Tensor<Scalar> weights;  // [outputs, inputs]
  Tensor<Scalar> bias;     // [outputs]
};

namespace detail {
template <typename Scalar>
void check_dense(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const char* what) {
  if (x.rank() != 1) throw ShapeError(std::string(what) + ": input must be rank 1, got " + shape_string(x.shape()));
  if (w.rank() != 2 || w.dim(1) != x.dim(0)) {
    throw ShapeError(std::string(what) + ": weights " + shape_string(w.shape()) + " do not accept input " +
                     shape_string(x.shape()));
  }
}
}  // namespace detail

/// y_i = b_i + sum_j W_ij x_j
template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
  using Acc = Accumulator<Scalar>;
  detail::check_dense(x, w, "dense_forward");
  require_shape(b.shape(), {w.dim(0)}, "dense_forward bias");
  const auto wm = w.as_matrix(w.dim(0), w.dim(1));
  Eigen::Matrix<Acc, Eigen::Dynamic, 1> y =
      wm.template cast<Acc>() * x.values().template cast<Acc>() + b.values().template cast<Acc>();
  return Tensor<Scalar>({w.dim(0)}, y.template cast<Scalar>());
}

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& grad_out) {
  using Acc = Accumulator<Scalar>;
  detail::check_dense(x, w, "dense_backward");
  require_shape(grad_out.shape(), {w.dim(0)}, "dense_backward grad_out");
  const auto wm = w.as_matrix(w.dim(0), w.dim(1));
  const Eigen::Matrix<Acc, Eigen::Dynamic, 1> g = grad_out.values().template cast<Acc>();
  DenseGrads<Scalar> grads;
  grads.input = Tensor<Scalar>(x.shape(), (wm.template cast<Acc>().transpose() * g).template cast<Scalar>());
  grads.weights = Tensor<Scalar>(w.shape());
  grads.weights.as_matrix(w.dim(0), w.dim(1)) = (grad_out.values() * x.values().transpose());
  grads.bias = grad_out;
  return grads;
}

/// Max-subtracted softmax; overflow safe for any finite logits.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  using Acc = Accumulator<Scalar>;
  if (logits.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor, got " + shape_string(logits.shape()));
  const Eigen::Matrix<Acc, Eigen::Dynamic, 1> z = logits.values().template cast<Acc>();
  const Eigen::Matrix<Acc, Eigen::Dynamic, 1> e = (z.array() - z.maxCoeff()).exp().matrix();
  return Tensor<Scalar>(logits.shape(), (e / e.sum()).template cast<Scalar>());
}

template <typename Scalar>
struct CrossEntropy {
  Scalar loss;
  Tensor<Scalar> grad_logits;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Loss -ln p[target] (floored) and its gradient with respect to the logits.
template <typename Scalar>
CrossEntropy<Scalar> cross_entropy(const Tensor<Scalar>& probs, Index target) {
  if (probs.rank() != 1) throw ShapeError("cross_entropy expects rank-1 probabilities");
  if (target < 0 || target >= probs.size()) {
    throw std::out_of_range("cross_entropy target " + std::to_string(target) + " out of range for " +
                            std::to_string(probs.size()) + " classes");
  }
  const double p = std::max(static_cast<double>(probs[target]), kProbabilityFloor);
  Tensor<Scalar> grad = probs;
  grad[target] -= Scalar{1};
  return {static_cast<Scalar>(0.0 - std::log(p)), std::move(grad)};
}

}  // namespace oralscan

#endif  // ORALSCAN_LAYERS_HPP
