#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "edr/nn/tensor.hpp"

namespace edr::nn {

// Differentiable 1D kernels. Backward functions accumulate (+=) into
// parameter gradients and overwrite input gradients unless noted.

/// x * Phi(x) with the exact erf form of the normal CDF.
double gelu(double x);
/// Phi(x) + x * phi(x).
double gelu_grad(double x);

/// y = gelu(x); `slope` (optional, same size) receives gelu'(x) for backward.
template <typename T>
void gelu_forward(std::span<const T> x, std::span<T> y, std::span<T> slope = {});
/// dx = dy * slope
template <typename T>
void gelu_backward(std::span<const T> dy, std::span<const T> slope, std::span<T> dx);

/// Per-channel correlation with zero padding and output length = input
/// length. kernel: channels x k (k odd); bias: channels or empty.
template <typename T>
void depthwise_conv1d_forward(const Tensor3<T>& x, std::span<const T> kernel, std::span<const T> bias, std::size_t k,
                              std::size_t dilation, Tensor3<T>& y);
/// dx may be null to skip the input gradient.
template <typename T>
void depthwise_conv1d_backward(const Tensor3<T>& x, std::span<const T> kernel, std::size_t k, std::size_t dilation,
                               const Tensor3<T>& dy, Tensor3<T>* dx, std::span<T> dkernel, std::span<T> dbias);

/// weight: out x in; bias: out or empty.
template <typename T>
void pointwise_conv1d_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias,
                              std::size_t out_channels, Tensor3<T>& y);
template <typename T>
void pointwise_conv1d_backward(const Tensor3<T>& x, std::span<const T> weight, const Tensor3<T>& dy, Tensor3<T>* dx,
                               std::span<T> dweight, std::span<T> dbias);

/// Dense "same" convolution, weight: out x in x k (k odd), dilation 1.
template <typename T>
void conv1d_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias, std::size_t out_channels,
                    std::size_t k, Tensor3<T>& y);
template <typename T>
void conv1d_backward(const Tensor3<T>& x, std::span<const T> weight, std::size_t k, const Tensor3<T>& dy, Tensor3<T>* dx,
                     std::span<T> dweight, std::span<T> dbias);

/// Per (batch, channel) statistics over length. xhat and inv_std are saved
/// for backward (sizes resized here).
template <typename T>
void instance_norm_forward(const Tensor3<T>& x, std::span<const T> gamma, std::span<const T> beta, double eps,
                           Tensor3<T>& y, Tensor3<T>& xhat, std::vector<T>& inv_std);
template <typename T>
void instance_norm_backward(const Tensor3<T>& xhat, const std::vector<T>& inv_std, std::span<const T> gamma,
                            const Tensor3<T>& dy, Tensor3<T>& dx, std::span<T> dgamma, std::span<T> dbeta);

/// Windowed means; a trailing partial window is dropped.
template <typename T>
void avg_pool_forward(const Tensor3<T>& x, std::size_t kernel, std::size_t stride, Tensor3<T>& y);
template <typename T>
void avg_pool_backward(const Tensor3<T>& dy, std::size_t kernel, std::size_t stride, Tensor3<T>& dx);

/// (batch, channels, length) -> (batch, channels, 1)
template <typename T>
void global_avg_pool_forward(const Tensor3<T>& x, Tensor3<T>& y);
template <typename T>
void global_avg_pool_backward(const Tensor3<T>& dy, std::size_t length, Tensor3<T>& dx);

/// (batch, in, 1) -> (batch, out, 1); weight: out x in.
template <typename T>
void linear_forward(const Tensor3<T>& x, std::span<const T> weight, std::span<const T> bias, std::size_t out_features,
                    Tensor3<T>& y);
template <typename T>
void linear_backward(const Tensor3<T>& x, std::span<const T> weight, const Tensor3<T>& dy, Tensor3<T>* dx,
                     std::span<T> dweight, std::span<T> dbias);

enum class Mode { Train, Eval };

/// Inverted dropout. `scale` receives the per-element multiplier (0 or
/// 1/(1-p)); eval mode and p = 0 are exact identities. p is resolved to
/// a multiple of 1/65536.
template <typename T>
void dropout_forward(std::span<const T> x, double p, Mode mode, std::mt19937_64& rng, std::span<T> y, std::vector<T>& scale);
template <typename T>
void dropout_backward(std::span<const T> dy, const std::vector<T>& scale, std::span<T> dx);

/// Adds x into the first channels of y (zero-padded channel shortcut).
template <typename T>
void residual_add(const Tensor3<T>& x, Tensor3<T>& y);

struct LossAndGrad {
    double loss = 0;
    std::vector<double> grad;
};
/// Mean of squared differences and its gradient 2 (pred - target) / n.
LossAndGrad mse_loss(std::span<const double> pred, std::span<const double> target);

}  // namespace edr::nn
