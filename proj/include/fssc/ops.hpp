#pragma once

#include <vector>

#include "fssc/tensor.hpp"

// Differentiable primitives. Every function records its backward pass on the
// thread's active Tape when an input requires grad.
//
// Binary elementwise ops broadcast only along leading dimensions: the second
// operand's shape must equal the first's, be a trailing suffix of it, or hold
// a single element.

namespace fssc {

template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> scale(const Tensor<S>& x, S factor);

template <typename S> Tensor<S> gelu(const Tensor<S>& x);
template <typename S> Tensor<S> sigmoid(const Tensor<S>& x);

/// Matrix product of rank-2 operands, or batched over a shared leading
/// extent for rank-3 operands. Transposes apply to the last two axes.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, bool transpose_a = false,
                 bool transpose_b = false);

/// x[..., in] * weight[in, out] + bias[out]; bias may be undefined.
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias);

/// Max-subtracted softmax along `axis` (negative counts from the back).
template <typename S> Tensor<S> softmax(const Tensor<S>& x, Index axis = -1);

/// Normalizes each row over the last extent d, then applies gain[d] and bias[d].
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     S eps = S(1e-5));

template <typename S> Tensor<S> reshape(const Tensor<S>& x, Shape shape);

/// Axis permutation; out.shape[i] = x.shape[axes[i]].
template <typename S> Tensor<S> permute(const Tensor<S>& x, const std::vector<Index>& axes);

/// index_select along `axis`; indices may repeat (gradients add up).
template <typename S>
Tensor<S> gather(const Tensor<S>& x, Index axis, const std::vector<Index>& indices);

template <typename S> Tensor<S> sum(const Tensor<S>& x);
template <typename S> Tensor<S> mean(const Tensor<S>& x);

/// Mean squared error between equally shaped tensors, as a 1-element tensor.
template <typename S> Tensor<S> mse_loss(const Tensor<S>& x, const Tensor<S>& target);

/// Cross-correlation of x[B, Cin, H, W] with kernels[Cout, Cin, k, k], zero
/// padding floor(k/2). bias[Cout] may be undefined.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias,
                 Index stride);

/// Adjoint of conv2d with the same kernel tensor: x[B, Cout, h, w] maps to
/// [B, Cin, h*stride, w*stride]. bias[Cin] may be undefined.
template <typename S>
Tensor<S> conv2d_transposed(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias,
                            Index stride);

}  // namespace fssc
