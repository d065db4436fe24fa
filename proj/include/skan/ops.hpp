#pragma once

// Differentiable primitives over Tensor. Every op validates shapes and throws
// ContractError on mismatch.

#include <span>

#include "skan/tensor.hpp"

namespace skan::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
/// Sum of any number of same-shaped tensors.
Tensor add_n(std::span<const Tensor> xs);

/// [n x k] * [k x m]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Adds a length-m vector to every row of an [n x m] matrix.
Tensor add_rowwise(const Tensor& a, const Tensor& row);

Tensor tanh(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);

/// [B x C x H x W] -> [B x C x H/2 x W/2], 2x2 window, stride 2 (floor).
Tensor maxpool2(const Tensor& x);
/// [B x ...] -> [B x prod(...)]
Tensor flatten(const Tensor& x);

/// Sliding-window gather of an NCHW tensor into [(B*Ho*Wo) x (C*kh*kw)],
/// column order (c, ky, kx). Zero padding.
Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride,
              std::size_t padding);
/// [(B*Ho*Wo) x O] -> [B x O x Ho x Wo]
Tensor rows_to_nchw(const Tensor& rows, std::size_t batch, std::size_t ho, std::size_t wo);

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding);

}  // namespace skan::ops
