#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skan/tensor.hpp"

namespace skan {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment accumulators for one parameter set. Shapes are bound on the first
/// step and checked on every later one.
struct AdamState {
    AdamOptions options;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(AdamOptions opts) : options(opts) {}
};

/// One bias-corrected Adam update. Gradients are left untouched; callers
/// zero them. Throws ContractError naming any parameter without a gradient.
void adam_step(std::span<const Tensor> params, AdamState& state);

void zero_grads(std::span<const Tensor> params);

/// Mean of squared elementwise differences.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Mean negative log-softmax of the labelled class over a [batch x classes]
/// logit matrix, with max-subtraction.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

}  // namespace skan
