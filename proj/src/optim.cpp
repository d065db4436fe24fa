#include "skan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace skan {

void adam_step(std::span<const Tensor> params, AdamState& state) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            const auto& n = params[i].name();
            throw ContractError("adam_step: parameter " + std::to_string(i) +
                                (n.empty() ? std::string{} : " '" + n + "'") + " has no gradient");
        }
    }
    if (state.step == 0 && state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.numel(), 0.0);
            state.second_moment.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ContractError("adam_step: state holds " + std::to_string(state.first_moment.size()) +
                            " accumulators for " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.first_moment[i].size() != params[i].numel()) {
            throw ContractError("adam_step: accumulator size mismatch for parameter " +
                                std::to_string(i));
        }
    }

    ++state.step;
    const auto& o = state.options;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(o.beta1, t);
    const double bc2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        auto w = p.mutable_data();
        auto g = p.grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
            v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
        }
    }
}

void zero_grads(std::span<const Tensor> params) {
    for (auto p : params) p.zero_grad();
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ContractError("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                            shape_str(target.shape()));
    }
    const std::size_t n = pred.numel();
    if (n == 0) throw ContractError("mse_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return make_result({}, {acc / static_cast<double>(n)}, {pred, target},
                       [pred, target, n](TensorImpl& self) {
                           const double c = 2.0 * self.grad[0] / static_cast<double>(n);
                           if (pred.requires_grad()) {
                               auto g = pred.impl()->grad_buffer();
                               for (std::size_t i = 0; i < n; ++i) g[i] += c * (pred[i] - target[i]);
                           }
                           if (target.requires_grad()) {
                               auto g = target.impl()->grad_buffer();
                               for (std::size_t i = 0; i < n; ++i) g[i] -= c * (pred[i] - target[i]);
                           }
                       });
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
    if (logits.ndim() != 2) {
        throw ContractError("cross_entropy_loss: logits must be [batch x classes], got " +
                            shape_str(logits.shape()));
    }
    const std::size_t B = logits.dim(0), C = logits.dim(1);
    if (labels.size() != B) {
        throw ContractError("cross_entropy_loss: " + std::to_string(labels.size()) +
                            " labels for batch of " + std::to_string(B));
    }
    if (B == 0) throw ContractError("cross_entropy_loss: empty batch");
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= C) {
            throw ContractError("cross_entropy_loss: label " + std::to_string(labels[b]) +
                                " at row " + std::to_string(b) + " outside [0, " +
                                std::to_string(C) + ")");
        }
    }
    std::vector<double> softmax(B * C);
    double total = 0.0;
    auto z = logits.data();
    for (std::size_t b = 0; b < B; ++b) {
        const double* row = z.data() + b * C;
        const double mx = *std::max_element(row, row + C);
        double denom = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            softmax[b * C + c] = std::exp(row[c] - mx);
            denom += softmax[b * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) softmax[b * C + c] /= denom;
        total += -(row[labels[b]] - mx - std::log(denom));
    }
    std::vector<int> lab(labels.begin(), labels.end());
    return make_result({}, {total / static_cast<double>(B)}, {logits},
                       [logits, softmax = std::move(softmax), lab = std::move(lab), B, C](TensorImpl& self) {
                           if (!logits.requires_grad()) return;
                           auto g = logits.impl()->grad_buffer();
                           const double c0 = self.grad[0] / static_cast<double>(B);
                           for (std::size_t b = 0; b < B; ++b)
                               for (std::size_t c = 0; c < C; ++c) {
                                   double d = softmax[b * C + c] - (static_cast<int>(c) == lab[b] ? 1.0 : 0.0);
                                   g[b * C + c] += c0 * d;
                               }
                       });
}

}  // namespace skan
