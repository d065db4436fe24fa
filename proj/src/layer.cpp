#include "skan/layer.hpp"

#include <cmath>

#include "skan/ops.hpp"

namespace skan {

void Layer::set_trainable(TrainMode mode) {
    for (auto& p : parameters()) p.set_requires_grad(mode == TrainMode::All);
}

std::size_t Layer::param_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
}

Tensor ReLULayer::forward(const Tensor& x) const { return ops::relu(x); }
Tensor MaxPool2Layer::forward(const Tensor& x) const { return ops::maxpool2(x); }
Tensor FlattenLayer::forward(const Tensor& x) const { return ops::flatten(x); }

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng) {
    if (in_dim == 0 || out_dim == 0) throw ContractError("linear: dimensions must be positive");
    weight_ = Tensor::parameter({in_dim, out_dim}, std::vector<double>(in_dim * out_dim), "linear.weight");
    bias_ = Tensor::parameter({out_dim}, std::vector<double>(out_dim), "linear.bias");
    reinitialize(rng);
}

LinearLayer::LinearLayer(Tensor weight, Tensor bias) : weight_(std::move(weight)), bias_(std::move(bias)) {
    if (weight_.ndim() != 2 || bias_.ndim() != 1 || bias_.dim(0) != weight_.dim(1)) {
        throw ContractError("linear: weight must be [in x out] and bias [out], got " + shape_str(weight_.shape()) +
                            " and " + shape_str(bias_.shape()));
    }
}

std::string LinearLayer::describe() const {
    return "Linear(" + std::to_string(in_dim()) + "->" + std::to_string(out_dim()) + ")";
}

Tensor LinearLayer::forward(const Tensor& x) const {
    if (x.ndim() != 2 || x.dim(1) != in_dim()) {
        throw ContractError("linear: expected [batch x " + std::to_string(in_dim()) + "] input, got " +
                            shape_str(x.shape()));
    }
    return ops::add_rowwise(ops::matmul(x, weight_), bias_);
}

std::unique_ptr<Layer> LinearLayer::clone() const {
    return std::make_unique<LinearLayer>(weight_.clone(), bias_.clone());
}

void LinearLayer::reinitialize(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : weight_.mutable_data()) v = u(rng);
    for (auto& v : bias_.mutable_data()) v = u(rng);
}

}  // namespace skan
