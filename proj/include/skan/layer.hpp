#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "skan/tensor.hpp"

namespace skan {

class BinaryWriter;

enum class TrainMode { All, WeightsOnly };

/// A node in a sequential model. Layers own their parameter tensors; clone()
/// produces an independent deep copy.
class Layer {
public:
    virtual ~Layer() = default;

    /// Stable tag used by checkpoints ("kan", "skan", "conv_kan", ...).
    virtual std::string kind() const = 0;
    virtual std::string describe() const { return kind(); }
    virtual Tensor forward(const Tensor& x) const = 0;
    virtual std::vector<Tensor> parameters() const { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual void reinitialize(std::mt19937_64& /*rng*/) {}
    /// Default: everything trains under All, nothing under WeightsOnly.
    virtual void set_trainable(TrainMode mode);
    virtual void write(BinaryWriter& out) const;

    std::size_t param_count() const;
};

/// Pointwise ReLU.
class ReLULayer final : public Layer {
public:
    std::string kind() const override { return "relu"; }
    Tensor forward(const Tensor& x) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLULayer>(); }
};

class MaxPool2Layer final : public Layer {
public:
    std::string kind() const override { return "maxpool2"; }
    Tensor forward(const Tensor& x) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2Layer>(); }
};

class FlattenLayer final : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Tensor forward(const Tensor& x) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(); }
};

/// Fully connected y = x W + b, W stored [in x out]. Uniform(+-1/sqrt(in)) init.
class LinearLayer final : public Layer {
public:
    LinearLayer(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng);
    LinearLayer(Tensor weight, Tensor bias);

    std::string kind() const override { return "linear"; }
    std::string describe() const override;
    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override { return {weight_, bias_}; }
    std::unique_ptr<Layer> clone() const override;
    void reinitialize(std::mt19937_64& rng) override;
    void write(BinaryWriter& out) const override;

    std::size_t in_dim() const { return weight_.dim(0); }
    std::size_t out_dim() const { return weight_.dim(1); }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }

private:
    Tensor weight_;
    Tensor bias_;
};

}  // namespace skan
