#pragma once

// Convolutional KAN layers and the classic convolution baseline.
//
// Both KAN variants gather sliding windows into a [(B*Ho*Wo) x (C*kh*kw)]
// matrix and evaluate one KAN edge per (out channel, in channel, ky, kx),
// summing over the window. No bias, no outer activation.

#include "skan/kan_layer.hpp"

namespace skan {

struct ConvGeometry {
    std::size_t in_ch = 1;
    std::size_t out_ch = 1;
    std::size_t kh = 1;
    std::size_t kw = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t taps() const { return in_ch * kh * kw; }
    std::size_t out_h(std::size_t h) const;
    std::size_t out_w(std::size_t w) const;
    bool operator==(const ConvGeometry&) const = default;
};

class ConvKANLayer final : public Layer {
public:
    ConvKANLayer(ConvGeometry g, const BasisDescriptor& d, std::mt19937_64& rng);
    /// bundles indexed by tap (c, ky, kx) in that nesting order.
    ConvKANLayer(ConvGeometry g, std::vector<EdgeBundle> bundles);

    std::string kind() const override { return "conv_kan"; }
    std::string describe() const override;
    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<Layer> clone() const override;
    void reinitialize(std::mt19937_64& rng) override;
    void write(BinaryWriter& out) const override;

    const ConvGeometry& geometry() const { return geom_; }
    const std::vector<EdgeBundle>& bundles() const { return bundles_; }
    std::vector<EdgeBundle>& bundles() { return bundles_; }
    /// Copy of the edge for (out channel o, in channel c, ky, kx).
    EdgeFunction edge(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const;

private:
    ConvGeometry geom_;
    std::vector<EdgeBundle> bundles_;
};

/// Selection happens per (in channel, ky, kx) tap; each candidate bundle
/// spans all output channels.
class SelectableConvKANLayer final : public SelectableLayer {
public:
    SelectableConvKANLayer(ConvGeometry g, const std::vector<BasisDescriptor>& pool, std::mt19937_64& rng);
    SelectableConvKANLayer(ConvGeometry g, std::vector<SelectableNode> nodes);

    std::string kind() const override { return "sconv_kan"; }
    std::string describe() const override;
    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<Layer> clone() const override;
    void reinitialize(std::mt19937_64& rng) override;
    void write(BinaryWriter& out) const override;

    std::vector<SelectableNode>& nodes() override { return nodes_; }
    const std::vector<SelectableNode>& nodes() const override { return nodes_; }
    std::string node_label(std::size_t node) const override;
    std::unique_ptr<Layer> collapse() const override;
    ConvKANLayer collapse_to_fixed() const;

    const ConvGeometry& geometry() const { return geom_; }

private:
    ConvGeometry geom_;
    std::vector<SelectableNode> nodes_;
};

/// psi(sum w x + b) with psi = ReLU. Weight stored [taps x out_ch] so the
/// forward pass is im2col * W.
class ClassicConvLayer final : public Layer {
public:
    ClassicConvLayer(ConvGeometry g, std::mt19937_64& rng);
    ClassicConvLayer(ConvGeometry g, Tensor weight, Tensor bias, bool relu = true);

    std::string kind() const override { return "conv"; }
    std::string describe() const override;
    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override { return {weight_, bias_}; }
    std::unique_ptr<Layer> clone() const override;
    void reinitialize(std::mt19937_64& rng) override;
    void write(BinaryWriter& out) const override;

    const ConvGeometry& geometry() const { return geom_; }
    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    bool applies_relu() const { return relu_; }

private:
    ConvGeometry geom_;
    Tensor weight_;
    Tensor bias_;
    bool relu_ = true;
};

}  // namespace skan
