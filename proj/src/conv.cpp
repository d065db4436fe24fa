#include "skan/conv.hpp"

#include <cmath>
#include <sstream>

#include "skan/ops.hpp"

namespace skan {

std::size_t ConvGeometry::out_h(std::size_t h) const { return ops::conv_out_size(h, kh, stride, padding); }
std::size_t ConvGeometry::out_w(std::size_t w) const { return ops::conv_out_size(w, kw, stride, padding); }

namespace {

void check_geometry(const ConvGeometry& g) {
    if (g.in_ch == 0 || g.out_ch == 0 || g.kh == 0 || g.kw == 0 || g.stride == 0) {
        throw ContractError("conv: channels, kernel and stride must be positive");
    }
}

void check_conv_input(const char* who, const Tensor& x, const ConvGeometry& g) {
    if (x.ndim() != 4 || x.dim(1) != g.in_ch) {
        throw ContractError(std::string(who) + ": expected [batch x " + std::to_string(g.in_ch) +
                            " x H x W] input, got " + shape_str(x.shape()));
    }
}

std::string geometry_str(const ConvGeometry& g) {
    std::ostringstream os;
    os << g.in_ch << "->" << g.out_ch << ", " << g.kh << "x" << g.kw;
    if (g.stride != 1) os << " s" << g.stride;
    if (g.padding != 0) os << " p" << g.padding;
    return os.str();
}

// im2col -> per-tap edge sums -> NCHW
template <class RowsFn>
Tensor conv_via_rows(const Tensor& x, const ConvGeometry& g, RowsFn&& rows_fn) {
    const std::size_t B = x.dim(0);
    const std::size_t Ho = g.out_h(x.dim(2)), Wo = g.out_w(x.dim(3));
    Tensor cols = ops::im2col(x, g.kh, g.kw, g.stride, g.padding);
    Tensor rows = rows_fn(cols);
    return ops::rows_to_nchw(rows, B, Ho, Wo);
}

}  // namespace

// ---------------------------------------------------------------------------

ConvKANLayer::ConvKANLayer(ConvGeometry g, const BasisDescriptor& d, std::mt19937_64& rng) : geom_(g) {
    check_geometry(g);
    for (std::size_t t = 0; t < g.taps(); ++t) bundles_.push_back(EdgeBundle::create(d, g.out_ch, rng));
}

ConvKANLayer::ConvKANLayer(ConvGeometry g, std::vector<EdgeBundle> bundles) : geom_(g), bundles_(std::move(bundles)) {
    check_geometry(g);
    if (bundles_.size() != g.taps()) {
        throw ContractError("conv kan: " + std::to_string(bundles_.size()) + " bundles for " +
                            std::to_string(g.taps()) + " taps");
    }
}

std::string ConvKANLayer::describe() const {
    return "ConvKAN(" + geometry_str(geom_) + ", " + bundles_.front().descriptor.label() +
           (bundles_.size() > 1 ? "..." : "") + ")";
}

Tensor ConvKANLayer::forward(const Tensor& x) const {
    check_conv_input("conv kan", x, geom_);
    return conv_via_rows(x, geom_, [&](const Tensor& cols) { return fixed_forward(cols, geom_.out_ch, bundles_); });
}

std::vector<Tensor> ConvKANLayer::parameters() const {
    std::vector<Tensor> out;
    for (const auto& b : bundles_) out.push_back(b.params);
    return out;
}

std::unique_ptr<Layer> ConvKANLayer::clone() const {
    std::vector<EdgeBundle> copy;
    for (const auto& b : bundles_) copy.push_back(b.deep_copy());
    return std::make_unique<ConvKANLayer>(geom_, std::move(copy));
}

void ConvKANLayer::reinitialize(std::mt19937_64& rng) {
    for (auto& b : bundles_) {
        const std::size_t P = skan::param_count(b.descriptor);
        auto data = b.params.mutable_data();
        for (std::size_t o = 0; o < geom_.out_ch; ++o) init_params(b.descriptor, data.subspan(o * P, P), rng);
    }
}

EdgeFunction ConvKANLayer::edge(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const {
    if (o >= geom_.out_ch || c >= geom_.in_ch || ky >= geom_.kh || kx >= geom_.kw) {
        throw ContractError("conv kan: edge index out of range");
    }
    const auto& b = bundles_[(c * geom_.kh + ky) * geom_.kw + kx];
    const std::size_t P = skan::param_count(b.descriptor);
    auto d = b.params.data();
    std::vector<double> p(d.begin() + static_cast<long>(o * P), d.begin() + static_cast<long>((o + 1) * P));
    return {b.descriptor, Tensor::parameter({P}, std::move(p), b.descriptor.label())};
}

// ---------------------------------------------------------------------------

SelectableConvKANLayer::SelectableConvKANLayer(ConvGeometry g, const std::vector<BasisDescriptor>& pool,
                                               std::mt19937_64& rng)
    : geom_(g) {
    check_geometry(g);
    nodes_ = make_nodes(g.taps(), g.out_ch, pool, rng);
}

SelectableConvKANLayer::SelectableConvKANLayer(ConvGeometry g, std::vector<SelectableNode> nodes)
    : geom_(g), nodes_(std::move(nodes)) {
    check_geometry(g);
    if (nodes_.size() != g.taps()) throw ContractError("selectable conv kan: node count does not match taps");
}

std::string SelectableConvKANLayer::describe() const {
    return "S-ConvKAN(" + geometry_str(geom_) + ", max " + std::to_string(max_candidates()) + " candidates)";
}

Tensor SelectableConvKANLayer::forward(const Tensor& x) const {
    check_conv_input("selectable conv kan", x, geom_);
    return conv_via_rows(x, geom_,
                         [&](const Tensor& cols) { return selectable_forward(cols, geom_.out_ch, nodes_); });
}

std::vector<Tensor> SelectableConvKANLayer::parameters() const {
    std::vector<Tensor> out;
    for (const auto& n : nodes_) {
        for (const auto& c : n.candidates) out.push_back(c.params);
        out.push_back(n.weights);
    }
    return out;
}

std::unique_ptr<Layer> SelectableConvKANLayer::clone() const {
    std::vector<SelectableNode> copy;
    for (const auto& n : nodes_) {
        SelectableNode c{n.input_index, {}, n.weights.clone()};
        for (const auto& b : n.candidates) c.candidates.push_back(b.deep_copy());
        copy.push_back(std::move(c));
    }
    auto out = std::make_unique<SelectableConvKANLayer>(geom_, std::move(copy));
    out->mode_ = mode_;
    return out;
}

void SelectableConvKANLayer::reinitialize(std::mt19937_64& rng) {
    for (auto& n : nodes_) {
        for (auto& b : n.candidates) {
            const std::size_t P = skan::param_count(b.descriptor);
            auto data = b.params.mutable_data();
            for (std::size_t o = 0; o < geom_.out_ch; ++o) init_params(b.descriptor, data.subspan(o * P, P), rng);
        }
        auto w = n.weights.mutable_data();
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    }
}

std::string SelectableConvKANLayer::node_label(std::size_t node) const {
    const std::size_t kx = node % geom_.kw;
    const std::size_t ky = (node / geom_.kw) % geom_.kh;
    const std::size_t c = node / (geom_.kw * geom_.kh);
    return "c" + std::to_string(c) + "/ky" + std::to_string(ky) + "/kx" + std::to_string(kx);
}

ConvKANLayer SelectableConvKANLayer::collapse_to_fixed() const {
    std::vector<EdgeBundle> copy;
    for (const auto& b : surviving_bundles(nodes_)) copy.push_back(b.deep_copy());
    return ConvKANLayer(geom_, std::move(copy));
}

std::unique_ptr<Layer> SelectableConvKANLayer::collapse() const {
    return std::make_unique<ConvKANLayer>(collapse_to_fixed());
}

// ---------------------------------------------------------------------------

ClassicConvLayer::ClassicConvLayer(ConvGeometry g, std::mt19937_64& rng) : geom_(g) {
    check_geometry(g);
    weight_ = Tensor::parameter({g.taps(), g.out_ch}, std::vector<double>(g.taps() * g.out_ch), "conv.weight");
    bias_ = Tensor::parameter({g.out_ch}, std::vector<double>(g.out_ch), "conv.bias");
    reinitialize(rng);
}

ClassicConvLayer::ClassicConvLayer(ConvGeometry g, Tensor weight, Tensor bias, bool relu)
    : geom_(g), weight_(std::move(weight)), bias_(std::move(bias)), relu_(relu) {
    check_geometry(g);
    if (weight_.shape() != Shape{g.taps(), g.out_ch} || bias_.numel() != g.out_ch) {
        throw ContractError("conv: weight must be [" + std::to_string(g.taps()) + " x " +
                            std::to_string(g.out_ch) + "] with " + std::to_string(g.out_ch) + " biases");
    }
}

std::string ClassicConvLayer::describe() const { return "Conv(" + geometry_str(geom_) + ", ReLU)"; }

Tensor ClassicConvLayer::forward(const Tensor& x) const {
    check_conv_input("conv", x, geom_);
    return conv_via_rows(x, geom_, [&](const Tensor& cols) {
        Tensor z = ops::add_rowwise(ops::matmul(cols, weight_), bias_);
        return relu_ ? ops::relu(z) : z;
    });
}

std::unique_ptr<Layer> ClassicConvLayer::clone() const {
    return std::make_unique<ClassicConvLayer>(geom_, weight_.clone(), bias_.clone(), relu_);
}

void ClassicConvLayer::reinitialize(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(geom_.taps()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : weight_.mutable_data()) v = u(rng);
    for (auto& v : bias_.mutable_data()) v = u(rng);
}

}  // namespace skan
