#include <cmath>

#include "doctest.h"
#include "skan/bench.hpp"
#include "skan/conv.hpp"
#include "support.hpp"

using namespace skan;
using skan::test::max_grad_error;
using skan::test::uniform;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double at(const std::vector<double>& x, std::size_t C, std::size_t H, std::size_t W, std::size_t b, std::size_t c,
          long y, long xx) {
    if (y < 0 || xx < 0 || y >= static_cast<long>(H) || xx >= static_cast<long>(W)) return 0.0;
    return x[((b * C + c) * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(xx)];
}

// Quadruple-loop ConvKAN oracle evaluating each edge on its own.
std::vector<double> conv_kan_oracle(const ConvKANLayer& layer, const std::vector<double>& x, std::size_t B,
                                    std::size_t H, std::size_t W) {
    const auto& g = layer.geometry();
    const std::size_t Ho = g.out_h(H), Wo = g.out_w(W);
    std::vector<double> out(B * g.out_ch * Ho * Wo, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < g.out_ch; ++o)
            for (std::size_t a = 0; a < Ho; ++a)
                for (std::size_t be = 0; be < Wo; ++be) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < g.in_ch; ++c)
                        for (std::size_t i = 0; i < g.kh; ++i)
                            for (std::size_t j = 0; j < g.kw; ++j) {
                                const long yy = static_cast<long>(a * g.stride + i) - static_cast<long>(g.padding);
                                const long xx = static_cast<long>(be * g.stride + j) - static_cast<long>(g.padding);
                                const double v = at(x, g.in_ch, H, W, b, c, yy, xx);
                                s += eval_edge(layer.edge(o, c, i, j), Tensor::from({1}, {v})).item();
                            }
                    out[((b * g.out_ch + o) * Ho + a) * Wo + be] = s;
                }
    return out;
}

std::vector<double> classic_oracle(const ClassicConvLayer& layer, const std::vector<double>& x, std::size_t B,
                                   std::size_t H, std::size_t W) {
    const auto& g = layer.geometry();
    const std::size_t Ho = g.out_h(H), Wo = g.out_w(W);
    std::vector<double> out(B * g.out_ch * Ho * Wo, 0.0);
    const auto w = layer.weight().data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < g.out_ch; ++o)
            for (std::size_t a = 0; a < Ho; ++a)
                for (std::size_t be = 0; be < Wo; ++be) {
                    double s = layer.bias()[o];
                    for (std::size_t c = 0; c < g.in_ch; ++c)
                        for (std::size_t i = 0; i < g.kh; ++i)
                            for (std::size_t j = 0; j < g.kw; ++j) {
                                const long yy = static_cast<long>(a * g.stride + i) - static_cast<long>(g.padding);
                                const long xx = static_cast<long>(be * g.stride + j) - static_cast<long>(g.padding);
                                const std::size_t tap = (c * g.kh + i) * g.kw + j;
                                s += w[tap * g.out_ch + o] * at(x, g.in_ch, H, W, b, c, yy, xx);
                            }
                    out[((b * g.out_ch + o) * Ho + a) * Wo + be] = layer.applies_relu() ? std::max(0.0, s) : s;
                }
    return out;
}

}  // namespace

TEST_CASE("conv KAN: zero coefficients give zero") {
    std::mt19937_64 rng(1);
    ConvKANLayer layer({1, 1, 2, 2, 1, 0}, default_descriptor(BasisKind::Chebyshev), rng);
    for (const auto& p : layer.parameters())
        for (auto& v : p.impl()->data) v = 0.0;
    const auto y = layer.forward(Tensor::from({1, 1, 2, 2}, {0.1, -0.4, 0.9, 0.3}));
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.item() == 0.0);
}

TEST_CASE("conv KAN: 1x1 kernel with T1 edge is elementwise tanh") {
    const auto d = default_descriptor(BasisKind::Chebyshev);
    ConvKANLayer layer({1, 1, 1, 1, 1, 0}, std::vector<EdgeBundle>{{d, Tensor::parameter({5}, {0, 1, 0, 0, 0})}});
    const auto xs = uniform(12, -2, 2, 2);
    const auto y = layer.forward(Tensor::from({1, 1, 3, 4}, xs));
    CHECK(y.shape() == Shape{1, 1, 3, 4});
    for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(y[i] - std::tanh(xs[i])) < 1e-15);
}

TEST_CASE("conv KAN: matches the sliding-window oracle") {
    struct Case {
        ConvGeometry g;
        std::size_t B, H, W;
    };
    const std::vector<Case> cases{{{1, 1, 2, 2, 1, 0}, 1, 3, 3},
                                  {{2, 3, 2, 2, 1, 0}, 2, 4, 3},
                                  {{2, 2, 3, 3, 1, 1}, 1, 5, 5},
                                  {{1, 2, 3, 2, 2, 1}, 2, 6, 5}};
    for (const auto& c : cases) {
        std::mt19937_64 rng(3);
        ConvKANLayer layer(c.g, default_descriptor(BasisKind::RBF), rng);
        const auto xs = uniform(c.B * c.g.in_ch * c.H * c.W, -1, 1, 4);
        const auto y = layer.forward(Tensor::from({c.B, c.g.in_ch, c.H, c.W}, xs));
        CHECK(y.shape() == Shape{c.B, c.g.out_ch, c.g.out_h(c.H), c.g.out_w(c.W)});
        const auto ref = conv_kan_oracle(layer, xs, c.B, c.H, c.W);
        REQUIRE(ref.size() == y.numel());
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(y[k] - ref[k]) < 1e-12);
    }
}

TEST_CASE("conv KAN: mixed-family kernel matches the oracle") {
    const auto pool = default_pool();
    std::mt19937_64 rng(5);
    std::vector<EdgeBundle> bundles;
    for (std::size_t t = 0; t < 4; ++t) bundles.push_back(EdgeBundle::create(pool[t * 3], 2, rng));
    ConvKANLayer layer({1, 2, 2, 2, 1, 0}, bundles);
    const auto xs = uniform(9, -1, 1, 6);
    const auto y = layer.forward(Tensor::from({1, 1, 3, 3}, xs));
    const auto ref = conv_kan_oracle(layer, xs, 1, 3, 3);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(y[k] - ref[k]) < 1e-12);
}

TEST_CASE("conv KAN: gradients") {
    std::mt19937_64 rng(7);
    ConvKANLayer layer({2, 2, 2, 2, 1, 1}, default_descriptor(BasisKind::WaveletMexicanHat), rng);
    Tensor x = Tensor::parameter({1, 2, 3, 3}, uniform(18, -1, 1, 8));
    Tensor w = Tensor::from({1, 2, 4, 4}, uniform(32, -1, 1, 9));
    auto f = [&] { return ops::sum(ops::mul(layer.forward(x), w)); };
    CHECK(max_grad_error(f, x) < 1e-4);
    CHECK(max_grad_error(f, layer.parameters()[0]) < 1e-4);
}

TEST_CASE("conv KAN: incompatible input") {
    std::mt19937_64 rng(10);
    ConvKANLayer layer({2, 1, 3, 3, 1, 0}, default_descriptor(BasisKind::Chebyshev), rng);
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({1, 1, 5, 5})), ContractError);
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({1, 2, 2, 2})), ContractError);
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({2, 5, 5})), ContractError);
}

// ---------------------------------------------------------------------------

TEST_CASE("classic conv: zero weights, bias 1") {
    ConvGeometry g{1, 2, 3, 3, 1, 1};
    ClassicConvLayer layer(g, Tensor::parameter({9, 2}, std::vector<double>(18, 0.0)), Tensor::parameter({2}, {1.0, 1.0}));
    const auto y = layer.forward(Tensor::from({1, 1, 4, 4}, uniform(16, -5, 5, 1)));
    for (double v : y.data()) CHECK(v == 1.0);
}

TEST_CASE("classic conv: identity kernel clamps negatives") {
    ClassicConvLayer layer({1, 1, 1, 1, 1, 0}, Tensor::parameter({1, 1}, {1.0}), Tensor::parameter({1}, {0.0}));
    const auto y = layer.forward(Tensor::from({1, 1, 1, 3}, {-2.0, 0.5, -0.1}));
    CHECK(values(y) == std::vector<double>{0.0, 0.5, 0.0});
}

TEST_CASE("classic conv: matches the loop oracle") {
    for (const ConvGeometry& g : {ConvGeometry{1, 3, 5, 5, 1, 0}, ConvGeometry{3, 4, 3, 3, 1, 1}, ConvGeometry{2, 2, 3, 3, 2, 1}}) {
        std::mt19937_64 rng(11);
        ClassicConvLayer layer(g, rng);
        const std::size_t B = 2, H = 7, W = 6;
        const auto xs = uniform(B * g.in_ch * H * W, -1, 1, 12);
        const auto y = layer.forward(Tensor::from({B, g.in_ch, H, W}, xs));
        const auto ref = classic_oracle(layer, xs, B, H, W);
        REQUIRE(ref.size() == y.numel());
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(y[k] - ref[k]) < 1e-12);
    }
}

TEST_CASE("classic conv: gradients") {
    std::mt19937_64 rng(13);
    ClassicConvLayer layer({2, 3, 3, 3, 1, 1}, rng);
    Tensor x = Tensor::parameter({1, 2, 4, 4}, uniform(32, -1, 1, 14));
    Tensor w = Tensor::from({1, 3, 4, 4}, uniform(48, -1, 1, 15));
    auto f = [&] { return ops::sum(ops::mul(layer.forward(x), w)); };
    CHECK(max_grad_error(f, x) < 1e-4);
    CHECK(max_grad_error(f, layer.weight()) < 1e-4);
    CHECK(max_grad_error(f, layer.bias()) < 1e-4);
}

TEST_CASE("linear-edge KAN convolution reproduces bias-free classic convolution") {
    for (const ConvGeometry& g : {ConvGeometry{1, 2, 2, 2, 1, 0}, ConvGeometry{3, 4, 3, 3, 1, 1}, ConvGeometry{2, 3, 5, 5, 1, 0}}) {
        const std::size_t T = g.taps(), O = g.out_ch;
        const auto w = uniform(T * O, -1, 1, 16);
        std::vector<EdgeBundle> bundles;
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> p(O);
            for (std::size_t o = 0; o < O; ++o) p[o] = w[t * O + o];
            bundles.push_back({default_descriptor(BasisKind::Linear), Tensor::parameter({O}, p)});
        }
        ConvKANLayer kan(g, bundles);
        ClassicConvLayer classic(g, Tensor::parameter({T, O}, w), Tensor::parameter({O}, std::vector<double>(O, 0.0)), false);
        const Tensor x = Tensor::from({2, g.in_ch, 8, 8}, uniform(2 * g.in_ch * 64, -1, 1, 17));
        const auto a = kan.forward(x), b = classic.forward(x);
        REQUIRE(a.shape() == b.shape());
        for (std::size_t k = 0; k < a.numel(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-12);
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("selectable conv: m=1 equals fixed bitwise") {
    std::mt19937_64 rng(20);
    ConvGeometry g{2, 3, 2, 2, 1, 1};
    ConvKANLayer fixed(g, default_descriptor(BasisKind::Bernstein), rng);
    std::vector<SelectableNode> nodes;
    for (std::size_t t = 0; t < g.taps(); ++t) {
        SelectableNode n;
        n.input_index = t;
        n.candidates.push_back(fixed.bundles()[t].deep_copy());
        n.weights = Tensor::parameter({1}, {1.0});
        nodes.push_back(std::move(n));
    }
    SelectableConvKANLayer sel(g, nodes);
    const auto xs = uniform(2 * 2 * 25, -1, 1, 21);
    Tensor xa = Tensor::parameter({2, 2, 5, 5}, xs), xb = Tensor::parameter({2, 2, 5, 5}, xs);
    const auto ya = fixed.forward(xa), yb = sel.forward(xb);
    CHECK(values(ya) == values(yb));
    ops::sum(ops::pow(ya, 2.0)).backward();
    ops::sum(ops::pow(yb, 2.0)).backward();
    CHECK(std::vector<double>(xa.grad().begin(), xa.grad().end()) ==
          std::vector<double>(xb.grad().begin(), xb.grad().end()));
}

TEST_CASE("selectable conv: nodes per tap, pruning and collapse") {
    std::mt19937_64 rng(22);
    ConvGeometry g{2, 2, 2, 2, 1, 0};
    SelectableConvKANLayer layer(g, default_pool(), rng);
    CHECK(layer.nodes().size() == 8);
    CHECK_FALSE(layer.node_label(0).empty());
    for (auto& n : layer.nodes()) {
        const auto w = uniform(n.size(), -1, 1, 23 + n.input_index);
        std::copy(w.begin(), w.end(), n.weights.mutable_data().begin());
    }
    int rounds = 0;
    while (!layer.fully_selected()) {
        layer.prune();
        ++rounds;
        for (const auto& n : layer.nodes()) {
            double s = 0.0;
            for (double v : n.weights.data()) s += v;
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
    CHECK(rounds == 15);
    const auto fixed = layer.collapse_to_fixed();
    const Tensor x = Tensor::from({1, 2, 4, 4}, uniform(32, -1, 1, 24));
    const auto a = layer.forward(x), b = fixed.forward(x);
    for (std::size_t k = 0; k < a.numel(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-12);
}

// ---------------------------------------------------------------------------

TEST_CASE("maxpool and flatten") {
    CHECK(ops::maxpool2(Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4})).item() == 4.0);
    const auto c = ops::maxpool2(Tensor::full({2, 3, 6, 6}, 0.7));
    CHECK(c.shape() == Shape{2, 3, 3, 3});
    for (double v : c.data()) CHECK(v == 0.7);
    CHECK(ops::maxpool2(Tensor::zeros({1, 1, 5, 7})).shape() == Shape{1, 1, 2, 3});
    const auto f = ops::flatten(Tensor::zeros({4, 20, 4, 4}));
    CHECK(f.shape() == Shape{4, 320});
}

TEST_CASE("output size formula") {
    for (std::size_t H : {5u, 8u, 28u, 32u})
        for (std::size_t k : {1u, 2u, 3u, 5u})
            for (std::size_t s : {1u, 2u})
                for (std::size_t p : {0u, 1u, 2u}) {
                    if (H + 2 * p < k) continue;
                    ConvGeometry g{1, 1, k, k, s, p};
                    std::mt19937_64 rng(1);
                    ClassicConvLayer layer(g, rng);
                    const auto y = layer.forward(Tensor::zeros({1, 1, H, H}));
                    CHECK(y.dim(2) == (H + 2 * p - k) / s + 1);
                    CHECK(g.out_h(H) == (H + 2 * p - k) / s + 1);
                }
}

TEST_CASE("classifier pipelines produce consistent shapes") {
    struct Case {
        ImageSet set;
        Shape input;
        std::size_t classes;
        std::size_t flat;
    };
    const std::vector<Case> cases{{ImageSet::MNIST, {2, 1, 28, 28}, 10, 320},
                                  {ImageSet::FashionMNIST, {2, 1, 28, 28}, 10, 3136},
                                  {ImageSet::CIFAR10, {2, 3, 32, 32}, 10, 1024},
                                  {ImageSet::CIFAR100, {2, 3, 32, 32}, 100, 2048}};
    for (const auto& c : cases) {
        CAPTURE(image_set_key(c.set));
        for (const char* method : {"CNN", "CNN_COMPLEX", "ChebyKAN"}) {
            const Model m = build_classifier(c.set, parse_method(method), {}, default_pool(), 0);
            const auto y = m.forward(Tensor::zeros(c.input));
            CHECK(y.shape() == Shape{2, c.classes});
            if (std::string(method) != "CNN_COMPLEX") {
                for (std::size_t i = 0; i < m.size(); ++i) {
                    if (m.layer(i).kind() == "flatten") {
                        CHECK(m.forward_prefix(Tensor::zeros(c.input), i + 1).dim(1) == c.flat);
                    }
                }
            }
        }
    }
    const Model s = build_classifier(ImageSet::MNIST, parse_method("SKAN"), {}, default_pool(), 0);
    CHECK(s.forward(Tensor::zeros({1, 1, 28, 28})).shape() == Shape{1, 10});
}
