#include <cmath>
#include <numeric>

#include "doctest.h"
#include "skan/kan_layer.hpp"
#include "skan/optim.hpp"
#include "support.hpp"

using namespace skan;
using skan::test::max_grad_error;
using skan::test::uniform;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double weight_sum(const SelectableNode& n) {
    return std::accumulate(n.weights.data().begin(), n.weights.data().end(), 0.0);
}

SelectableNode node_with_weights(std::vector<double> w) {
    SelectableNode n;
    const auto pool = default_pool();
    std::mt19937_64 rng(0);
    for (std::size_t i = 0; i < w.size(); ++i) n.candidates.push_back(EdgeBundle::create(pool[i], 2, rng));
    const std::size_t m = w.size();
    n.weights = Tensor::parameter({m}, std::move(w));
    return n;
}

}  // namespace

TEST_CASE("fixed layer: Chebyshev T1 edge is tanh") {
    BasisDescriptor d = default_descriptor(BasisKind::Chebyshev);
    EdgeBundle b{d, Tensor::parameter({5}, {0, 1, 0, 0, 0})};
    FixedKANLayer layer(1, std::vector<EdgeBundle>{b});
    const auto xs = uniform(7, -3, 3, 1);
    const auto y = layer.forward(Tensor::from({7, 1}, xs));
    for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(y[i] - std::tanh(xs[i])) < 1e-15);
}

TEST_CASE("fixed layer: zero coefficients give zero output") {
    std::mt19937_64 rng(1);
    FixedKANLayer layer(3, 4, default_descriptor(BasisKind::Gram), rng);
    for (const auto& b : layer.parameters())
        for (auto& v : b.impl()->data) v = 0.0;
    const auto y = layer.forward(Tensor::from({5, 3}, uniform(15, -1, 1, 2)));
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("fixed layer: matches a hand-looped summation") {
    std::mt19937_64 rng(3);
    const std::vector<BasisDescriptor> per_input{default_descriptor(BasisKind::RBF),
                                                 default_descriptor(BasisKind::WaveletDoG)};
    FixedKANLayer layer(2, per_input, rng);
    CHECK(layer.in_dim() == 2);
    CHECK(layer.out_dim() == 2);
    const auto xs = uniform(12, -1.5, 1.5, 4);
    const auto y = layer.forward(Tensor::from({6, 2}, xs));
    for (std::size_t b = 0; b < 6; ++b) {
        for (std::size_t j = 0; j < 2; ++j) {
            double ref = 0.0;
            for (std::size_t i = 0; i < 2; ++i) ref += eval_edge(layer.edge(i, j), Tensor::from({1}, {xs[b * 2 + i]})).item();
            CHECK(std::abs(y[b * 2 + j] - ref) < 1e-12);
        }
    }
}

TEST_CASE("fixed layer: dimension mismatch") {
    std::mt19937_64 rng(5);
    FixedKANLayer layer(3, 2, default_descriptor(BasisKind::Chebyshev), rng);
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({4, 2})), ContractError);
}

TEST_CASE("fixed layer: gradients") {
    std::mt19937_64 rng(6);
    FixedKANLayer layer(std::size_t{3}, std::vector<BasisDescriptor>{default_descriptor(BasisKind::BSpline),
                                                                     default_descriptor(BasisKind::Bernstein)},
                        rng);
    Tensor x = Tensor::parameter({4, 2}, uniform(8, -0.9, 0.9, 7));
    Tensor w = Tensor::from({4, 3}, uniform(12, -1, 1, 8));
    auto f = [&] { return ops::sum(ops::mul(layer.forward(x), w)); };
    CHECK(max_grad_error(f, x) < 1e-4);
    for (const auto& p : layer.parameters()) CHECK(max_grad_error(f, p) < 1e-4);
}

// ---------------------------------------------------------------------------

TEST_CASE("selectable layer: fresh weights are 1/m and sum to one") {
    std::mt19937_64 rng(10);
    SelectableKANLayer layer(3, 4, default_pool(), rng);
    REQUIRE(layer.nodes().size() == 3);
    for (const auto& n : layer.nodes()) {
        CHECK(n.size() == 16);
        for (double w : n.weights.data()) CHECK(w == 1.0 / 16.0);
        CHECK(std::abs(weight_sum(n) - 1.0) < 1e-6);
    }
}

TEST_CASE("selectable layer: m=3 fresh output is the mean of three fixed layers") {
    const std::vector<BasisDescriptor> pool{default_descriptor(BasisKind::Chebyshev),
                                            default_descriptor(BasisKind::FastKAN),
                                            default_descriptor(BasisKind::WaveletMexicanHat)};
    std::mt19937_64 rng(11);
    SelectableKANLayer layer(2, 3, pool, rng);
    const Tensor x = Tensor::from({5, 2}, uniform(10, -1, 1, 12));
    const auto y = layer.forward(x);
    std::vector<double> mean(15, 0.0);
    for (std::size_t p = 0; p < 3; ++p) {
        std::vector<EdgeBundle> bundles;
        for (const auto& n : layer.nodes()) bundles.push_back(n.candidates[p]);
        const auto yp = FixedKANLayer(3, bundles).forward(x);
        for (std::size_t k = 0; k < 15; ++k) mean[k] += yp[k] / 3.0;
    }
    for (std::size_t k = 0; k < 15; ++k) CHECK(std::abs(y[k] - mean[k]) < 1e-12);
}

TEST_CASE("selectable layer: m=2 with half weights averages the candidates") {
    const auto d = default_descriptor(BasisKind::Chebyshev);
    SelectableNode n;
    n.candidates.push_back({d, Tensor::parameter({5}, {2, 0, 0, 0, 0})});
    n.candidates.push_back({d, Tensor::parameter({5}, {4, 0, 0, 0, 0})});
    n.weights = Tensor::parameter({2}, {0.5, 0.5});
    SelectableKANLayer layer(1, std::vector<SelectableNode>{n});
    CHECK(layer.forward(Tensor::from({1, 1}, {0.3})).item() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("selectable layer: m=1 equals the fixed layer bitwise, values and gradients") {
    std::mt19937_64 rng(13);
    const std::vector<BasisDescriptor> per_input{default_descriptor(BasisKind::Jacobi),
                                                 default_descriptor(BasisKind::ReLUKAN),
                                                 default_descriptor(BasisKind::WaveletShannon)};
    FixedKANLayer fixed(4, per_input, rng);
    std::vector<SelectableNode> nodes;
    for (std::size_t i = 0; i < 3; ++i) {
        SelectableNode n;
        n.input_index = i;
        n.candidates.push_back(fixed.bundles()[i].deep_copy());
        n.weights = Tensor::parameter({1}, {1.0});
        nodes.push_back(std::move(n));
    }
    SelectableKANLayer sel(4, nodes);
    const auto xs = uniform(18, -1, 1, 14);
    Tensor xf = Tensor::parameter({6, 3}, xs), xsel = Tensor::parameter({6, 3}, xs);
    const auto yf = fixed.forward(xf), ys = sel.forward(xsel);
    CHECK(values(yf) == values(ys));
    ops::sum(ops::pow(yf, 2.0)).backward();
    ops::sum(ops::pow(ys, 2.0)).backward();
    CHECK(std::vector<double>(xf.grad().begin(), xf.grad().end()) ==
          std::vector<double>(xsel.grad().begin(), xsel.grad().end()));
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& a = fixed.bundles()[i].params;
        const auto& b = sel.nodes()[i].candidates[0].params;
        CHECK(std::vector<double>(a.grad().begin(), a.grad().end()) ==
              std::vector<double>(b.grad().begin(), b.grad().end()));
    }
}

TEST_CASE("selectable layer: gradients in weights, edge params and inputs") {
    const std::vector<BasisDescriptor> pool{default_descriptor(BasisKind::Gram),
                                            default_descriptor(BasisKind::BSpline),
                                            default_descriptor(BasisKind::BottleneckGram)};
    std::mt19937_64 rng(15);
    SelectableKANLayer layer(2, 2, pool, rng);
    Tensor x = Tensor::parameter({3, 2}, uniform(6, -0.9, 0.9, 16));
    Tensor w = Tensor::from({3, 2}, uniform(6, -1, 1, 17));
    auto f = [&] { return ops::sum(ops::mul(layer.forward(x), w)); };
    CHECK(max_grad_error(f, x) < 1e-4);
    for (const auto& p : layer.parameters()) CHECK(max_grad_error(f, p) < 1e-4);
}

TEST_CASE("selectable layer: empty candidate list is rejected") {
    SelectableNode n;
    n.weights = Tensor::parameter({0}, {});
    SelectableKANLayer layer(1, std::vector<SelectableNode>{n});
    CHECK_THROWS_AS(layer.forward(Tensor::zeros({1, 1})), ContractError);
}

// ---------------------------------------------------------------------------

TEST_CASE("prune examples") {
    {
        auto n = node_with_weights({0.5, 0.3, 0.2});
        const auto ev = prune_node(n);
        REQUIRE(ev.has_value());
        CHECK(ev->removed_index == 2);
        REQUIRE(n.size() == 2);
        CHECK(n.weights[0] == doctest::Approx(0.625).epsilon(1e-15));
        CHECK(n.weights[1] == doctest::Approx(0.375).epsilon(1e-15));
        CHECK(n.weights.shape() == Shape{2});
    }
    {
        auto n = node_with_weights({0.4, 0.4, 0.2});
        prune_node(n);
        CHECK(n.weights[0] == doctest::Approx(0.5));
        CHECK(n.weights[1] == doctest::Approx(0.5));
    }
    {
        auto n = node_with_weights({1.0});
        CHECK_FALSE(prune_node(n).has_value());
        CHECK(n.size() == 1);
        CHECK(n.weights[0] == 1.0);
    }
}

TEST_CASE("prune uses magnitude and breaks ties towards the higher index") {
    auto n = node_with_weights({-0.9, 0.05, 0.3});
    CHECK(prune_node(n)->removed_index == 1);
    auto t = node_with_weights({0.2, 0.5, 0.2, 0.2});
    CHECK(prune_node(t)->removed_index == 3);
    auto u = node_with_weights({0.3, -0.3, 0.4});
    CHECK(prune_node(u)->removed_index == 1);
}

TEST_CASE("prune report names the removed family") {
    auto n = node_with_weights({0.5, 0.1, 0.4});
    const auto ev = prune_node(n);
    CHECK(ev->removed_family == default_pool()[1].label());
    CHECK(ev->removed_weight == doctest::Approx(0.1));
    CHECK(ev->weights_after.size() == 2);
}

TEST_CASE("pruning a 16-candidate layer: invariants through to collapse") {
    std::mt19937_64 rng(20);
    SelectableKANLayer layer(3, 5, default_pool(), rng);
    // Give the weights some spread, as training would.
    for (auto& n : layer.nodes()) {
        const auto w = uniform(n.size(), -1, 1, 21 + n.input_index);
        std::copy(w.begin(), w.end(), n.weights.mutable_data().begin());
    }
    std::size_t rounds = 0;
    std::vector<std::size_t> prev(3, 16);
    while (!layer.fully_selected()) {
        const auto report = layer.prune();
        ++rounds;
        CHECK(report.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& n = layer.nodes()[i];
            CHECK(n.size() + 1 == prev[i]);
            CHECK(n.weights.numel() == n.size());
            CHECK(std::abs(weight_sum(n) - 1.0) < 1e-6);
            prev[i] = n.size();
        }
    }
    CHECK(rounds == 15);
    CHECK(layer.max_candidates() == 1);
    CHECK(layer.prune().empty());

    const auto fixed = layer.collapse_to_fixed();
    const Tensor x = Tensor::from({9, 3}, uniform(27, -2, 2, 22));
    const auto a = layer.forward(x), b = fixed.forward(x);
    for (std::size_t k = 0; k < a.numel(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-12);
}

TEST_CASE("collapse requires single-candidate nodes") {
    std::mt19937_64 rng(23);
    SelectableKANLayer layer(2, 2, default_pool(), rng);
    CHECK_THROWS_AS(layer.collapse_to_fixed(), ContractError);
    CHECK_THROWS_AS(layer.collapse(), ContractError);
}

TEST_CASE("binary and ternary networks select 7 and 8 families") {
    for (std::size_t arity : {2u, 3u}) {
        std::mt19937_64 rng(30);
        SelectableKANLayer l1(arity, 5, default_pool(), rng);
        SelectableKANLayer l2(5, 1, default_pool(), rng);
        while (!l1.fully_selected()) l1.prune();
        while (!l2.fully_selected()) l2.prune();
        const auto f1 = l1.collapse_to_fixed(), f2 = l2.collapse_to_fixed();
        CHECK(f1.bundles().size() + f2.bundles().size() == arity + 5);
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("set_trainable") {
    std::mt19937_64 rng(40);
    const std::vector<BasisDescriptor> pool{default_descriptor(BasisKind::Chebyshev),
                                            default_descriptor(BasisKind::RBF)};
    SelectableKANLayer layer(2, 3, pool, rng);
    const Tensor x = Tensor::from({8, 2}, uniform(16, -1, 1, 41));

    auto edge_params = [&] {
        std::vector<Tensor> out;
        for (const auto& n : layer.nodes())
            for (const auto& c : n.candidates) out.push_back(c.params);
        return out;
    };
    auto nonzero = [](const Tensor& t) {
        if (!t.has_grad()) return false;
        for (double g : t.grad())
            if (g != 0.0) return true;
        return false;
    };

    SUBCASE("WEIGHTS_ONLY: edge params get no gradient and do not move") {
        layer.set_trainable(TrainMode::WeightsOnly);
        CHECK(layer.train_mode() == TrainMode::WeightsOnly);
        ops::sum(ops::pow(layer.forward(x), 2.0)).backward();
        std::vector<std::vector<double>> before;
        for (const auto& p : edge_params()) {
            CHECK_FALSE(p.requires_grad());
            for (double g : p.grad()) CHECK(g == 0.0);
            before.push_back(values(p));
        }
        for (const auto& n : layer.nodes()) CHECK(nonzero(n.weights));
        std::vector<Tensor> trainable;
        for (const auto& p : layer.parameters())
            if (p.requires_grad()) trainable.push_back(p);
        CHECK(trainable.size() == 2);
        AdamState st;
        adam_step(trainable, st);
        const auto after = edge_params();
        for (std::size_t i = 0; i < after.size(); ++i) CHECK(values(after[i]) == before[i]);
    }
    SUBCASE("ALL, and toggling back") {
        layer.set_trainable(TrainMode::WeightsOnly);
        layer.set_trainable(TrainMode::All);
        ops::sum(ops::pow(layer.forward(x), 2.0)).backward();
        for (const auto& p : edge_params()) CHECK(nonzero(p));
        for (const auto& n : layer.nodes()) CHECK(nonzero(n.weights));
    }
}

TEST_CASE("fixed layer under WEIGHTS_ONLY freezes everything") {
    std::mt19937_64 rng(42);
    FixedKANLayer layer(2, 2, default_descriptor(BasisKind::Chebyshev), rng);
    layer.set_trainable(TrainMode::WeightsOnly);
    for (const auto& p : layer.parameters()) CHECK_FALSE(p.requires_grad());
    layer.set_trainable(TrainMode::All);
    for (const auto& p : layer.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("clone is deep and reinitialize redraws") {
    std::mt19937_64 rng(50);
    SelectableKANLayer layer(2, 2, default_pool(), rng);
    auto copy = layer.clone();
    const auto before = values(layer.parameters()[0]);
    layer.parameters()[0].mutable_data()[0] += 1.0;
    CHECK(values(copy->parameters()[0]) == before);
    std::mt19937_64 r2(51);
    copy->reinitialize(r2);
    CHECK(values(copy->parameters()[0]) != before);
}
