#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "skan/basis.hpp"
#include "support.hpp"

using namespace skan;
using skan::test::max_grad_error;
using skan::test::uniform;

namespace {

double eval_at(const BasisDescriptor& d, const std::vector<double>& p, double x) {
    EdgeFunction f{d, Tensor::from({p.size()}, p)};
    return eval_edge(f, Tensor::from({1}, {x})).item();
}

BasisDescriptor desc(BasisKind k, int deg = -1) {
    auto d = default_descriptor(k);
    if (deg > 0) d.degree_or_grid = deg;
    return d;
}

double binom(double n, double k) { return std::tgamma(n + 1) / (std::tgamma(k + 1) * std::tgamma(n - k + 1)); }

// Explicit-sum Jacobi polynomial.
double jacobi(int n, double a, double b, double u) {
    double s = 0.0;
    for (int k = 0; k <= n; ++k)
        s += binom(n + a, n - k) * binom(n + b, k) * std::pow((u - 1) / 2, k) * std::pow((u + 1) / 2, n - k);
    return s;
}

// Monic polynomials orthogonal over M equispaced points on [-1, 1], built by
// Gram-Schmidt on the monomials. Returns P_0..P_deg evaluated at u.
std::vector<double> gram_schmidt(int deg, int M, double u) {
    std::vector<double> nodes(M);
    for (int i = 0; i < M; ++i) nodes[i] = -1.0 + 2.0 * i / (M - 1);
    // Each polynomial stored by its values at the nodes and at u.
    std::vector<std::vector<double>> at_nodes;
    std::vector<double> at_u;
    for (int n = 0; n <= deg; ++n) {
        std::vector<double> v(M);
        for (int i = 0; i < M; ++i) v[i] = std::pow(nodes[i], n);
        double vu = std::pow(u, n);
        for (int k = 0; k < n; ++k) {
            double num = 0, den = 0;
            for (int i = 0; i < M; ++i) {
                num += v[i] * at_nodes[k][i];
                den += at_nodes[k][i] * at_nodes[k][i];
            }
            const double c = num / den;
            for (int i = 0; i < M; ++i) v[i] -= c * at_nodes[k][i];
            vu -= c * at_u[k];
        }
        at_nodes.push_back(v);
        at_u.push_back(vu);
    }
    return at_u;
}

// Cardinal cubic B-spline on [0, 4] via truncated powers.
double cardinal_cubic(double s) {
    double v = 0.0;
    for (int k = 0; k <= 4; ++k) v += (k % 2 ? -1.0 : 1.0) * binom(4, k) * std::pow(std::max(s - k, 0.0), 3);
    return v / 6.0;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("parameter counts") {
    CHECK(param_count(desc(BasisKind::Chebyshev, 4)) == 5);
    CHECK(param_count(desc(BasisKind::WaveletMexicanHat)) == 3);
    CHECK(param_count(desc(BasisKind::WaveletDoG)) == 3);
    CHECK(param_count(desc(BasisKind::WaveletShannon)) == 3);
    CHECK(param_count(desc(BasisKind::BSpline, 5)) == 10);
    CHECK(param_count(desc(BasisKind::RBF, 8)) == 8);
    CHECK(param_count(desc(BasisKind::BottleneckGram, 4)) == 7);
    CHECK(param_count(desc(BasisKind::Linear)) == 1);
}

TEST_CASE("pools") {
    CHECK(base_pool().size() == kBasisKindCount);
    const auto pool = default_pool();
    CHECK(pool.size() == 16);
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = i + 1; j < pool.size(); ++j) CHECK_FALSE(pool[i] == pool[j]);
    for (const auto& d : pool) CHECK(d.kind != BasisKind::Linear);
}

TEST_CASE("kind names round-trip") {
    for (const auto& d : base_pool()) CHECK(parse_kind(kind_name(d.kind)) == d.kind);
    CHECK(parse_kind("ChebyKAN") == BasisKind::Chebyshev);
    CHECK_THROWS_AS(parse_kind("NotAFamily"), ContractError);
}

TEST_CASE("descriptor validation") {
    auto d = desc(BasisKind::Chebyshev);
    d.degree_or_grid = 0;
    CHECK_THROWS_AS(validate(d), ContractError);
    d = desc(BasisKind::RBF);
    d.lo = 1.0;
    d.hi = 1.0;
    CHECK_THROWS_AS(validate(d), ContractError);
}

TEST_CASE("initialisation is deterministic for a seed") {
    for (const auto& d : default_pool()) {
        std::mt19937_64 a(42), b(42), c(43);
        const auto ea = init_edge(d, a), eb = init_edge(d, b), ec = init_edge(d, c);
        const std::vector<double> va(ea.params.data().begin(), ea.params.data().end());
        const std::vector<double> vb(eb.params.data().begin(), eb.params.data().end());
        const std::vector<double> vc(ec.params.data().begin(), ec.params.data().end());
        CHECK(va == vb);
        CHECK(va != vc);
        CHECK(ea.params.requires_grad());
    }
}

TEST_CASE("initialisation scale") {
    for (int deg : {1, 4, 9}) {
        const auto d = desc(BasisKind::Chebyshev, deg);
        std::mt19937_64 rng(7);
        double s2 = 0.0;
        std::size_t n = 0;
        for (int r = 0; r < 4000; ++r) {
            const auto e = init_edge(d, rng);
            for (double v : e.params.data()) {
                s2 += v * v;
                ++n;
            }
        }
        const double sd = std::sqrt(s2 / static_cast<double>(n));
        CHECK(sd == doctest::Approx(0.1 / std::sqrt(deg)).epsilon(0.03));
    }
    std::mt19937_64 rng(1);
    const auto w = init_edge(desc(BasisKind::WaveletMexicanHat), rng);
    CHECK(w.params.data()[layout::kWaveletTranslation] == 0.0);
    CHECK(wavelet_scale(w.params.data()[layout::kWaveletScale]) == doctest::Approx(1.0).epsilon(1e-12));
    const auto s = init_edge(desc(BasisKind::BSpline, 5), rng);
    CHECK(s.params.data()[8] == 1.0);
    CHECK(s.params.data()[9] == 1.0);
}

TEST_CASE("wavelet scale map") {
    CHECK(wavelet_scale(-50.0) >= 1e-3);
    CHECK(wavelet_scale(-5.0) > 1e-3);
    CHECK(wavelet_scale(wavelet_raw_for_scale(2.5)) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK_THROWS_AS(wavelet_raw_for_scale(1e-4), ContractError);
}

// ---------------------------------------------------------------------------
// Value oracles

TEST_CASE("Chebyshev matches cos(n acos u)") {
    const int deg = 6;
    const auto d = desc(BasisKind::Chebyshev, deg);
    for (double x : uniform(8, -3, 3, 1)) {
        const double u = std::tanh(x);
        for (int n = 0; n <= deg; ++n) {
            std::vector<double> p(deg + 1, 0.0);
            p[n] = 1.0;
            CHECK(std::abs(eval_at(d, p, x) - std::cos(n * std::acos(u))) < 1e-12);
        }
    }
}

TEST_CASE("Jacobi matches the explicit sum") {
    for (auto [a, b] : {std::pair{1.0, 1.0}, {0.0, 0.0}, {0.5, -0.3}, {2.0, 1.5}}) {
        auto d = desc(BasisKind::Jacobi, 5);
        d.hyperparams = {{"alpha", a}, {"beta", b}};
        for (double x : uniform(6, -2, 2, 2)) {
            const double u = std::tanh(x);
            for (int n = 0; n <= 5; ++n) {
                std::vector<double> p(6, 0.0);
                p[n] = 1.0;
                CHECK(std::abs(eval_at(d, p, x) - jacobi(n, a, b, u)) < 1e-10);
            }
        }
    }
}

TEST_CASE("Legendre variant equals Legendre polynomials") {
    auto d = desc(BasisKind::Jacobi, 3);
    d.hyperparams = {{"alpha", 0.0}, {"beta", 0.0}};
    const double x = 0.4, u = std::tanh(x);
    CHECK(eval_at(d, {0, 0, 1, 0}, x) == doctest::Approx(0.5 * (3 * u * u - 1)).epsilon(1e-13));
    CHECK(eval_at(d, {0, 0, 0, 1}, x) == doctest::Approx(0.5 * (5 * u * u * u - 3 * u)).epsilon(1e-13));
}

TEST_CASE("Bernstein matches binomial form and sums to one") {
    const int deg = 5;
    const auto d = desc(BasisKind::Bernstein, deg);
    for (double x : uniform(8, -3, 3, 3)) {
        const double t = (std::tanh(x) + 1) / 2;
        for (int k = 0; k <= deg; ++k) {
            std::vector<double> p(deg + 1, 0.0);
            p[k] = 1.0;
            CHECK(std::abs(eval_at(d, p, x) - binom(deg, k) * std::pow(t, k) * std::pow(1 - t, deg - k)) < 1e-13);
        }
        CHECK(eval_at(d, std::vector<double>(deg + 1, 1.0), x) == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("Gram matches Gram-Schmidt on the discrete grid") {
    for (int deg : {3, 4, 6}) {
        const auto d = desc(BasisKind::Gram, deg);
        const int M = 2 * (deg + 1);
        for (double x : uniform(5, -2, 2, 4)) {
            const auto ref = gram_schmidt(deg, M, std::tanh(x));
            for (int n = 0; n <= deg; ++n) {
                std::vector<double> p(deg + 1, 0.0);
                p[n] = 1.0;
                CHECK(std::abs(eval_at(d, p, x) - ref[n]) < 1e-10);
            }
        }
    }
}

TEST_CASE("B-spline matches the cardinal cubic with SiLU residual") {
    const int G = 5;
    const auto d = desc(BasisKind::BSpline, G);
    const double h = (d.hi - d.lo) / G;
    auto p = uniform(G + 3, -1, 1, 5);
    p.push_back(0.7);   // w_b
    p.push_back(-1.3);  // w_s
    for (double x : uniform(20, -1.4, 1.4, 6)) {
        double spline = 0.0;
        for (int j = 0; j < G + 3; ++j) spline += p[j] * cardinal_cubic((x - (d.lo + (j - 3) * h)) / h);
        CHECK(std::abs(eval_at(d, p, x) - (0.7 * silu(x) + -1.3 * spline)) < 1e-12);
    }
}

TEST_CASE("B-spline basis is a partition of unity on the grid") {
    const auto d = desc(BasisKind::BSpline, 10);
    std::vector<double> p(13, 1.0);
    p.push_back(0.0);
    p.push_back(1.0);
    for (double x : uniform(25, -1, 0.999, 7)) CHECK(eval_at(d, p, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("radial families") {
    const auto c = uniform(8, -1, 1, 8);
    for (auto kind : {BasisKind::RBF, BasisKind::FastKAN, BasisKind::FasterKAN}) {
        const auto d = desc(kind);
        const double h = (d.hi - d.lo) / 7.0;
        for (double x : uniform(10, -3, 3, 9)) {
            double ref = 0.0;
            for (int i = 0; i < 8; ++i) {
                const double u = (x - (d.lo + i * h)) / h;
                ref += c[i] * (kind == BasisKind::FasterKAN ? 1.0 / std::pow(std::cosh(u), 2) : std::exp(-u * u));
            }
            CHECK(std::abs(eval_at(d, c, x) - ref) < 1e-12);
        }
    }
}

TEST_CASE("wavelet closed forms") {
    const double w = 1.7, t = 0.3, s = 0.8;
    const std::vector<double> p{w, t, wavelet_raw_for_scale(s)};
    const double c = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));
    CHECK(eval_at(desc(BasisKind::WaveletMexicanHat), {1.0, 0.0, wavelet_raw_for_scale(1.0)}, 0.0) ==
          doctest::Approx(0.867325).epsilon(1e-6));
    for (double x : uniform(10, -4, 4, 10)) {
        const double u = (x - t) / s;
        const double hat = c * (1 - u * u) * std::exp(-u * u / 2);
        const double dog = -u * std::exp(-u * u / 2);
        const double pu = std::numbers::pi * u / 2;
        const double sinc = std::sin(pu) / pu;
        const double sh = sinc * std::cos(1.5 * std::numbers::pi * u) * (0.54 + 0.46 * std::cos(std::numbers::pi * u / 6));
        CHECK(std::abs(eval_at(desc(BasisKind::WaveletMexicanHat), p, x) - w * hat) < 1e-12);
        CHECK(std::abs(eval_at(desc(BasisKind::WaveletDoG), p, x) - w * dog) < 1e-12);
        CHECK(std::abs(eval_at(desc(BasisKind::WaveletShannon), p, x) - w * (std::abs(u) < 6 ? sh : 0.0)) < 1e-12);
    }
    CHECK(eval_at(desc(BasisKind::WaveletShannon), {1.0, 0.0, 0.0}, 50.0) == 0.0);
}

TEST_CASE("ReLUKAN gates") {
    const auto d = desc(BasisKind::ReLUKAN, 5);
    const double h = (d.hi - d.lo) / 6.0;
    const auto c = uniform(5, -1, 1, 11);
    for (int i = 0; i < 5; ++i) {
        std::vector<double> p(5, 0.0);
        p[i] = 1.0;
        const double s = d.lo + i * h, e = d.lo + (i + 2) * h;
        CHECK(eval_at(d, p, 0.5 * (s + e)) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(eval_at(d, p, s - 0.01) == 0.0);
        CHECK(eval_at(d, p, e + 0.01) == 0.0);
    }
    for (double x : uniform(10, -1.2, 1.2, 12)) {
        double ref = 0.0;
        for (int i = 0; i < 5; ++i) {
            const double s = d.lo + i * h, e = d.lo + (i + 2) * h;
            const double g = std::max(0.0, e - x) * std::max(0.0, x - s);
            ref += c[i] * g * g * 16.0 / std::pow(e - s, 4);
        }
        CHECK(std::abs(eval_at(d, c, x) - ref) < 1e-12);
    }
}

TEST_CASE("bottleneck Gram") {
    const auto d = desc(BasisKind::BottleneckGram, 4);
    auto p = uniform(5, -1, 1, 13);
    p.push_back(1.8);   // input gain
    p.push_back(-0.6);  // output gain
    for (double x : uniform(8, -2, 2, 14)) {
        const auto g = gram_schmidt(4, 10, std::tanh(1.8 * x));
        double ref = 0.0;
        for (int n = 0; n <= 4; ++n) ref += p[n] * g[n];
        CHECK(std::abs(eval_at(d, p, x) - (-0.6 * ref)) < 1e-10);
    }
}

TEST_CASE("linear edge") {
    CHECK(eval_at(desc(BasisKind::Linear), {2.5}, -1.2) == doctest::Approx(-3.0).epsilon(1e-15));
}

// ---------------------------------------------------------------------------

TEST_CASE("gradients in x and parameters match finite differences") {
    auto pool = default_pool();
    pool.push_back(desc(BasisKind::Linear));
    for (const auto& d : pool) {
        CAPTURE(d.label());
        std::mt19937_64 rng(99);
        auto edge = init_edge(d, rng);
        // Perturb away from the initial values so every parameter matters.
        auto pd = edge.params.mutable_data();
        const auto noise = uniform(pd.size(), -0.3, 0.3, 100);
        for (std::size_t i = 0; i < pd.size(); ++i) pd[i] += noise[i];

        Tensor x = Tensor::parameter({10}, uniform(10, -1.8, 1.8, 101));
        Tensor w = Tensor::from({10}, uniform(10, -1, 1, 102));
        auto f = [&] { return ops::sum(ops::mul(eval_edge(edge, x), w)); };
        CHECK(max_grad_error(f, x) < 1e-4);
        CHECK(max_grad_error(f, edge.params) < 1e-4);
    }
}

TEST_CASE("outputs stay finite over a wide input range") {
    for (const auto& d : default_pool()) {
        CAPTURE(d.label());
        std::mt19937_64 rng(3);
        const auto edge = init_edge(d, rng);
        std::vector<double> xs;
        for (int i = 0; i <= 400; ++i) xs.push_back(-100.0 + 0.5 * i);
        const auto y = eval_edge(edge, Tensor::from({xs.size()}, xs));
        for (double v : y.data()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("NaN input is rejected") {
    std::mt19937_64 rng(3);
    const auto edge = init_edge(desc(BasisKind::Chebyshev), rng);
    CHECK_THROWS_AS(eval_edge(edge, Tensor::from({2}, {0.0, std::nan("")})), ContractError);
}

TEST_CASE("edge_block_sum mixes taps with their weights") {
    const auto d = desc(BasisKind::Chebyshev, 3);
    const std::size_t O = 2, P = 4;
    Tensor x = Tensor::from({3, 2}, uniform(6, -1, 1, 20));
    Tensor pa = Tensor::parameter({O * P}, uniform(O * P, -1, 1, 21));
    Tensor pb = Tensor::parameter({O * P}, uniform(O * P, -1, 1, 22));
    Tensor w = Tensor::parameter({2}, {0.25, 0.75});
    std::vector<TapRef> taps{{0, pa, w, 0}, {1, pb, w, 1}};
    const auto y = edge_block_sum(x, d, taps, O);
    REQUIRE(y.shape() == Shape{3, 2});
    for (std::size_t n = 0; n < 3; ++n) {
        for (std::size_t o = 0; o < O; ++o) {
            const std::vector<double> ca(pa.data().begin() + o * P, pa.data().begin() + (o + 1) * P);
            const std::vector<double> cb(pb.data().begin() + o * P, pb.data().begin() + (o + 1) * P);
            const double ref = 0.25 * eval_at(d, ca, x[n * 2]) + 0.75 * eval_at(d, cb, x[n * 2 + 1]);
            CHECK(std::abs(y[n * O + o] - ref) < 1e-13);
        }
    }
    Tensor wt = Tensor::from({6}, uniform(6, -1, 1, 23));
    auto f = [&] { return ops::sum(ops::mul(edge_block_sum(x, d, taps, O), ops::reshape(wt, {3, 2}))); };
    CHECK(max_grad_error(f, w) < 1e-4);
    CHECK(max_grad_error(f, pa) < 1e-4);
}
