#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "skan/ops.hpp"
#include "skan/tensor.hpp"

namespace skan::test {

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
    return std::abs(analytic - numeric) / denom;
}

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

/// Largest relative error between the autograd gradient of `f` at the leaf
/// `p` and a central difference with step h.
inline double max_grad_error(const std::function<Tensor()>& f, Tensor p, double h = 1e-5) {
    p.zero_grad();
    Tensor y = f();
    y.backward();
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) analytic.assign(p.grad().begin(), p.grad().end());
    double worst = 0.0;
    NoGradGuard guard;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        auto d = p.mutable_data();
        const double orig = d[i];
        d[i] = orig + h;
        const double up = f().item();
        d[i] = orig - h;
        const double down = f().item();
        d[i] = orig;
        worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    p.zero_grad();
    return worst;
}

}  // namespace skan::test
