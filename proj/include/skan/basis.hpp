#pragma once

// The activation pool: univariate learnable function families used on KAN
// edges. Each family knows its parameter layout, its initialisation and how
// to evaluate a whole block of edges with gradients for inputs, parameters
// and per-tap mixing weights.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skan/tensor.hpp"

namespace skan {

enum class BasisKind : std::uint8_t {
    BSpline,
    RBF,
    FastKAN,
    FasterKAN,
    Chebyshev,
    Gram,
    Jacobi,
    Bernstein,
    WaveletMexicanHat,
    WaveletDoG,
    WaveletShannon,
    ReLUKAN,
    BottleneckGram,
    /// w * x. Not part of any pool; links the KAN convolution to the
    /// classic one in structural checks.
    Linear,
};

/// Number of pool families (Linear excluded).
inline constexpr std::size_t kBasisKindCount = 13;

std::string_view kind_name(BasisKind kind);
/// Accepts kind names and the common baseline aliases ("KAN", "ChebyKAN",
/// "WavKAN(Mexican hat)", ...). Throws ContractError on unknown names.
BasisKind parse_kind(std::string_view name);

struct BasisDescriptor {
    BasisKind kind = BasisKind::Chebyshev;
    int degree_or_grid = 4;
    double lo = -1.0;
    double hi = 1.0;
    std::vector<std::pair<std::string, double>> hyperparams;

    bool operator==(const BasisDescriptor&) const = default;

    double hyper(std::string_view key, double fallback) const;
    /// Kind name, with a parameter suffix when the descriptor differs from
    /// the kind's default.
    std::string label() const;
};

/// Throws ContractError unless degree_or_grid >= 1 and lo < hi.
void validate(const BasisDescriptor& d);

BasisDescriptor default_descriptor(BasisKind kind);
/// All 13 kinds with default hyperparameters, in enum order.
std::vector<BasisDescriptor> base_pool();
/// The experiment pool: base_pool() plus three hyperparameter variants
/// (Chebyshev degree 8, B-spline grid 10, Legendre-type Jacobi), 16 entries.
std::vector<BasisDescriptor> default_pool();

std::size_t param_count(const BasisDescriptor& d);

/// One learnable univariate function. params has param_count(descriptor)
/// entries.
struct EdgeFunction {
    BasisDescriptor descriptor;
    Tensor params;
};

/// Fills `out` (length param_count) with a fresh draw: coefficients
/// N(0, (0.1/sqrt(degree_or_grid))^2); wavelet translation 0 and scale 1;
/// B-spline residual weights 1; bottleneck gains 1.
void init_params(const BasisDescriptor& d, std::span<double> out, std::mt19937_64& rng);
EdgeFunction init_edge(const BasisDescriptor& d, std::mt19937_64& rng);

/// Elementwise phi(x) over a rank-1 batch. Differentiable in x and params.
/// Throws ContractError on NaN input.
Tensor eval_edge(const EdgeFunction& f, const Tensor& x);

/// Wavelet scale from its unconstrained parameter: 1e-3 + softplus(raw).
double wavelet_scale(double raw);
double wavelet_raw_for_scale(double scale);

/// Layout helpers for building edges by hand (tests, examples).
namespace layout {
inline constexpr std::size_t kWaveletWeight = 0;
inline constexpr std::size_t kWaveletTranslation = 1;
inline constexpr std::size_t kWaveletScale = 2;
}  // namespace layout

/// One input column feeding a block of out_dim edges of one family.
struct TapRef {
    std::size_t column = 0;
    Tensor params;         // out_dim * param_count values, edge-major
    Tensor weights;        // optional mixing vector
    std::size_t weight_index = 0;
};

/// out[n, o] = sum over taps of s_tap * phi_{tap,o}(x[n, tap.column]) where
/// s_tap = tap.weights[tap.weight_index] (or 1 when weights is undefined).
/// x is [rows x columns]; result is [rows x out_dim].
Tensor edge_block_sum(const Tensor& x, const BasisDescriptor& d, std::span<const TapRef> taps,
                      std::size_t out_dim);

}  // namespace skan
