#pragma once

// Benchmark targets and model builders: the seven fitting functions, the
// [n -> 5 -> 1] fitting networks and the image-classification stacks.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skan/basis.hpp"
#include "skan/datasets.hpp"
#include "skan/model.hpp"
#include "skan/training.hpp"

namespace skan {

enum class FitFunction { ExpSinSquares, ExpSinPi, ExpBessel, Divide, Multiply, SumProduct, TanhQuartic };

struct FitFunctionInfo {
    FitFunction id;
    std::string_view key;
    std::string_view formula;
    std::size_t arity;
};

/// All seven targets in table order.
std::span<const FitFunctionInfo> fit_functions();
const FitFunctionInfo& fit_function_info(FitFunction f);
FitFunction parse_fit_function(std::string_view key);

/// J0(20), about 0.16702.
double bessel_j0_20();
double eval_fit_function(FitFunction f, std::span<const double> x);

/// Inputs uniform on [-1, 1]^arity. For Divide, draws with |x2| < 0.05 are
/// rejected.
std::pair<Dataset, Dataset> gen_fit_dataset(FitFunction f, std::size_t n_train, std::size_t n_test,
                                            std::uint64_t seed);

enum class Method { SKAN, FixedKAN, MLP, MLPComplex, CNN, CNNComplex };

struct MethodSpec {
    Method method = Method::SKAN;
    /// Family for FixedKAN.
    std::optional<BasisDescriptor> family;

    std::string name() const;
    bool is_kan() const { return method == Method::SKAN || method == Method::FixedKAN; }
};

/// "SKAN", "MLP", "MLP_COMPLEX", "CNN", "CNN_COMPLEX", or a family name such
/// as "ChebyKAN" / "Chebyshev" for a fixed-family KAN.
MethodSpec parse_method(std::string_view name);

enum class Head { FC, KAN };
Head parse_head(std::string_view name);
std::string_view head_name(Head h);

/// [arity -> 5 -> 1] for KAN methods and MLP, [arity -> 30 -> 1] for
/// MLP_COMPLEX. MLPs use ReLU between the two linear layers.
Model build_fit_model(const MethodSpec& method, std::size_t arity, const std::vector<BasisDescriptor>& pool,
                      std::uint64_t seed);

struct ClassifierOptions {
    Head head = Head::FC;
    /// Flatten straight into the classifier head, no convolution stack.
    bool kan_only = false;
    /// Family for KAN heads on selectable stacks before selection has run.
    BasisDescriptor provisional_head_family = default_descriptor(BasisKind::BSpline);
};

/// Image classifier for one of the four datasets. KAN methods use ConvKAN
/// (or S-ConvKAN for SKAN) blocks; CNN methods use ReLU convolutions, with
/// CNN_COMPLEX doubling every channel and hidden width.
Model build_classifier(ImageSet set, const MethodSpec& method, const ClassifierOptions& opts,
                       const std::vector<BasisDescriptor>& pool, std::uint64_t seed);

/// Most common family among the conv stack's taps (earliest seen wins ties);
/// nullopt when the model has no KAN convolution.
std::optional<BasisDescriptor> dominant_conv_family(const Model& model);

/// Replaces every fixed KAN layer after the last convolution with a freshly
/// initialised layer of family `d`, keeping its shape.
void rebuild_kan_head(Model& model, const BasisDescriptor& d, std::uint64_t seed);

/// Number of leading layers whose output is the penultimate embedding, i.e.
/// the index of the final parametrised layer.
std::size_t penultimate_layer(const Model& model);

}  // namespace skan
