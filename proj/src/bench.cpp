#include "skan/bench.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "skan/conv.hpp"
#include "skan/kan_layer.hpp"

namespace skan {

namespace {

constexpr std::array<FitFunctionInfo, 7> kFitFunctions{{
    {FitFunction::ExpSinSquares, "exp_sin_squares", "exp(sin(x1^2 + x2^2))", 2},
    {FitFunction::ExpSinPi, "exp_sin_pi", "exp(sin(pi*x1) + x2^2)", 2},
    {FitFunction::ExpBessel, "exp_bessel", "exp(J0(20)*x1 + x2^2)", 2},
    {FitFunction::Divide, "divide", "x1 / x2", 2},
    {FitFunction::Multiply, "multiply", "x1 * x2", 2},
    {FitFunction::SumProduct, "sum_product", "(x1 + x2) + x1*x2", 2},
    {FitFunction::TanhQuartic, "tanh_quartic", "tanh(5(x1^4 + x2^4 + x3^4 - 1))", 3},
}};

std::string upper_alnum(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::span<const FitFunctionInfo> fit_functions() { return kFitFunctions; }

const FitFunctionInfo& fit_function_info(FitFunction f) {
    for (const auto& info : kFitFunctions)
        if (info.id == f) return info;
    throw ContractError("unknown fit function");
}

FitFunction parse_fit_function(std::string_view key) {
    for (const auto& info : kFitFunctions)
        if (info.key == key) return info.id;
    std::string known;
    for (const auto& info : kFitFunctions) known += (known.empty() ? "" : ", ") + std::string(info.key);
    throw ContractError("unknown fit function '" + std::string(key) + "' (known: " + known + ")");
}

double bessel_j0_20() {
    static const double v = std::cyl_bessel_j(0.0, 20.0);
    return v;
}

double eval_fit_function(FitFunction f, std::span<const double> x) {
    const auto& info = fit_function_info(f);
    if (x.size() != info.arity) {
        throw ContractError(std::string(info.key) + " takes " + std::to_string(info.arity) + " inputs, got " +
                            std::to_string(x.size()));
    }
    switch (f) {
        case FitFunction::ExpSinSquares: return std::exp(std::sin(x[0] * x[0] + x[1] * x[1]));
        case FitFunction::ExpSinPi: return std::exp(std::sin(std::numbers::pi * x[0]) + x[1] * x[1]);
        case FitFunction::ExpBessel: return std::exp(bessel_j0_20() * x[0] + x[1] * x[1]);
        case FitFunction::Divide: return x[0] / x[1];
        case FitFunction::Multiply: return x[0] * x[1];
        case FitFunction::SumProduct: return (x[0] + x[1]) + x[0] * x[1];
        case FitFunction::TanhQuartic: {
            const double s = std::pow(x[0], 4) + std::pow(x[1], 4) + std::pow(x[2], 4);
            return std::tanh(5.0 * (s - 1.0));
        }
    }
    throw ContractError("unknown fit function");
}

std::pair<Dataset, Dataset> gen_fit_dataset(FitFunction f, std::size_t n_train, std::size_t n_test,
                                            std::uint64_t seed) {
    const auto& info = fit_function_info(f);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto make = [&](std::size_t n) {
        Dataset d;
        d.item_shape = {info.arity};
        d.target_dim = 1;
        d.inputs.reserve(n * info.arity);
        std::vector<double> x(info.arity);
        for (std::size_t i = 0; i < n; ++i) {
            for (;;) {
                for (auto& v : x) v = u(rng);
                if (f != FitFunction::Divide || std::abs(x[1]) >= 0.05) break;
            }
            d.inputs.insert(d.inputs.end(), x.begin(), x.end());
            d.targets.push_back(eval_fit_function(f, x));
        }
        return d;
    };
    Dataset train = make(n_train);
    Dataset test = make(n_test);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Methods

std::string MethodSpec::name() const {
    switch (method) {
        case Method::SKAN: return "S-KAN";
        case Method::FixedKAN: return family ? family->label() + "KAN" : "KAN";
        case Method::MLP: return "MLP";
        case Method::MLPComplex: return "MLP_COMPLEX";
        case Method::CNN: return "CNN";
        case Method::CNNComplex: return "CNN_COMPLEX";
    }
    return "?";
}

MethodSpec parse_method(std::string_view name) {
    const std::string u = upper_alnum(name);
    if (u == "SKAN" || u == "SCONVKAN") return {Method::SKAN, std::nullopt};
    if (u == "MLP") return {Method::MLP, std::nullopt};
    if (u == "MLPCOMPLEX") return {Method::MLPComplex, std::nullopt};
    if (u == "CNN") return {Method::CNN, std::nullopt};
    if (u == "CNNCOMPLEX") return {Method::CNNComplex, std::nullopt};
    std::string family(name);
    if (u.size() > 3 && u.ends_with("KAN") && u != "FASTKAN" && u != "FASTERKAN" && u != "RELUKAN") {
        try {
            return {Method::FixedKAN, default_descriptor(parse_kind(name))};
        } catch (const ContractError&) {
            family = family.substr(0, family.size() - 3);
        }
    }
    return {Method::FixedKAN, default_descriptor(parse_kind(family))};
}

Head parse_head(std::string_view name) {
    const std::string u = upper_alnum(name);
    if (u == "FC") return Head::FC;
    if (u == "KAN") return Head::KAN;
    throw ContractError("unknown classifier head '" + std::string(name) + "' (expected FC or KAN)");
}

std::string_view head_name(Head h) { return h == Head::FC ? "FC" : "KAN"; }

Model build_fit_model(const MethodSpec& method, std::size_t arity, const std::vector<BasisDescriptor>& pool,
                      std::uint64_t seed) {
    if (arity == 0) throw ContractError("fit model: arity must be positive");
    std::mt19937_64 rng(seed);
    Model m;
    switch (method.method) {
        case Method::SKAN:
            if (pool.empty()) throw ContractError("fit model: empty activation pool");
            m.emplace<SelectableKANLayer>(arity, 5, pool, rng);
            m.emplace<SelectableKANLayer>(5, 1, pool, rng);
            break;
        case Method::FixedKAN:
            if (!method.family) throw ContractError("fit model: fixed KAN needs a family");
            m.emplace<FixedKANLayer>(arity, 5, *method.family, rng);
            m.emplace<FixedKANLayer>(5, 1, *method.family, rng);
            break;
        case Method::MLP:
        case Method::MLPComplex: {
            const std::size_t hidden = method.method == Method::MLP ? 5 : 30;
            m.emplace<LinearLayer>(arity, hidden, rng);
            m.emplace<ReLULayer>();
            m.emplace<LinearLayer>(hidden, 1, rng);
            break;
        }
        case Method::CNN:
        case Method::CNNComplex: throw ContractError("fit model: " + method.name() + " is an image classifier");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Classifiers

namespace {

struct StackSpec {
    std::size_t in_ch, side;
    std::vector<std::pair<std::size_t, std::size_t>> convs;  // (out_ch, kernel)
    std::vector<std::size_t> hidden;                          // head widths before the class layer
    std::size_t classes;
};

StackSpec stack_for(ImageSet set) {
    switch (set) {
        case ImageSet::MNIST: return {1, 28, {{10, 5}, {20, 5}}, {50}, 10};
        case ImageSet::FashionMNIST: return {1, 28, {{32, 3}, {64, 3}}, {50}, 10};
        case ImageSet::CIFAR10: return {3, 32, {{32, 3}, {16, 3}}, {50}, 10};
        case ImageSet::CIFAR100: return {3, 32, {{32, 3}, {64, 3}, {128, 3}}, {256}, 100};
    }
    throw ContractError("unknown image set");
}

bool is_conv(const Layer& l) {
    return dynamic_cast<const ConvKANLayer*>(&l) || dynamic_cast<const SelectableConvKANLayer*>(&l) ||
           dynamic_cast<const ClassicConvLayer*>(&l);
}

}  // namespace

Model build_classifier(ImageSet set, const MethodSpec& method, const ClassifierOptions& opts,
                       const std::vector<BasisDescriptor>& pool, std::uint64_t seed) {
    const StackSpec spec = stack_for(set);
    const bool complex = method.method == Method::CNNComplex;
    const std::size_t widen = complex ? 2 : 1;
    if (method.method == Method::MLP || method.method == Method::MLPComplex) {
        throw ContractError("classifier: " + method.name() + " is a fitting baseline");
    }
    if (method.method == Method::SKAN && pool.empty()) throw ContractError("classifier: empty activation pool");
    if (method.method == Method::FixedKAN && !method.family) throw ContractError("classifier: fixed KAN needs a family");
    if (opts.kan_only && !method.is_kan()) throw ContractError("classifier: KAN-only stacks need a KAN method");

    std::mt19937_64 rng(seed);
    Model m;
    std::size_t ch = spec.in_ch, side = spec.side;
    if (!opts.kan_only) {
        for (const auto& [out, k] : spec.convs) {
            ConvGeometry g{ch, out * widen, k, k, 1, k == 3 ? std::size_t{1} : std::size_t{0}};
            switch (method.method) {
                case Method::SKAN: m.emplace<SelectableConvKANLayer>(g, pool, rng); break;
                case Method::FixedKAN: m.emplace<ConvKANLayer>(g, *method.family, rng); break;
                default: m.emplace<ClassicConvLayer>(g, rng); break;
            }
            m.emplace<MaxPool2Layer>();
            ch = g.out_ch;
            side = g.out_h(side) / 2;
        }
    }
    m.emplace<FlattenLayer>();
    std::size_t width = ch * side * side;

    std::vector<std::size_t> widths;
    for (auto h : spec.hidden) widths.push_back(h * widen);
    widths.push_back(spec.classes);
    const bool kan_head = method.is_kan() && (opts.head == Head::KAN || opts.kan_only);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::size_t out = widths[i];
        if (kan_head) {
            if (opts.kan_only && method.method == Method::SKAN) {
                m.emplace<SelectableKANLayer>(width, out, pool, rng);
            } else {
                const auto& d = method.method == Method::FixedKAN ? *method.family : opts.provisional_head_family;
                m.emplace<FixedKANLayer>(width, out, d, rng);
            }
        } else {
            m.emplace<LinearLayer>(width, out, rng);
            if (i + 1 < widths.size()) m.emplace<ReLULayer>();
        }
        width = out;
    }
    return m;
}

std::optional<BasisDescriptor> dominant_conv_family(const Model& model) {
    std::vector<std::pair<BasisDescriptor, std::size_t>> counts;
    auto bump = [&](const BasisDescriptor& d) {
        for (auto& [k, n] : counts)
            if (k == d) {
                ++n;
                return;
            }
        counts.emplace_back(d, 1);
    };
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (const auto* c = dynamic_cast<const ConvKANLayer*>(&model.layer(i))) {
            for (const auto& b : c->bundles()) bump(b.descriptor);
        } else if (const auto* s = dynamic_cast<const SelectableConvKANLayer*>(&model.layer(i))) {
            for (const auto& n : s->nodes())
                if (n.size() == 1) bump(n.candidates.front().descriptor);
        }
    }
    if (counts.empty()) return std::nullopt;
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
        if (it->second > best->second) best = it;
    return best->first;
}

void rebuild_kan_head(Model& model, const BasisDescriptor& d, std::uint64_t seed) {
    std::size_t first = 0;
    for (std::size_t i = 0; i < model.size(); ++i)
        if (is_conv(model.layer(i))) first = i + 1;
    std::mt19937_64 rng(seed);
    for (std::size_t i = first; i < model.size(); ++i) {
        if (const auto* k = dynamic_cast<const FixedKANLayer*>(&model.layer(i))) {
            model.replace(i, std::make_unique<FixedKANLayer>(k->in_dim(), k->out_dim(), d, rng));
        }
    }
}

std::size_t penultimate_layer(const Model& model) {
    for (std::size_t i = model.size(); i-- > 0;) {
        if (!model.layer(i).parameters().empty()) {
            if (i == 0) throw ContractError("penultimate layer: model has a single parametrised layer");
            return i;
        }
    }
    throw ContractError("penultimate layer: model has no parametrised layer");
}

}  // namespace skan
