#include "skan/kan_layer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "skan/ops.hpp"

namespace skan {

EdgeBundle EdgeBundle::create(const BasisDescriptor& d, std::size_t out_dim, std::mt19937_64& rng) {
    const std::size_t P = skan::param_count(d);
    std::vector<double> p(out_dim * P);
    for (std::size_t o = 0; o < out_dim; ++o) init_params(d, std::span(p).subspan(o * P, P), rng);
    return {d, Tensor::parameter({out_dim, P}, std::move(p), d.label())};
}

EdgeBundle EdgeBundle::deep_copy() const { return {descriptor, params.clone()}; }

Tensor bundle_sum(const Tensor& x, std::size_t out_dim, const std::vector<const EdgeBundle*>& bundles,
                  const std::vector<std::size_t>& columns,
                  const std::vector<std::pair<Tensor, std::size_t>>* weights) {
    std::vector<const BasisDescriptor*> order;
    std::vector<std::vector<TapRef>> groups;
    for (std::size_t b = 0; b < bundles.size(); ++b) {
        const auto& d = bundles[b]->descriptor;
        auto it = std::find_if(order.begin(), order.end(), [&](const BasisDescriptor* e) { return *e == d; });
        std::size_t g = static_cast<std::size_t>(it - order.begin());
        if (it == order.end()) {
            order.push_back(&d);
            groups.emplace_back();
        }
        TapRef tap{columns[b], bundles[b]->params, Tensor{}, 0};
        if (weights) {
            tap.weights = (*weights)[b].first;
            tap.weight_index = (*weights)[b].second;
        }
        groups[g].push_back(std::move(tap));
    }
    if (groups.empty()) throw ContractError("kan layer: no edges to evaluate");
    std::vector<Tensor> parts;
    parts.reserve(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        parts.push_back(edge_block_sum(x, *order[g], groups[g], out_dim));
    return ops::add_n(parts);
}

namespace {

void check_input(const char* who, const Tensor& x, std::size_t in_dim) {
    if (x.ndim() != 2 || x.dim(1) != in_dim) {
        throw ContractError(std::string(who) + ": expected [batch x " + std::to_string(in_dim) + "] input, got " +
                            shape_str(x.shape()));
    }
}

std::string family_summary(const std::vector<const BasisDescriptor*>& ds) {
    std::vector<std::string> names;
    for (auto* d : ds) {
        auto l = d->label();
        if (std::find(names.begin(), names.end(), l) == names.end()) names.push_back(l);
    }
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
    return out;
}

}  // namespace

Tensor fixed_forward(const Tensor& x, std::size_t out_dim, const std::vector<EdgeBundle>& bundles) {
    std::vector<const EdgeBundle*> ptrs;
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        ptrs.push_back(&bundles[i]);
        cols.push_back(i);
    }
    return bundle_sum(x, out_dim, ptrs, cols, nullptr);
}

Tensor selectable_forward(const Tensor& x, std::size_t out_dim, const std::vector<SelectableNode>& nodes) {
    std::vector<const EdgeBundle*> ptrs;
    std::vector<std::size_t> cols;
    std::vector<std::pair<Tensor, std::size_t>> weights;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& node = nodes[i];
        if (node.candidates.empty()) {
            throw ContractError("selectable layer: node " + std::to_string(i) + " has no candidates");
        }
        for (std::size_t p = 0; p < node.candidates.size(); ++p) {
            ptrs.push_back(&node.candidates[p]);
            cols.push_back(i);
            weights.emplace_back(node.weights, p);
        }
    }
    return bundle_sum(x, out_dim, ptrs, cols, &weights);
}

// ---------------------------------------------------------------------------

FixedKANLayer::FixedKANLayer(std::size_t out_dim, const std::vector<BasisDescriptor>& per_input,
                             std::mt19937_64& rng)
    : out_dim_(out_dim) {
    if (out_dim == 0 || per_input.empty()) throw ContractError("kan layer: dimensions must be positive");
    for (const auto& d : per_input) bundles_.push_back(EdgeBundle::create(d, out_dim, rng));
}

FixedKANLayer::FixedKANLayer(std::size_t in_dim, std::size_t out_dim, const BasisDescriptor& d,
                             std::mt19937_64& rng)
    : FixedKANLayer(out_dim, std::vector<BasisDescriptor>(in_dim, d), rng) {}

FixedKANLayer::FixedKANLayer(std::size_t out_dim, std::vector<EdgeBundle> bundles)
    : out_dim_(out_dim), bundles_(std::move(bundles)) {
    if (out_dim == 0 || bundles_.empty()) throw ContractError("kan layer: dimensions must be positive");
    for (const auto& b : bundles_) {
        if (b.params.numel() != out_dim * skan::param_count(b.descriptor)) {
            throw ContractError("kan layer: bundle for " + b.descriptor.label() + " has wrong parameter count");
        }
    }
}

std::string FixedKANLayer::describe() const {
    std::vector<const BasisDescriptor*> ds;
    for (const auto& b : bundles_) ds.push_back(&b.descriptor);
    std::ostringstream os;
    os << "KAN(" << in_dim() << "->" << out_dim_ << ", " << family_summary(ds) << ")";
    return os.str();
}

Tensor FixedKANLayer::forward(const Tensor& x) const {
    check_input("kan layer", x, in_dim());
    return fixed_forward(x, out_dim_, bundles_);
}

std::vector<Tensor> FixedKANLayer::parameters() const {
    std::vector<Tensor> out;
    for (const auto& b : bundles_) out.push_back(b.params);
    return out;
}

std::unique_ptr<Layer> FixedKANLayer::clone() const {
    std::vector<EdgeBundle> copy;
    for (const auto& b : bundles_) copy.push_back(b.deep_copy());
    return std::make_unique<FixedKANLayer>(out_dim_, std::move(copy));
}

void FixedKANLayer::reinitialize(std::mt19937_64& rng) {
    for (auto& b : bundles_) {
        const std::size_t P = skan::param_count(b.descriptor);
        auto data = b.params.mutable_data();
        for (std::size_t o = 0; o < out_dim_; ++o) init_params(b.descriptor, data.subspan(o * P, P), rng);
    }
}

EdgeFunction FixedKANLayer::edge(std::size_t i, std::size_t j) const {
    if (i >= in_dim() || j >= out_dim_) throw ContractError("kan layer: edge index out of range");
    const auto& b = bundles_[i];
    const std::size_t P = skan::param_count(b.descriptor);
    auto d = b.params.data();
    std::vector<double> p(d.begin() + static_cast<long>(j * P), d.begin() + static_cast<long>((j + 1) * P));
    return {b.descriptor, Tensor::parameter({P}, std::move(p), b.descriptor.label())};
}

// ---------------------------------------------------------------------------

std::optional<PruneEvent> prune_node(SelectableNode& node) {
    const std::size_t m = node.candidates.size();
    if (m <= 1) return std::nullopt;
    auto w = node.weights.data();
    std::size_t victim = 0;
    for (std::size_t p = 1; p < m; ++p) {
        // Ties resolve to the higher index.
        if (std::abs(w[p]) <= std::abs(w[victim])) victim = p;
    }
    PruneEvent ev;
    ev.node = node.input_index;
    ev.removed_index = victim;
    ev.removed_family = node.candidates[victim].descriptor.label();
    ev.removed_weight = w[victim];

    std::vector<double> kept;
    for (std::size_t p = 0; p < m; ++p)
        if (p != victim) kept.push_back(w[p]);
    // Sum and divide in long double.
    long double total = 0.0L;
    for (double v : kept) total += v;
    if (std::abs(total) < 1e-300L || !std::isfinite(static_cast<double>(total))) {
        std::fill(kept.begin(), kept.end(), 1.0 / static_cast<double>(kept.size()));
    } else {
        for (auto& v : kept) v = static_cast<double>(static_cast<long double>(v) / total);
    }
    node.candidates.erase(node.candidates.begin() + static_cast<long>(victim));
    const bool trainable = node.weights.requires_grad();
    node.weights = Tensor::parameter({kept.size()}, kept, "attention");
    node.weights.set_requires_grad(trainable);
    ev.weights_after = std::move(kept);
    return ev;
}

PruneReport SelectableLayer::prune() {
    PruneReport report;
    auto& ns = nodes();
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (auto ev = prune_node(ns[i])) {
            ev->node = i;
            report.push_back(std::move(*ev));
        }
    }
    return report;
}

bool SelectableLayer::fully_selected() const {
    const auto& ns = nodes();
    return std::all_of(ns.begin(), ns.end(), [](const SelectableNode& n) { return n.size() == 1; });
}

std::size_t SelectableLayer::max_candidates() const {
    std::size_t m = 0;
    for (const auto& n : nodes()) m = std::max(m, n.size());
    return m;
}

void SelectableLayer::set_trainable(TrainMode mode) {
    mode_ = mode;
    for (auto& n : nodes()) {
        for (auto& c : n.candidates) c.params.set_requires_grad(mode == TrainMode::All);
        n.weights.set_requires_grad(true);
    }
}

std::vector<SelectableNode> make_nodes(std::size_t in_dim, std::size_t out_dim,
                                       const std::vector<BasisDescriptor>& pool, std::mt19937_64& rng) {
    if (pool.empty()) throw ContractError("selectable layer: empty candidate pool");
    if (in_dim == 0 || out_dim == 0) throw ContractError("selectable layer: dimensions must be positive");
    std::vector<SelectableNode> nodes(in_dim);
    const double w0 = 1.0 / static_cast<double>(pool.size());
    for (std::size_t i = 0; i < in_dim; ++i) {
        nodes[i].input_index = i;
        for (const auto& d : pool) nodes[i].candidates.push_back(EdgeBundle::create(d, out_dim, rng));
        nodes[i].weights = Tensor::parameter({pool.size()}, std::vector<double>(pool.size(), w0), "attention");
    }
    return nodes;
}

std::vector<EdgeBundle> surviving_bundles(const std::vector<SelectableNode>& nodes) {
    std::vector<EdgeBundle> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].size() != 1) {
            throw ContractError("collapse: node " + std::to_string(i) + " still has " +
                                std::to_string(nodes[i].size()) + " candidates");
        }
        out.push_back(nodes[i].candidates.front());
    }
    return out;
}

SelectableKANLayer::SelectableKANLayer(std::size_t in_dim, std::size_t out_dim,
                                       const std::vector<BasisDescriptor>& pool, std::mt19937_64& rng)
    : out_dim_(out_dim), nodes_(make_nodes(in_dim, out_dim, pool, rng)) {}

SelectableKANLayer::SelectableKANLayer(std::size_t out_dim, std::vector<SelectableNode> nodes)
    : out_dim_(out_dim), nodes_(std::move(nodes)) {
    if (out_dim == 0 || nodes_.empty()) throw ContractError("selectable layer: dimensions must be positive");
}

std::string SelectableKANLayer::describe() const {
    std::ostringstream os;
    os << "S-KAN(" << in_dim() << "->" << out_dim_ << ", max " << max_candidates() << " candidates)";
    return os.str();
}

Tensor SelectableKANLayer::forward(const Tensor& x) const {
    check_input("selectable kan layer", x, in_dim());
    return selectable_forward(x, out_dim_, nodes_);
}

std::vector<Tensor> SelectableKANLayer::parameters() const {
    std::vector<Tensor> out;
    for (const auto& n : nodes_) {
        for (const auto& c : n.candidates) out.push_back(c.params);
        out.push_back(n.weights);
    }
    return out;
}

std::unique_ptr<Layer> SelectableKANLayer::clone() const {
    std::vector<SelectableNode> copy;
    for (const auto& n : nodes_) {
        SelectableNode c{n.input_index, {}, n.weights.clone()};
        for (const auto& b : n.candidates) c.candidates.push_back(b.deep_copy());
        copy.push_back(std::move(c));
    }
    auto out = std::make_unique<SelectableKANLayer>(out_dim_, std::move(copy));
    out->mode_ = mode_;
    return out;
}

void SelectableKANLayer::reinitialize(std::mt19937_64& rng) {
    for (auto& n : nodes_) {
        for (auto& b : n.candidates) {
            const std::size_t P = skan::param_count(b.descriptor);
            auto data = b.params.mutable_data();
            for (std::size_t o = 0; o < out_dim_; ++o) init_params(b.descriptor, data.subspan(o * P, P), rng);
        }
        auto w = n.weights.mutable_data();
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    }
}

std::string SelectableKANLayer::node_label(std::size_t node) const { return "x" + std::to_string(node + 1); }

FixedKANLayer SelectableKANLayer::collapse_to_fixed() const {
    std::vector<EdgeBundle> copy;
    for (const auto& b : surviving_bundles(nodes_)) copy.push_back(b.deep_copy());
    return FixedKANLayer(out_dim_, std::move(copy));
}

std::unique_ptr<Layer> SelectableKANLayer::collapse() const {
    return std::make_unique<FixedKANLayer>(collapse_to_fixed());
}

}  // namespace skan
