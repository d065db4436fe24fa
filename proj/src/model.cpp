#include "skan/model.hpp"

#include <random>
#include <sstream>

namespace skan {

Model::Model(const Model& other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        Model tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

Model& Model::add(std::unique_ptr<Layer> layer) {
    if (!layer) throw ContractError("model: null layer");
    layers_.push_back(std::move(layer));
    return *this;
}

Tensor Model::forward(const Tensor& x) const { return forward_prefix(x, layers_.size()); }

Tensor Model::forward_prefix(const Tensor& x, std::size_t count) const {
    if (count > layers_.size()) {
        throw ContractError("model: prefix of " + std::to_string(count) + " layers, model has " +
                            std::to_string(layers_.size()));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < count; ++i) h = layers_[i]->forward(h);
    return h;
}

void Model::replace(std::size_t i, std::unique_ptr<Layer> layer) {
    if (i >= layers_.size() || !layer) throw ContractError("model: bad layer replacement");
    layers_[i] = std::move(layer);
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers_) {
        auto p = l->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<Tensor> Model::trainable_parameters() const {
    std::vector<Tensor> out;
    for (auto& p : parameters())
        if (p.requires_grad()) out.push_back(p);
    return out;
}

std::vector<std::size_t> Model::selectable_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (dynamic_cast<const SelectableLayer*>(layers_[i].get())) out.push_back(i);
    return out;
}

bool Model::fully_selected() const {
    for (auto i : selectable_indices())
        if (!static_cast<const SelectableLayer&>(*layers_[i]).fully_selected()) return false;
    return true;
}

std::size_t Model::max_candidates() const {
    std::size_t m = 1;
    for (auto i : selectable_indices())
        m = std::max(m, static_cast<const SelectableLayer&>(*layers_[i]).max_candidates());
    return m;
}

std::vector<LayerPrune> Model::prune() {
    std::vector<LayerPrune> out;
    for (auto i : selectable_indices()) {
        auto report = static_cast<SelectableLayer&>(*layers_[i]).prune();
        if (!report.empty()) out.push_back({i, std::move(report)});
    }
    return out;
}

void Model::collapse() {
    for (auto i : selectable_indices()) layers_[i] = static_cast<SelectableLayer&>(*layers_[i]).collapse();
}

void Model::set_trainable(TrainMode mode) {
    for (auto& l : layers_) l->set_trainable(mode);
}

void Model::reinitialize(std::uint64_t seed) {
    if (has_selectable()) throw ContractError("reinitialize: model still holds selectable layers; collapse first");
    std::mt19937_64 rng(seed);
    for (auto& l : layers_) l->reinitialize(rng);
}

std::string Model::summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < layers_.size(); ++i) os << (i ? " -> " : "") << layers_[i]->describe();
    return os.str();
}

std::size_t count_params(const Model& model) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < model.size(); ++i) n += model.layer(i).param_count();
    return n;
}

}  // namespace skan
