#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "skan/kan_layer.hpp"
#include "skan/layer.hpp"

namespace skan {

/// Prune outcome for one selectable layer of a model.
struct LayerPrune {
    std::size_t layer = 0;
    PruneReport report;
};

/// Sequential stack of layers. Copying deep-copies every parameter.
class Model {
public:
    Model() = default;
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    Model& add(std::unique_ptr<Layer> layer);
    template <class L, class... Args>
    Model& emplace(Args&&... args) {
        return add(std::make_unique<L>(std::forward<Args>(args)...));
    }

    Tensor forward(const Tensor& x) const;
    /// Runs the first `count` layers only.
    Tensor forward_prefix(const Tensor& x, std::size_t count) const;

    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }
    void replace(std::size_t i, std::unique_ptr<Layer> layer);

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> trainable_parameters() const;

    std::vector<std::size_t> selectable_indices() const;
    bool has_selectable() const { return !selectable_indices().empty(); }
    /// True when no selectable layer has more than one candidate on any node.
    bool fully_selected() const;
    std::size_t max_candidates() const;
    std::vector<LayerPrune> prune();
    /// Replaces every selectable layer with its collapsed fixed form.
    void collapse();
    void set_trainable(TrainMode mode);
    /// Fresh parameter draw with unchanged families. Throws ContractError
    /// while selectable layers remain.
    void reinitialize(std::uint64_t seed);

    std::string summary() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Total learnable scalars: edge parameters, remaining mixing weights and
/// classic weights/biases.
std::size_t count_params(const Model& model);

}  // namespace skan
