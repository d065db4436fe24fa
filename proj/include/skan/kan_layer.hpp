#pragma once

// Fixed-family and selectable KAN layers.
//
// Both layers compute out[b, j] = sum_i phi_ij(x[b, i]) with no linear weights
// and no bias. The selectable layer keeps, per input dimension, a list of
// candidate families and a mixing-weight vector; phi_ij is then the
// weighted sum over candidates.

#include <optional>
#include <string>
#include <vector>

#include "skan/basis.hpp"
#include "skan/layer.hpp"

namespace skan {

/// The out_dim edges leaving one input dimension, all of one family.
/// params is [out_dim x param_count(descriptor)], edge-major.
struct EdgeBundle {
    BasisDescriptor descriptor;
    Tensor params;

    static EdgeBundle create(const BasisDescriptor& d, std::size_t out_dim, std::mt19937_64& rng);
    EdgeBundle deep_copy() const;
};

/// out[b, o] = sum over bundles of phi(x[b, column]); bundles sharing a
/// descriptor are evaluated together, groups summed in first-appearance order.
/// `weights`, when non-null, gives each bundle's mixing tensor and index.
Tensor bundle_sum(const Tensor& x, std::size_t out_dim, const std::vector<const EdgeBundle*>& bundles,
                  const std::vector<std::size_t>& columns,
                  const std::vector<std::pair<Tensor, std::size_t>>* weights);

class FixedKANLayer final : public Layer {
public:
    /// One descriptor per input dimension.
    FixedKANLayer(std::size_t out_dim, const std::vector<BasisDescriptor>& per_input, std::mt19937_64& rng);
    FixedKANLayer(std::size_t in_dim, std::size_t out_dim, const BasisDescriptor& d, std::mt19937_64& rng);
    FixedKANLayer(std::size_t out_dim, std::vector<EdgeBundle> bundles);

    std::string kind() const override { return "kan"; }
    std::string describe() const override;
    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<Layer> clone() const override;
    void reinitialize(std::mt19937_64& rng) override;
    void write(BinaryWriter& out) const override;

    std::size_t in_dim() const { return bundles_.size(); }
    std::size_t out_dim() const { return out_dim_; }
    const std::vector<EdgeBundle>& bundles() const { return bundles_; }
    std::vector<EdgeBundle>& bundles() { return bundles_; }
    /// Copy of edge (input i, output j).
    EdgeFunction edge(std::size_t i, std::size_t j) const;

private:
    std::size_t out_dim_;
    std::vector<EdgeBundle> bundles_;
};

/// Candidates for one input dimension plus their mixing weights.
struct SelectableNode {
    std::size_t input_index = 0;
    std::vector<EdgeBundle> candidates;
    Tensor weights;  // [candidates.size()], initialised to 1/m

    std::size_t size() const { return candidates.size(); }
};

struct PruneEvent {
    std::size_t node = 0;
    std::size_t removed_index = 0;
    std::string removed_family;
    double removed_weight = 0.0;
    std::vector<double> weights_after;
};
using PruneReport = std::vector<PruneEvent>;

/// Removes the candidate with the smallest |w| (ties: higher index) and
/// divides the remaining weights by their sum. Single-candidate nodes are
/// left untouched and return nullopt.
std::optional<PruneEvent> prune_node(SelectableNode& node);

/// Interface shared by the dense and convolutional selectable layers.
class SelectableLayer : public Layer {
public:
    virtual std::vector<SelectableNode>& nodes() = 0;
    virtual const std::vector<SelectableNode>& nodes() const = 0;
    /// Human-readable node position, e.g. "x1" or "c0/ky1/kx2".
    virtual std::string node_label(std::size_t node) const = 0;
    /// Requires every node to have exactly one candidate.
    virtual std::unique_ptr<Layer> collapse() const = 0;

    PruneReport prune();
    bool fully_selected() const;
    std::size_t max_candidates() const;
    void set_trainable(TrainMode mode) override;
    TrainMode train_mode() const { return mode_; }

protected:
    TrainMode mode_ = TrainMode::All;
};

class SelectableKANLayer final : public SelectableLayer {
public:
    SelectableKANLayer(std::size_t in_dim, std::size_t out_dim, const std::vector<BasisDescriptor>& pool,
                       std::mt19937_64& rng);
    SelectableKANLayer(std::size_t out_dim, std::vector<SelectableNode> nodes);

    std::string kind() const override { return "skan"; }
    std::string describe() const override;
    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;
    std::unique_ptr<Layer> clone() const override;
    void reinitialize(std::mt19937_64& rng) override;
    void write(BinaryWriter& out) const override;

    std::vector<SelectableNode>& nodes() override { return nodes_; }
    const std::vector<SelectableNode>& nodes() const override { return nodes_; }
    std::string node_label(std::size_t node) const override;
    std::unique_ptr<Layer> collapse() const override;
    FixedKANLayer collapse_to_fixed() const;

    std::size_t in_dim() const { return nodes_.size(); }
    std::size_t out_dim() const { return out_dim_; }

private:
    std::size_t out_dim_;
    std::vector<SelectableNode> nodes_;
};

/// Shared forward for the dense selectable layer and the conv variant: x is
/// [rows x nodes.size()].
Tensor selectable_forward(const Tensor& x, std::size_t out_dim, const std::vector<SelectableNode>& nodes);
Tensor fixed_forward(const Tensor& x, std::size_t out_dim, const std::vector<EdgeBundle>& bundles);

std::vector<SelectableNode> make_nodes(std::size_t in_dim, std::size_t out_dim,
                                       const std::vector<BasisDescriptor>& pool, std::mt19937_64& rng);
/// Requires single-candidate nodes; shares parameter tensors with `nodes`.
std::vector<EdgeBundle> surviving_bundles(const std::vector<SelectableNode>& nodes);

}  // namespace skan
