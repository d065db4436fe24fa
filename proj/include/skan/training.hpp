#pragma once

// Pre-training with selection (full train -> weight-only train -> prune,
// repeated until one family per node remains), subsampling and the final
// training loop.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skan/model.hpp"
#include "skan/optim.hpp"

namespace skan {

/// In-memory dataset. Regression sets fill `targets` (target_dim values per
/// item); classification sets fill `labels` and set num_classes.
struct Dataset {
    Shape item_shape;
    std::vector<double> inputs;
    std::vector<double> targets;
    std::size_t target_dim = 0;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const;
    std::size_t item_numel() const { return shape_numel(item_shape); }
    bool is_classification() const { return num_classes > 0; }
    /// Throws ContractError when buffer lengths disagree.
    void check() const;

    Dataset select(std::span<const std::size_t> idx) const;
    Dataset head(std::size_t n) const;
    Tensor batch_inputs(std::span<const std::size_t> idx) const;
    Tensor batch_targets(std::span<const std::size_t> idx) const;
    std::vector<int> batch_labels(std::span<const std::size_t> idx) const;
};

enum class Sampling { Stratified, Interval, Full };
enum class LossKind { MSE, CrossEntropy };

std::string_view sampling_name(Sampling s);
Sampling parse_sampling(std::string_view s);

/// STRATIFIED keeps round(fraction * class size) items per class (at least
/// one), spread evenly through each class. INTERVAL sorts by target (or
/// label) and keeps every ceil(1/fraction)-th item starting from the
/// smallest. FULL returns the dataset unchanged. Selected items keep their
/// original relative order except under INTERVAL, which yields target order.
Dataset subsample(const Dataset& data, double fraction, Sampling strategy);

struct TrainSchedule {
    int full_epochs_per_cycle = 20;
    int select_epochs_per_cycle = 20;
    int total_epochs = 1000;
    /// Final-training epochs. Negative means total_epochs minus the epochs
    /// spent in pre-training.
    int final_epochs = -1;
    double lr = 1e-3;
    double pretrain_fraction = 1.0;
    Sampling sampling = Sampling::Full;
    bool reinit_after_selection = false;
    std::uint64_t seed = 0;
    /// 0 means full batch.
    std::size_t batch_size = 0;
    /// Evaluate the test set every n epochs (and always after the last one);
    /// 0 evaluates after the last epoch only.
    int eval_every = 1;

    static TrainSchedule fitting();
    /// dataset: "mnist", "fashion_mnist", "cifar10" or "cifar100".
    static TrainSchedule classification(std::string_view dataset);

    void validate() const;
};

/// Epochs left for final training after `cycles` pre-training cycles.
/// Throws ContractError if the budget would be negative.
int final_epoch_budget(const TrainSchedule& s, std::size_t cycles);

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    /// MSE or accuracy in percent; NaN when not evaluated this epoch.
    double test_metric = std::numeric_limits<double>::quiet_NaN();
};
using TrainingCurve = std::vector<EpochMetrics>;

struct TrainOptions {
    int epochs = 0;
    LossKind loss = LossKind::MSE;
    AdamOptions adam{};
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    int eval_every = 1;
    /// Called after every optimiser step with (epoch, batch, loss).
    std::function<void(int, std::size_t, double)> on_batch;
    std::function<void(const EpochMetrics&)> on_epoch;
};

/// Progress callback for the multi-phase loops: phase is "full", "select"
/// or "final".
using EpochObserver = std::function<void(std::string_view phase, const EpochMetrics&)>;

/// Raised when a loss turns NaN or infinite; the message carries the epoch,
/// batch and the mixing weights of any selectable layer.
class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Minibatch Adam training over the currently trainable parameters with a
/// fresh optimiser state. Batches are reshuffled each epoch from `seed`.
TrainingCurve train_full(Model& model, const Dataset& train, const Dataset* test, const TrainOptions& opts);

/// MSE for regression sets, accuracy in percent for classification sets.
double evaluate(const Model& model, const Dataset& data, std::size_t batch_size = 256);

struct NodeRecord {
    std::size_t layer = 0;
    std::size_t node = 0;
    std::string position;
    std::string family;
    std::string descriptor;
    /// Mixing weights at the end of each cycle's weight-only phase, before
    /// pruning.
    std::vector<std::vector<double>> weight_history;
    /// Families removed, in pruning order.
    std::vector<std::string> removed;
};

struct SelectionRecord {
    std::size_t pool_size = 0;
    std::size_t cycles = 0;
    std::size_t pretrain_items = 0;
    std::vector<NodeRecord> nodes;

    /// Two-column table, one row per node: "1 | RBF". Nodes are numbered
    /// across selectable layers in model order.
    std::string table() const;
    std::vector<std::string> families() const;
    bool same_selection(const SelectionRecord& other) const;
};

struct PretrainResult {
    SelectionRecord record;
    TrainingCurve curve;
    int epochs = 0;
};

/// Runs the selection loop on a subsample of `data` until every node holds
/// one family, then collapses the model in place and makes all parameters
/// trainable again.
PretrainResult pretrain_select(Model& model, const Dataset& data, const TrainSchedule& schedule, LossKind loss,
                               const EpochObserver& observer = {});

/// Fresh draws for every parameter; families are unchanged. Requires a
/// collapsed model.
void reinitialize(Model& model, std::uint64_t seed);

struct ProtocolResult {
    std::optional<SelectionRecord> selection;
    TrainingCurve pretrain_curve;
    TrainingCurve final_curve;
    int pretrain_epochs = 0;
    int final_epochs = 0;
    double test_metric = std::numeric_limits<double>::quiet_NaN();
};

struct ProtocolHooks {
    /// Pre-training draws its subsample from this set instead of `train`.
    const Dataset* pretrain_source = nullptr;
    /// Runs after collapse and before re-initialisation.
    std::function<void(Model&, const SelectionRecord&)> after_selection;
    EpochObserver on_epoch;
};

/// Pre-training with selection (when the model has selectable layers),
/// optional re-initialisation, then final training on the whole of `train`.
ProtocolResult run_protocol(Model& model, const Dataset& train, const Dataset& test, const TrainSchedule& schedule,
                            LossKind loss, const ProtocolHooks& hooks = {});

}  // namespace skan
