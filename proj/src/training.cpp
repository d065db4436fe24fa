#include "skan/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "skan/ops.hpp"

namespace skan {

// ---------------------------------------------------------------------------
// Dataset

std::size_t Dataset::size() const {
    const std::size_t n = item_numel();
    return n == 0 ? 0 : inputs.size() / n;
}

void Dataset::check() const {
    const std::size_t n = item_numel();
    if (n == 0) throw ContractError("dataset: empty item shape");
    if (inputs.size() % n != 0) throw ContractError("dataset: input buffer is not a whole number of items");
    const std::size_t N = size();
    if (is_classification()) {
        if (labels.size() != N) {
            throw ContractError("dataset: " + std::to_string(labels.size()) + " labels for " + std::to_string(N) +
                                " items");
        }
        for (int l : labels)
            if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
                throw ContractError("dataset: label " + std::to_string(l) + " outside [0, " +
                                    std::to_string(num_classes) + ")");
            }
    } else if (target_dim == 0 || targets.size() != N * target_dim) {
        throw ContractError("dataset: target buffer does not match " + std::to_string(N) + " items");
    }
}

Dataset Dataset::select(std::span<const std::size_t> idx) const {
    Dataset out;
    out.item_shape = item_shape;
    out.target_dim = target_dim;
    out.num_classes = num_classes;
    const std::size_t n = item_numel();
    const std::size_t N = size();
    out.inputs.reserve(idx.size() * n);
    for (auto i : idx) {
        if (i >= N) throw ContractError("dataset: index " + std::to_string(i) + " out of range");
        out.inputs.insert(out.inputs.end(), inputs.begin() + static_cast<long>(i * n),
                          inputs.begin() + static_cast<long>((i + 1) * n));
        if (is_classification()) {
            out.labels.push_back(labels[i]);
        } else {
            out.targets.insert(out.targets.end(), targets.begin() + static_cast<long>(i * target_dim),
                               targets.begin() + static_cast<long>((i + 1) * target_dim));
        }
    }
    return out;
}

Dataset Dataset::head(std::size_t n) const {
    std::vector<std::size_t> idx(std::min(n, size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return select(idx);
}

Tensor Dataset::batch_inputs(std::span<const std::size_t> idx) const {
    const std::size_t n = item_numel();
    std::vector<double> buf;
    buf.reserve(idx.size() * n);
    for (auto i : idx)
        buf.insert(buf.end(), inputs.begin() + static_cast<long>(i * n), inputs.begin() + static_cast<long>((i + 1) * n));
    Shape s{idx.size()};
    s.insert(s.end(), item_shape.begin(), item_shape.end());
    return Tensor::from(std::move(s), std::move(buf));
}

Tensor Dataset::batch_targets(std::span<const std::size_t> idx) const {
    std::vector<double> buf;
    buf.reserve(idx.size() * target_dim);
    for (auto i : idx)
        buf.insert(buf.end(), targets.begin() + static_cast<long>(i * target_dim),
                   targets.begin() + static_cast<long>((i + 1) * target_dim));
    return Tensor::from({idx.size(), target_dim}, std::move(buf));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Sampling

std::string_view sampling_name(Sampling s) {
    switch (s) {
        case Sampling::Stratified: return "STRATIFIED";
        case Sampling::Interval: return "INTERVAL";
        case Sampling::Full: return "FULL";
    }
    return "?";
}

Sampling parse_sampling(std::string_view s) {
    std::string u(s);
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
    if (u == "STRATIFIED") return Sampling::Stratified;
    if (u == "INTERVAL") return Sampling::Interval;
    if (u == "FULL") return Sampling::Full;
    throw ContractError("unknown sampling strategy '" + std::string(s) + "'");
}

Dataset subsample(const Dataset& data, double fraction, Sampling strategy) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ContractError("subsample: fraction must lie in (0, 1], got " + std::to_string(fraction));
    }
    if (strategy == Sampling::Full || (fraction == 1.0 && strategy != Sampling::Interval)) return data;

    const std::size_t N = data.size();
    std::vector<std::size_t> keep;

    if (strategy == Sampling::Stratified) {
        if (!data.is_classification()) throw ContractError("subsample: STRATIFIED needs class labels");
        std::vector<std::vector<std::size_t>> by_class(data.num_classes);
        for (std::size_t i = 0; i < N; ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
        std::string empty;
        for (std::size_t c = 0; c < by_class.size(); ++c)
            if (by_class[c].empty()) empty += (empty.empty() ? "" : ", ") + std::to_string(c);
        if (!empty.empty()) throw ContractError("subsample: no items for class(es) " + empty);
        for (const auto& members : by_class) {
            const std::size_t n = members.size();
            const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
            const std::size_t count = std::clamp<std::size_t>(want, 1, n);
            for (std::size_t k = 0; k < count; ++k) keep.push_back(members[k * n / count]);
        }
        std::sort(keep.begin(), keep.end());
        return data.select(keep);
    }

    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key = [&](std::size_t i) {
        return data.is_classification() ? static_cast<double>(data.labels[i]) : data.targets[i * data.target_dim];
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    const auto step = static_cast<std::size_t>(std::ceil(1.0 / fraction - 1e-9));
    for (std::size_t k = 0; k < N; k += step) keep.push_back(order[k]);
    return data.select(keep);
}

// ---------------------------------------------------------------------------
// Schedule

TrainSchedule TrainSchedule::fitting() { return TrainSchedule{}; }

TrainSchedule TrainSchedule::classification(std::string_view dataset) {
    TrainSchedule s;
    s.full_epochs_per_cycle = 3;
    s.select_epochs_per_cycle = 3;
    s.pretrain_fraction = 0.01;
    s.sampling = Sampling::Stratified;
    s.reinit_after_selection = true;
    s.batch_size = 64;
    if (dataset == "mnist" || dataset == "fashion_mnist") {
        s.final_epochs = 30;
    } else if (dataset == "cifar10" || dataset == "cifar100") {
        s.final_epochs = 15;
    } else {
        throw ContractError("classification schedule: unknown dataset '" + std::string(dataset) + "'");
    }
    s.total_epochs = 0;
    return s;
}

void TrainSchedule::validate() const {
    if (full_epochs_per_cycle < 0 || select_epochs_per_cycle < 0 || total_epochs < 0) {
        throw ContractError("schedule: epoch counts must be non-negative");
    }
    if (!(lr > 0.0)) throw ContractError("schedule: lr must be positive");
    if (!(pretrain_fraction > 0.0 && pretrain_fraction <= 1.0)) {
        throw ContractError("schedule: pretrain_fraction must lie in (0, 1]");
    }
    if (eval_every < 0) throw ContractError("schedule: eval_every must be non-negative");
}

int final_epoch_budget(const TrainSchedule& s, std::size_t cycles) {
    if (s.final_epochs >= 0) return s.final_epochs;
    const long spent = static_cast<long>(cycles) * (s.full_epochs_per_cycle + s.select_epochs_per_cycle);
    const long left = s.total_epochs - spent;
    if (left < 0) {
        throw ContractError("schedule: " + std::to_string(cycles) + " cycles use " + std::to_string(spent) +
                            " epochs, more than the total of " + std::to_string(s.total_epochs));
    }
    return static_cast<int>(left);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::string weight_diagnostics(const Model& model) {
    std::ostringstream os;
    for (auto li : model.selectable_indices()) {
        const auto& layer = static_cast<const SelectableLayer&>(model.layer(li));
        const auto& nodes = layer.nodes();
        const std::size_t shown = std::min<std::size_t>(nodes.size(), 8);
        for (std::size_t n = 0; n < shown; ++n) {
            os << "\n  layer " << li << " node " << layer.node_label(n) << " weights:";
            for (double w : nodes[n].weights.data()) os << ' ' << w;
        }
        if (shown < nodes.size()) os << "\n  layer " << li << ": " << nodes.size() - shown << " more nodes";
    }
    return os.str();
}

Tensor batch_loss(const Model& model, const Dataset& data, std::span<const std::size_t> idx, LossKind loss) {
    Tensor out = model.forward(data.batch_inputs(idx));
    if (loss == LossKind::CrossEntropy) {
        const auto labels = data.batch_labels(idx);
        return cross_entropy_loss(out, labels);
    }
    return mse_loss(out, data.batch_targets(idx));
}

}  // namespace

double evaluate(const Model& model, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw ContractError("evaluate: empty dataset");
    NoGradGuard guard;
    const std::size_t N = data.size();
    if (batch_size == 0) batch_size = N;
    double acc = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < N; start += batch_size) {
        const std::size_t end = std::min(N, start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor out = model.forward(data.batch_inputs(idx));
        auto o = out.data();
        if (data.is_classification()) {
            const std::size_t C = out.dim(1);
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const auto row = o.subspan(r * C, C);
                const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
                if (arg == data.labels[idx[r]]) acc += 1.0;
            }
        } else {
            if (out.numel() != idx.size() * data.target_dim) {
                throw ContractError("evaluate: model output " + shape_str(out.shape()) + " does not match targets");
            }
            for (std::size_t k = 0; k < out.numel(); ++k) {
                const double d = o[k] - data.targets[start * data.target_dim + k];
                acc += d * d;
            }
        }
    }
    return data.is_classification() ? 100.0 * acc / static_cast<double>(N)
                                    : acc / static_cast<double>(N * data.target_dim);
}

TrainingCurve train_full(Model& model, const Dataset& train, const Dataset* test, const TrainOptions& opts) {
    if (opts.epochs < 0) throw ContractError("train_full: negative epoch count");
    TrainingCurve curve;
    if (opts.epochs == 0) return curve;
    train.check();
    const std::size_t N = train.size();
    if (N == 0) throw ContractError("train_full: empty training set");
    if ((opts.loss == LossKind::CrossEntropy) != train.is_classification()) {
        throw ContractError("train_full: loss kind does not match the dataset");
    }

    const auto params = model.trainable_parameters();
    AdamState state(opts.adam);
    std::mt19937_64 rng(opts.seed);
    const std::size_t bs = opts.batch_size == 0 ? N : std::min(opts.batch_size, N);
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        if (bs < N) std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < N; start += bs) {
            const std::size_t end = std::min(N, start + bs);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            zero_grads(params);
            Tensor loss = batch_loss(model, train, idx, opts.loss);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                std::ostringstream os;
                os << "training aborted: loss " << value << " at epoch " << epoch << ", batch " << batches
                   << weight_diagnostics(model);
                throw TrainingAborted(os.str());
            }
            if (!params.empty()) {
                loss.backward();
                adam_step(params, state);
            }
            if (opts.on_batch) opts.on_batch(epoch, batches, value);
            total += value * static_cast<double>(idx.size());
            ++batches;
        }
        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = total / static_cast<double>(N);
        const bool last = epoch == opts.epochs;
        if (test && (last || (opts.eval_every > 0 && epoch % opts.eval_every == 0))) m.test_metric = evaluate(model, *test);
        curve.push_back(m);
        if (opts.on_epoch) opts.on_epoch(m);
    }
    zero_grads(params);
    return curve;
}

// ---------------------------------------------------------------------------
// Selection

std::string SelectionRecord::table() const {
    std::ostringstream os;
    os << "Node | Family\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) os << i + 1 << " | " << nodes[i].family << '\n';
    return os.str();
}

std::vector<std::string> SelectionRecord::families() const {
    std::vector<std::string> out;
    for (const auto& n : nodes) out.push_back(n.descriptor);
    return out;
}

bool SelectionRecord::same_selection(const SelectionRecord& other) const {
    if (nodes.size() != other.nodes.size() || cycles != other.cycles) return false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& a = nodes[i];
        const auto& b = other.nodes[i];
        if (a.layer != b.layer || a.node != b.node || a.descriptor != b.descriptor || a.removed != b.removed) return false;
    }
    return true;
}

PretrainResult pretrain_select(Model& model, const Dataset& data, const TrainSchedule& schedule, LossKind loss,
                               const EpochObserver& observer) {
    schedule.validate();
    const auto layers = model.selectable_indices();
    if (layers.empty()) throw ContractError("pretrain_select: model has no selectable layer");

    Dataset sub = subsample(data, schedule.pretrain_fraction, schedule.sampling);
    PretrainResult result;
    auto& rec = result.record;
    rec.pool_size = model.max_candidates();
    rec.pretrain_items = sub.size();
    for (auto li : layers) {
        const auto& layer = static_cast<const SelectableLayer&>(model.layer(li));
        for (std::size_t n = 0; n < layer.nodes().size(); ++n) rec.nodes.push_back({li, n, layer.node_label(n), {}, {}, {}, {}});
    }

    TrainOptions opts;
    opts.loss = loss;
    opts.adam.lr = schedule.lr;
    opts.batch_size = schedule.batch_size;
    opts.eval_every = 0;

    auto run_phase = [&](TrainMode mode, int epochs, std::uint64_t salt) {
        model.set_trainable(mode);
        opts.epochs = epochs;
        opts.seed = mix_seed(schedule.seed, salt);
        const int offset = result.epochs;
        if (observer) {
            opts.on_epoch = [&, mode, offset](const EpochMetrics& em) {
                EpochMetrics shifted = em;
                shifted.epoch += offset;
                observer(mode == TrainMode::All ? "full" : "select", shifted);
            };
        }
        for (auto m : train_full(model, sub, nullptr, opts)) {
            m.epoch += offset;
            result.curve.push_back(m);
        }
        result.epochs += epochs;
    };

    while (!model.fully_selected()) {
        const std::uint64_t c = rec.cycles;
        run_phase(TrainMode::All, schedule.full_epochs_per_cycle, 2 * c);
        run_phase(TrainMode::WeightsOnly, schedule.select_epochs_per_cycle, 2 * c + 1);

        std::size_t k = 0;
        for (auto li : layers) {
            const auto& layer = static_cast<const SelectableLayer&>(model.layer(li));
            for (const auto& node : layer.nodes()) {
                auto w = node.weights.data();
                rec.nodes[k++].weight_history.emplace_back(w.begin(), w.end());
            }
        }
        const auto pruned = model.prune();
        std::size_t base = 0;
        for (auto li : layers) {
            for (const auto& lp : pruned)
                if (lp.layer == li)
                    for (const auto& ev : lp.report) rec.nodes[base + ev.node].removed.push_back(ev.removed_family);
            base += static_cast<const SelectableLayer&>(model.layer(li)).nodes().size();
        }
        ++rec.cycles;
    }

    std::size_t k = 0;
    for (auto li : layers) {
        const auto& layer = static_cast<const SelectableLayer&>(model.layer(li));
        for (const auto& node : layer.nodes()) {
            const auto& d = node.candidates.front().descriptor;
            rec.nodes[k].family = std::string(kind_name(d.kind));
            rec.nodes[k].descriptor = d.label();
            ++k;
        }
    }
    model.collapse();
    model.set_trainable(TrainMode::All);
    return result;
}

void reinitialize(Model& model, std::uint64_t seed) { model.reinitialize(seed); }

ProtocolResult run_protocol(Model& model, const Dataset& train, const Dataset& test, const TrainSchedule& schedule,
                            LossKind loss, const ProtocolHooks& hooks) {
    schedule.validate();
    ProtocolResult out;
    std::size_t cycles = 0;
    if (model.has_selectable()) {
        auto pre = pretrain_select(model, hooks.pretrain_source ? *hooks.pretrain_source : train, schedule, loss,
                                   hooks.on_epoch);
        cycles = pre.record.cycles;
        out.pretrain_epochs = pre.epochs;
        out.pretrain_curve = std::move(pre.curve);
        out.selection = std::move(pre.record);
        if (hooks.after_selection) hooks.after_selection(model, *out.selection);
        if (schedule.reinit_after_selection) reinitialize(model, mix_seed(schedule.seed, 0xC0FFEE));
    }
    model.set_trainable(TrainMode::All);
    out.final_epochs = final_epoch_budget(schedule, cycles);

    TrainOptions opts;
    opts.loss = loss;
    opts.adam.lr = schedule.lr;
    opts.batch_size = schedule.batch_size;
    opts.seed = mix_seed(schedule.seed, 0xF17A1);
    opts.eval_every = schedule.eval_every;
    opts.epochs = out.final_epochs;
    if (hooks.on_epoch) opts.on_epoch = [&](const EpochMetrics& m) { hooks.on_epoch("final", m); };
    out.final_curve = train_full(model, train, &test, opts);
    out.test_metric = out.final_curve.empty() ? evaluate(model, test) : out.final_curve.back().test_metric;
    return out;
}

}  // namespace skan
