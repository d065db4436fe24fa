#include "skan/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace skan {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void TensorImpl::accumulate(std::span<const double> g) {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

std::span<double> TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size()) {
        throw ContractError("tensor: shape " + shape_str(shape) + " does not match " +
                            std::to_string(data.size()) + " values");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data, std::string name) {
    Tensor t = from(std::move(shape), std::move(data));
    t.impl_->requires_grad = true;
    t.impl_->name = std::move(name);
    return t;
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= impl_->shape.size()) {
        throw ContractError("tensor: dim " + std::to_string(i) + " out of range for shape " +
                            shape_str(impl_->shape));
    }
    return impl_->shape[i];
}

std::span<double> Tensor::mutable_data() {
    if (!impl_->is_leaf) throw ContractError("tensor: in-place write to a non-leaf tensor");
    return impl_->data;
}

double Tensor::item() const {
    if (impl_->data.size() != 1) {
        throw ContractError("tensor: item() on shape " + shape_str(impl_->shape));
    }
    return impl_->data[0];
}

void Tensor::set_requires_grad(bool on) {
    if (!impl_->is_leaf) throw ContractError("tensor: requires_grad can only be set on leaves");
    impl_->requires_grad = on;
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t = from(impl_->shape, impl_->data);
    t.impl_->requires_grad = impl_->requires_grad && impl_->is_leaf;
    t.impl_->name = impl_->name;
    return t;
}

Tensor Tensor::detach() const { return from(impl_->shape, impl_->data); }

void Tensor::backward() const {
    if (impl_->data.size() != 1 || !impl_->shape.empty()) {
        throw ContractError("backward: root must be scalar, got shape " + shape_str(impl_->shape));
    }
    if (!impl_->requires_grad) return;

    // Iterative post-order DFS gives a topological order without recursion
    // depth limits on long graphs.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack{{impl_.get(), 0}};
    seen.insert(impl_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorImpl* node : order) {
        if (!node->is_leaf) node->grad.assign(node->data.size(), 0.0);
    }
    impl_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (!node->is_leaf && node->backward) node->backward(*node);
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   BackwardFn backward) {
    Tensor out = Tensor::from(std::move(shape), std::move(data));
    if (!g_grad_enabled) return out;
    bool needs = std::any_of(parents.begin(), parents.end(),
                             [](const Tensor& p) { return p.defined() && p.requires_grad(); });
    if (!needs) return out;
    TensorImpl* impl = out.impl();
    impl->requires_grad = true;
    impl->is_leaf = false;
    impl->parents.reserve(parents.size());
    for (auto& p : parents) {
        if (p.defined()) impl->parents.push_back(p.shared());
    }
    impl->backward = std::move(backward);
    return out;
}

}  // namespace skan
