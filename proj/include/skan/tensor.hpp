#pragma once

// Dense 64-bit tensors with a define-by-run reverse-mode graph.
//
// A Tensor is a cheap handle onto shared storage. Operations in ops.hpp build
// new tensors and, when any input requires a gradient, record a backward
// closure plus the parent handles. backward() on a scalar root walks the
// recorded graph in reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when a caller breaks an operation's preconditions (shape
/// mismatch, non-scalar backward root, out-of-range label, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TensorImpl;
using BackwardFn = std::function<void(TensorImpl& self)>;

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool is_leaf = true;
    std::string name;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    BackwardFn backward;

    // Adds `g` into grad, allocating zeros on first use.
    void accumulate(std::span<const double> g);
    std::span<double> grad_buffer();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);
    /// Leaf tensor that participates in gradient computation.
    static Tensor parameter(Shape shape, std::vector<double> data, std::string name = {});

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t dim(std::size_t i) const;
    std::size_t ndim() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<const double> data() const { return impl_->data; }
    /// In-place access; only valid on leaves (optimizer updates, loaders).
    std::span<double> mutable_data();
    double item() const;
    double operator[](std::size_t i) const { return impl_->data[i]; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on);
    bool is_leaf() const { return impl_->is_leaf; }
    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const { return impl_->grad; }
    void zero_grad();

    const std::string& name() const { return impl_->name; }
    void set_name(std::string n) { impl_->name = std::move(n); }

    /// Deep copy of values into a fresh leaf (no graph, same requires_grad).
    Tensor clone() const;
    /// Same storage semantics as clone() but never requires grad.
    Tensor detach() const;

    /// Reverse-mode sweep from a scalar root. Leaf gradients accumulate
    /// across calls; intermediate gradients are recomputed each call.
    void backward() const;

    TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

/// True while graph recording is enabled on this thread.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds an op result. `backward` is recorded only if grad mode is on and at
/// least one parent requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   BackwardFn backward);

}  // namespace skan
