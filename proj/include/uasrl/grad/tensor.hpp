#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "uasrl/errors.hpp"

namespace uasrl::grad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;
class Tape;

/// Dense row-major 64-bit tensor. Copying a Tensor copies a handle; the
/// underlying buffer is shared and treated as immutable once produced by
/// an op. Gradients accumulate into `grad`, which stays empty until the
/// node is touched by a backward pass.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rank() const;

    const std::vector<double>& data() const;
    std::vector<double>& mutable_data(); // leaf-only; used by optimizers/tests

    double item() const; // numel()==1 required

    bool requires_grad() const;
    Tensor& set_requires_grad(bool flag); // leaf tensors only

    /// Gradient buffer; empty vector means "never touched by backward".
    const std::vector<double>& grad_raw() const;
    std::vector<double> grad_or_zeros() const;
    bool has_grad() const;
    void zero_grad();

    /// Value copy detached from any tape (no parents, requires_grad=false).
    Tensor detach() const;

    void check_finite(const std::string& op_name) const;

    TensorImpl* impl() const { return impl_.get(); }
    std::shared_ptr<TensorImpl> impl_ptr() const { return impl_; }

    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad; // empty until touched

    // reverse-mode graph; populated only while a tape is active
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(const TensorImpl&)> backward_fn;

    void accumulate_grad(const std::vector<double>& g);
    std::vector<double>& grad_buffer(); // allocates zeros on first touch
};

/// Records the nodes of one forward pass in creation (= topological) order.
/// A tape can be played backward exactly once, then must be reset.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Reverse pass from a scalar loss recorded on this tape. Gradients
    /// accumulate into every requires_grad leaf reachable from the loss.
    void backward(const Tensor& loss);

    void reset();
    bool consumed() const { return consumed_; }
    std::size_t num_recorded() const { return nodes_.size(); }

    /// True if `leaf` participates in any recorded node (as input or output).
    bool records(const Tensor& leaf) const;

    void record(std::shared_ptr<TensorImpl> node);

private:
    std::vector<std::shared_ptr<TensorImpl>> nodes_;
    bool consumed_ = false;
};

Tape* active_tape();

/// Makes `tape` the active recording target for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Disables recording; ops behave as plain math (rollouts, evaluation).
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

} // namespace uasrl::grad
