#include "uasrl/grad/tensor.hpp"

#include <cmath>
#include <sstream>

namespace uasrl::grad {

namespace {
thread_local Tape* g_active_tape = nullptr;
} // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ContractError("Tensor::from_vector: " + std::to_string(values.size()) +
                            " values do not fill shape " + shape_str(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_vector({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    if (!impl_) throw ContractError("Tensor: use of undefined tensor");
    return impl_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }
std::size_t Tensor::rank() const { return shape().size(); }

const std::vector<double>& Tensor::data() const {
    if (!impl_) throw ContractError("Tensor: use of undefined tensor");
    return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
    if (!impl_) throw ContractError("Tensor: use of undefined tensor");
    if (impl_->backward_fn) {
        throw ContractError("Tensor: mutation of a non-leaf tensor");
    }
    return impl_->data;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("Tensor::item: tensor has " + std::to_string(numel()) +
                            " elements, expected 1");
    }
    return data()[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
    if (!impl_) throw ContractError("Tensor: use of undefined tensor");
    if (impl_->backward_fn) {
        throw ContractError("Tensor::set_requires_grad: only leaf tensors may be toggled");
    }
    impl_->requires_grad = flag;
    return *this;
}

const std::vector<double>& Tensor::grad_raw() const {
    if (!impl_) throw ContractError("Tensor: use of undefined tensor");
    return impl_->grad;
}

std::vector<double> Tensor::grad_or_zeros() const {
    if (!impl_) throw ContractError("Tensor: use of undefined tensor");
    if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
    return impl_->grad;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

void Tensor::zero_grad() {
    if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const {
    if (!impl_) return Tensor();
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = false;
    return Tensor(std::move(impl));
}

void Tensor::check_finite(const std::string& op_name) const {
    for (double v : data()) {
        if (!std::isfinite(v)) {
            throw NumericalError(op_name + ": non-finite value " + std::to_string(v) +
                                 " in tensor " + shape_str(shape()));
        }
    }
}

void TensorImpl::accumulate_grad(const std::vector<double>& g) {
    auto& buf = grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

std::vector<double>& TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

void Tape::record(std::shared_ptr<TensorImpl> node) {
    nodes_.push_back(std::move(node));
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) {
        throw ContractError("Tape::backward: tape already consumed; call reset() first");
    }
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("Tape::backward: loss must be a defined scalar tensor");
    }
    TensorImpl* loss_impl = loss.impl();
    bool on_tape = false;
    for (const auto& n : nodes_) {
        if (n.get() == loss_impl) { on_tape = true; break; }
    }
    if (!on_tape) {
        throw ContractError("Tape::backward: loss is not recorded on this tape");
    }
    consumed_ = true;
    loss_impl->grad_buffer()[0] = 1.0;
    // Creation order is topological; reverse walk visits each node once.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        TensorImpl& node = **it;
        if (node.grad.empty()) continue; // not reachable from the loss
        if (node.backward_fn) node.backward_fn(node);
    }
}

void Tape::reset() {
    for (auto& n : nodes_) {
        n->parents.clear();
        n->backward_fn = nullptr;
    }
    nodes_.clear();
    consumed_ = false;
}

bool Tape::records(const Tensor& leaf) const {
    const TensorImpl* target = leaf.impl();
    for (const auto& n : nodes_) {
        if (n.get() == target) return true;
        for (const auto& p : n->parents) {
            if (p.get() == target) return true;
        }
    }
    return false;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

} // namespace uasrl::grad
