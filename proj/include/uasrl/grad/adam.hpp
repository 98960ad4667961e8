#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uasrl/grad/tensor.hpp"

namespace uasrl::grad {

/// Named, ordered collection of leaf parameter tensors. Iteration order is
/// insertion order, which makes optimizer state and checkpoints stable.
class ParameterSet {
public:
    void add(std::string name, Tensor t);

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

    /// Appends every entry of `other` (names must not collide).
    void extend(const ParameterSet& other);

    /// Deep copy preserving requires_grad.
    ParameterSet clone() const;

    /// Deep copy with requires_grad=false on every tensor (target networks).
    ParameterSet detached_clone() const;

    void zero_grad();

    std::size_t total_numel() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

/// Bit-exact equality of two parameter sets (names, shapes, values).
bool parameters_equal(const ParameterSet& a, const ParameterSet& b);

/// Global L2-norm gradient clip; returns the pre-clip norm.
double clip_grad_norm(ParameterSet& params, double max_norm);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Standard Adam with bias correction. The learning rate is passed per
/// step so schedules can decay it without touching optimizer state.
class Adam {
public:
    explicit Adam(const ParameterSet& params, AdamConfig config = {});

    /// Applies one update from the gradients stored on `params`.
    /// Every parameter must carry a gradient (ContractError otherwise).
    void step(ParameterSet& params, double lr);

    std::uint64_t step_count() const { return step_count_; }

private:
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t step_count_ = 0;
};

} // namespace uasrl::grad
