#include "uasrl/grad/adam.hpp"

#include <cmath>

namespace uasrl::grad {

void ParameterSet::add(std::string name, Tensor t) {
    if (has(name)) throw ContractError("ParameterSet::add: duplicate name '" + name + "'");
    if (!t.defined()) throw ContractError("ParameterSet::add: undefined tensor");
    items_.emplace_back(std::move(name), std::move(t));
}

Tensor& ParameterSet::at(const std::string& name) {
    for (auto& [n, t] : items_) {
        if (n == name) return t;
    }
    throw ContractError("ParameterSet: unknown parameter '" + name + "'");
}

const Tensor& ParameterSet::at(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) return t;
    }
    throw ContractError("ParameterSet: unknown parameter '" + name + "'");
}

bool ParameterSet::has(const std::string& name) const {
    for (const auto& [n, t] : items_) {
        if (n == name) return true;
    }
    return false;
}

void ParameterSet::extend(const ParameterSet& other) {
    for (const auto& [n, t] : other.items_) add(n, t);
}

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (const auto& [n, t] : items_) {
        Tensor copy = Tensor::from_vector(t.shape(), t.data(), t.requires_grad());
        out.add(n, copy);
    }
    return out;
}

ParameterSet ParameterSet::detached_clone() const {
    ParameterSet out;
    for (const auto& [n, t] : items_) {
        out.add(n, Tensor::from_vector(t.shape(), t.data(), false));
    }
    return out;
}

void ParameterSet::zero_grad() {
    for (auto& [n, t] : items_) t.zero_grad();
}

std::size_t ParameterSet::total_numel() const {
    std::size_t total = 0;
    for (const auto& [n, t] : items_) total += t.numel();
    return total;
}

bool parameters_equal(const ParameterSet& a, const ParameterSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& [na, ta] = a.items()[i];
        const auto& [nb, tb] = b.items()[i];
        if (na != nb || ta.shape() != tb.shape() || ta.data() != tb.data()) return false;
    }
    return true;
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
    double sq = 0.0;
    for (auto& [n, t] : params.items()) {
        for (double g : t.grad_raw()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& [n, t] : params.items()) {
            auto& g = const_cast<std::vector<double>&>(t.grad_raw());
            for (double& v : g) v *= scale;
        }
    }
    return norm;
}

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& [n, t] : params.items()) {
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::step(ParameterSet& params, double lr) {
    if (params.size() != m_.size()) {
        throw ContractError("Adam::step: parameter set changed since construction");
    }
    ++step_count_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& [name, t] = params.items()[p];
        if (!t.has_grad()) {
            throw ContractError("Adam::step: parameter '" + name + "' has no gradient");
        }
        const auto& g = t.grad_raw();
        auto& data = t.mutable_data();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < data.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

} // namespace uasrl::grad
