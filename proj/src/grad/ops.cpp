#include "uasrl/grad/ops.hpp"

#include <algorithm>
#include <cmath>

namespace uasrl::grad {

namespace {

using BackwardFn = std::function<void(const TensorImpl&)>;

Tensor make_node(Shape shape, std::vector<double> data,
                 std::initializer_list<Tensor> inputs,
                 const std::function<BackwardFn()>& make_backward) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);

    bool needs_grad = false;
    for (const Tensor& t : inputs) needs_grad = needs_grad || t.requires_grad();

    Tape* tape = active_tape();
    if (tape && needs_grad) {
        impl->requires_grad = true;
        impl->parents.reserve(inputs.size());
        for (const Tensor& t : inputs) impl->parents.push_back(t.impl_ptr());
        impl->backward_fn = make_backward();
        tape->record(impl);
    }
    return Tensor(std::move(impl));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
    }
}

std::size_t last_dim(const Tensor& a, const char* op) {
    if (a.rank() == 0) throw ContractError(std::string(op) + ": rank-0 tensor");
    return a.shape().back();
}

// F and DF stay concrete so the per-element calls inline.
template <typename F, typename DF>
Tensor unary_op(const Tensor& a, const char*, F f, DF df) {
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
    auto ai = a.impl_ptr();
    return make_node(a.shape(), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, df](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            const double* __restrict g = node.grad.data();
            const double* __restrict xd = ai->data.data();
            const double* __restrict yd = node.data.data();
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += g[i] * df(xd[i], yd[i]);
            }
        };
    });
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ContractError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                            shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(m * n, 0.0);
    {
        const double* __restrict pa = a.data().data();
        const double* __restrict pb = b.data().data();
        double* __restrict pc = out.data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double av = pa[i * k + p];
                const double* pbr = pb + p * n;
                double* pcr = pc + i * n;
                for (std::size_t j = 0; j < n; ++j) pcr[j] += av * pbr[j];
            }
        }
    }
    auto ai = a.impl_ptr();
    auto bi = b.impl_ptr();
    return make_node({m, n}, std::move(out), {a, b}, [&]() -> BackwardFn {
        return [ai, bi, m, k, n](const TensorImpl& node) {
            const double* __restrict g = node.grad.data();
            if (ai->requires_grad) {
                // dA[i,p] = sum_j g[i,j] * B[p,j]
                auto& ga = ai->grad_buffer();
                const double* __restrict pb = bi->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* gr = g + i * n;
                        const double* br = pb + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += gr[j] * br[j];
                        ga[i * k + p] += acc;
                    }
                }
            }
            if (bi->requires_grad) {
                // dB[p,j] = sum_i A[i,p] * g[i,j]
                auto& gb = bi->grad_buffer();
                const double* __restrict pa = ai->data.data();
                for (std::size_t i = 0; i < m; ++i) {
                    const double* gr = g + i * n;
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = pa[i * k + p];
                        double* gbr = gb.data() + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbr[j] += av * gr[j];
                    }
                }
            }
        };
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.numel());
        const auto& x = a.data();
        const auto& y = b.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
        auto ai = a.impl_ptr();
        auto bi = b.impl_ptr();
        return make_node(a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
            return [ai, bi](const TensorImpl& node) {
                ai->accumulate_grad(node.grad);
                bi->accumulate_grad(node.grad);
            };
        });
    }
    // row broadcast: [m,n] + [n]
    if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]) {
        const std::size_t m = a.shape()[0], n = a.shape()[1];
        std::vector<double> out(m * n);
        const auto& x = a.data();
        const auto& y = b.data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + y[j];
        auto ai = a.impl_ptr();
        auto bi = b.impl_ptr();
        return make_node(a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
            return [ai, bi, m, n](const TensorImpl& node) {
                ai->accumulate_grad(node.grad);
                auto& gb = bi->grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += node.grad[i * n + j];
            };
        });
    }
    throw ContractError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    const auto& y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    auto ai = a.impl_ptr();
    auto bi = b.impl_ptr();
    return make_node(a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
        return [ai, bi](const TensorImpl& node) {
            ai->accumulate_grad(node.grad);
            auto& gb = bi->grad_buffer();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= node.grad[i];
        };
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    const auto& y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    auto ai = a.impl_ptr();
    auto bi = b.impl_ptr();
    return make_node(a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
        return [ai, bi](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += node.grad[i] * bi->data[i];
            auto& gb = bi->grad_buffer();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += node.grad[i] * ai->data[i];
        };
    });
}

Tensor scalar_mul(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * c;
    auto ai = a.impl_ptr();
    return make_node(a.shape(), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, c](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += node.grad[i] * c;
        };
    });
}

Tensor scalar_add(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + c;
    auto ai = a.impl_ptr();
    return make_node(a.shape(), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai](const TensorImpl& node) { ai->accumulate_grad(node.grad); };
    });
}

Tensor exp(const Tensor& a) {
    Tensor out = unary_op(a, "exp", [](double x) { return std::exp(x); },
                          [](double, double y) { return y; });
    out.check_finite("exp");
    return out;
}

Tensor log(const Tensor& a) {
    for (double v : a.data()) {
        if (!(v > 0.0)) {
            throw NumericalError("log: non-positive input " + std::to_string(v));
        }
    }
    return unary_op(a, "log", [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& a) {
    return unary_op(a, "elu", [](double x) { return x > 0.0 ? x : std::expm1(x); },
                    [](double x, double) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Tensor square(const Tensor& a) {
    return unary_op(a, "square", [](double x) { return x * x; },
                    [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
    return unary_op(a, "abs", [](double x) { return std::fabs(x); },
                    [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clip(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw ContractError("clip: lo > hi");
    return unary_op(a, "clip",
                    [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                    [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

namespace {
Tensor extremum(const Tensor& a, const Tensor& b, bool take_max, const char* name) {
    require_same_shape(a, b, name);
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    const auto& y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = take_max ? std::max(x[i], y[i]) : std::min(x[i], y[i]);
    }
    auto ai = a.impl_ptr();
    auto bi = b.impl_ptr();
    return make_node(a.shape(), std::move(out), {a, b}, [&]() -> BackwardFn {
        return [ai, bi, take_max](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            auto& gb = bi->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) {
                const double xa = ai->data[i], xb = bi->data[i];
                if (xa == xb) {
                    ga[i] += 0.5 * node.grad[i];
                    gb[i] += 0.5 * node.grad[i];
                } else if ((xa > xb) == take_max) {
                    ga[i] += node.grad[i];
                } else {
                    gb[i] += node.grad[i];
                }
            }
        };
    });
}
} // namespace

Tensor max_elem(const Tensor& a, const Tensor& b) { return extremum(a, b, true, "max_elem"); }
Tensor min_elem(const Tensor& a, const Tensor& b) { return extremum(a, b, false, "min_elem"); }

Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& keep, double fill) {
    const std::size_t n = last_dim(a, "masked_fill");
    const bool row_mask = keep.size() == n;
    if (!row_mask && keep.size() != a.numel()) {
        throw ContractError("masked_fill: mask length " + std::to_string(keep.size()) +
                            " matches neither last dim nor full size of " +
                            shape_str(a.shape()));
    }
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint8_t k = row_mask ? keep[i % n] : keep[i];
        out[i] = k ? x[i] : fill;
    }
    auto ai = a.impl_ptr();
    auto mask = keep; // copy for the closure
    return make_node(a.shape(), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, mask = std::move(mask), row_mask, n](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t i = 0; i < ga.size(); ++i) {
                const std::uint8_t k = row_mask ? mask[i % n] : mask[i];
                if (k) ga[i] += node.grad[i];
            }
        };
    });
}

Tensor softmax_lastdim(const Tensor& a) {
    const std::size_t n = last_dim(a, "softmax");
    const std::size_t rows = a.numel() / n;
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * n;
        double* yr = out.data() + r * n;
        double mx = xr[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        if (!std::isfinite(mx)) throw NumericalError("softmax: non-finite input row");
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        if (!(sum > 0.0) || !std::isfinite(sum)) {
            throw NumericalError("softmax: degenerate row (all entries masked out?)");
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < n; ++j) yr[j] *= inv;
    }
    auto ai = a.impl_ptr();
    return make_node(a.shape(), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, rows, n](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = node.data.data() + r * n;
                const double* g = node.grad.data() + r * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
                double* out_g = ga.data() + r * n;
                for (std::size_t j = 0; j < n; ++j) out_g[j] += y[j] * (g[j] - dot);
            }
        };
    });
}

Tensor log_softmax_lastdim(const Tensor& a) {
    const std::size_t n = last_dim(a, "log_softmax");
    const std::size_t rows = a.numel() / n;
    std::vector<double> out(a.numel());
    const auto& x = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * n;
        double* yr = out.data() + r * n;
        double mx = xr[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
        if (!std::isfinite(mx)) throw NumericalError("log_softmax: non-finite input row");
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += std::exp(xr[j] - mx);
        if (!(sum > 0.0) || !std::isfinite(sum)) {
            throw NumericalError("log_softmax: degenerate row (all entries masked out?)");
        }
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < n; ++j) yr[j] = xr[j] - lse;
    }
    auto ai = a.impl_ptr();
    return make_node(a.shape(), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, rows, n](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = node.data.data() + r * n;
                const double* g = node.grad.data() + r * n;
                double gsum = 0.0;
                for (std::size_t j = 0; j < n; ++j) gsum += g[j];
                double* out_g = ga.data() + r * n;
                for (std::size_t j = 0; j < n; ++j) out_g[j] += g[j] - std::exp(y[j]) * gsum;
            }
        };
    });
}

Tensor gather_lastdim(const Tensor& a, const std::vector<std::size_t>& idx) {
    if (a.rank() != 2) throw ContractError("gather_lastdim: expected rank-2 input");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (idx.size() != m) {
        throw ContractError("gather_lastdim: index count " + std::to_string(idx.size()) +
                            " != rows " + std::to_string(m));
    }
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (idx[i] >= n) throw ContractError("gather_lastdim: index out of range");
        out[i] = a.data()[i * n + idx[i]];
    }
    auto ai = a.impl_ptr();
    auto indices = idx;
    return make_node({m}, std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, indices = std::move(indices), n](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t i = 0; i < indices.size(); ++i) {
                ga[i * n + indices[i]] += node.grad[i];
            }
        };
    });
}

Tensor reduce_sum_lastdim(const Tensor& a) {
    if (a.rank() != 2) throw ContractError("reduce_sum_lastdim: expected rank-2 input");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = a.data().data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += xr[j];
        out[i] = s;
    }
    auto ai = a.impl_ptr();
    return make_node({m}, std::move(out), {a}, [&]() -> BackwardFn {
        return [ai, m, n](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += node.grad[i];
        };
    });
}

Tensor reduce_sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto ai = a.impl_ptr();
    return make_node({1}, {s}, {a}, [&]() -> BackwardFn {
        return [ai](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (double& g : ga) g += node.grad[0];
        };
    });
}

Tensor reduce_mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.numel());
    double s = 0.0;
    for (double v : a.data()) s += v;
    s *= inv;
    auto ai = a.impl_ptr();
    return make_node({1}, {s}, {a}, [&]() -> BackwardFn {
        return [ai, inv](const TensorImpl& node) {
            auto& ga = ai->grad_buffer();
            for (double& g : ga) g += node.grad[0] * inv;
        };
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ContractError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                            shape_str(shape));
    }
    std::vector<double> out = a.data();
    auto ai = a.impl_ptr();
    return make_node(std::move(shape), std::move(out), {a}, [&]() -> BackwardFn {
        return [ai](const TensorImpl& node) { ai->accumulate_grad(node.grad); };
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: empty input");
    std::size_t cols = 0, rows = 0;
    for (const Tensor& t : parts) {
        const std::size_t c = t.rank() == 2 ? t.shape()[1] : 1;
        const std::size_t r = t.shape()[0];
        if (cols == 0) cols = c;
        if (c != cols) throw ContractError("concat_rows: trailing dim mismatch");
        rows += r;
    }
    std::vector<double> out;
    out.reserve(rows * cols);
    for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());

    auto impl = std::make_shared<TensorImpl>();
    impl->shape = parts[0].rank() == 2 ? Shape{rows, cols} : Shape{rows};
    impl->data = std::move(out);
    bool needs_grad = false;
    for (const Tensor& t : parts) needs_grad = needs_grad || t.requires_grad();
    Tape* tape = active_tape();
    if (tape && needs_grad) {
        impl->requires_grad = true;
        std::vector<std::shared_ptr<TensorImpl>> par;
        par.reserve(parts.size());
        for (const Tensor& t : parts) par.push_back(t.impl_ptr());
        impl->parents = par;
        impl->backward_fn = [par](const TensorImpl& node) {
            std::size_t offset = 0;
            for (const auto& p : par) {
                auto& g = p->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[offset + i];
                offset += g.size();
            }
        };
        tape->record(impl);
    }
    return Tensor(std::move(impl));
}

Tensor batched_vecmat(const Tensor& x, const Tensor& w, std::size_t m) {
    if (x.rank() != 2 || w.rank() != 2) {
        throw ContractError("batched_vecmat: expected rank-2 inputs");
    }
    const std::size_t batch = x.shape()[0], n = x.shape()[1];
    if (w.shape()[0] != batch || w.shape()[1] != n * m) {
        throw ContractError("batched_vecmat: w must be [B, n*m], got " + shape_str(w.shape()));
    }
    std::vector<double> out(batch * m, 0.0);
    const auto& xd = x.data();
    const auto& wd = w.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xr = xd.data() + b * n;
        const double* wr = wd.data() + b * n * m;
        double* yr = out.data() + b * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double xv = xr[i];
            for (std::size_t j = 0; j < m; ++j) yr[j] += xv * wr[i * m + j];
        }
    }
    auto xi = x.impl_ptr();
    auto wi = w.impl_ptr();
    return make_node({batch, m}, std::move(out), {x, w}, [&]() -> BackwardFn {
        return [xi, wi, batch, n, m](const TensorImpl& node) {
            auto& gx = xi->grad_buffer();
            auto& gw = wi->grad_buffer();
            for (std::size_t b = 0; b < batch; ++b) {
                const double* g = node.grad.data() + b * m;
                const double* xr = xi->data.data() + b * n;
                const double* wr = wi->data.data() + b * n * m;
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        acc += g[j] * wr[i * m + j];
                        gw[b * n * m + i * m + j] += xr[i] * g[j];
                    }
                    gx[b * n + i] += acc;
                }
            }
        };
    });
}

} // namespace uasrl::grad
