#pragma once

#include <cstdint>
#include <vector>

#include "uasrl/grad/tensor.hpp"

namespace uasrl::grad {

// Elementwise / structural forward ops, all differentiable where stated.
// Shapes must conform exactly; `add` additionally accepts [m,n] + [n]
// (row broadcast, the bias case). Every op records itself on the active
// tape when any input requires grad.

Tensor matmul(const Tensor& a, const Tensor& b); // [m,k] x [k,n] -> [m,n]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scalar_mul(const Tensor& a, double c);
Tensor scalar_add(const Tensor& a, double c);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a); // throws NumericalError on non-positive input
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a); // alpha = 1
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);

/// clamp to [lo, hi]; gradient 1 inside the closed interval, 0 outside.
Tensor clip(const Tensor& a, double lo, double hi);

Tensor max_elem(const Tensor& a, const Tensor& b); // ties split gradient 0.5/0.5
Tensor min_elem(const Tensor& a, const Tensor& b);

/// keep[i]==1 passes a through, keep[i]==0 replaces with `fill` (no gradient
/// there). keep is either one row (length = last dim) or the full size.
Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& keep, double fill);

Tensor softmax_lastdim(const Tensor& a);
Tensor log_softmax_lastdim(const Tensor& a);

/// [m,n] with idx[m] -> [m]; out[i] = a[i, idx[i]].
Tensor gather_lastdim(const Tensor& a, const std::vector<std::size_t>& idx);

Tensor reduce_sum_lastdim(const Tensor& a); // [m,n] -> [m]
Tensor reduce_sum(const Tensor& a);         // -> [1]
Tensor reduce_mean(const Tensor& a);        // -> [1]

Tensor reshape(const Tensor& a, Shape shape);

/// Stacks tensors with equal trailing dimension along rows.
Tensor concat_rows(const std::vector<Tensor>& parts);

/// Per-row vector-matrix product: x [B,n], w [B,n*m] -> [B,m],
/// out[b,j] = sum_i x[b,i] * w[b, i*m + j]. Used by the mixing network.
Tensor batched_vecmat(const Tensor& x, const Tensor& w, std::size_t m);

} // namespace uasrl::grad
