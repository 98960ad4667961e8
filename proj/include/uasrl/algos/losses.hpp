#pragma once

#include <cstdint>
#include <vector>

#include "uasrl/grad/ops.hpp"

namespace uasrl::algos {

struct GaeResult {
    std::vector<double> advantages; // [T]
    std::vector<double> returns;    // [T], A_t + v_t
};

/// delta_t = r_t + gamma*v_{t+1} - v_t; A_t = delta_t + gamma*lambda*A_{t+1}.
/// `values` carries T+1 entries including the bootstrap (0 when terminal).
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      double gamma, double gae_lambda);

/// (x - mean) / (std + 1e-8). Degenerate batches (std below 1e-8, e.g. a
/// single-step episode with one shared advantage) pass through unchanged so
/// the signal is not zeroed out.
std::vector<double> standardize(const std::vector<double>& x);

/// Row-wise masked policy head built from raw UAS logits: sentinel fill,
/// softmax + log-softmax, per-row entropy over available actions.
struct MaskedPolicyRows {
    grad::Tensor probs;   // [M, uas]
    grad::Tensor logp;    // [M, uas]
    grad::Tensor entropy; // [M]
};

MaskedPolicyRows masked_policy_rows(const grad::Tensor& logits,
                                    const std::vector<std::uint8_t>& keep);

/// Clipped-ratio surrogate with entropy bonus; minimized form:
/// -E[min(ratio*A, clip(ratio, 1-eps, 1+eps)*A)] - lambda_e*E[entropy].
grad::Tensor ppo_actor_loss(const grad::Tensor& new_logp, const grad::Tensor& old_logp_detached,
                            const grad::Tensor& advantages_detached,
                            const grad::Tensor& entropy_per_sample, double eps_p, double lambda_e);

/// E[max((v - R)^2, (v_old + clip(v - v_old, -eps_v, eps_v) - R)^2)].
grad::Tensor value_loss(const grad::Tensor& v_new, const grad::Tensor& v_old_detached,
                        const grad::Tensor& returns_detached, double eps_v);

/// MSE between a masked cross-group prediction and the detached actual
/// quantity, averaged over rows x available indices of the inverse mask.
/// Both inputs are zeroed outside the mask before comparison.
grad::Tensor cgi_policy_loss(const grad::Tensor& rho_inv, const grad::Tensor& rho_target_detached,
                             const std::vector<std::uint8_t>& inverse_mask);
grad::Tensor cgi_value_loss(const grad::Tensor& q_inv, const grad::Tensor& q_target_detached,
                            const std::vector<std::uint8_t>& inverse_mask);

/// L = actor + lambda_v * value + lambda_i * cgi.
grad::Tensor umappo_total_loss(const grad::Tensor& actor_loss, const grad::Tensor& value_loss,
                               const grad::Tensor& cgi_loss, double lambda_v, double lambda_i);

/// y_t = r_t + gamma * (1 - terminated_t) * max_qtot_next_t.
std::vector<double> td_targets(const std::vector<double>& rewards,
                               const std::vector<std::uint8_t>& terminated,
                               const std::vector<double>& max_qtot_next, double gamma);

/// Mean squared TD error over valid (non-padding) entries only.
grad::Tensor td_loss(const grad::Tensor& q_tot, const std::vector<double>& targets,
                     const std::vector<std::uint8_t>& valid);

/// L = td + lambda_i * cgi.
grad::Tensor uqmix_total_loss(const grad::Tensor& td, const grad::Tensor& cgi, double lambda_i);

/// Linear decay from `start` to `end` over `anneal_steps` steps.
double epsilon_schedule(std::uint64_t t, double start = 1.0, double end = 0.05,
                        std::uint64_t anneal_steps = 50'000);

} // namespace uasrl::algos
