#include "uasrl/algos/losses.hpp"

#include <cmath>

#include "uasrl/act/action_space.hpp"

namespace uasrl::algos {

using grad::Tensor;

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      double gamma, double gae_lambda) {
    if (values.size() != rewards.size() + 1) {
        throw ContractError("compute_gae: values must hold T+1 entries (bootstrap included)");
    }
    const std::size_t T = rewards.size();
    GaeResult out;
    out.advantages.assign(T, 0.0);
    out.returns.assign(T, 0.0);
    double next_adv = 0.0;
    for (std::size_t i = T; i-- > 0;) {
        const double delta = rewards[i] + gamma * values[i + 1] - values[i];
        next_adv = delta + gamma * gae_lambda * next_adv;
        out.advantages[i] = next_adv;
        out.returns[i] = next_adv + values[i];
    }
    return out;
}

std::vector<double> standardize(const std::vector<double>& x) {
    if (x.empty()) return x;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double sd = std::sqrt(var);
    if (sd < 1e-8) return x; // degenerate batch: keep the raw signal
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / (sd + 1e-8);
    return out;
}

MaskedPolicyRows masked_policy_rows(const Tensor& logits, const std::vector<std::uint8_t>& keep) {
    using namespace grad;
    Tensor masked = masked_fill(logits, keep, act::kMaskSentinel);
    MaskedPolicyRows out;
    out.probs = softmax_lastdim(masked);
    out.logp = log_softmax_lastdim(masked);
    // p=0 entries pair with finite sentinel log-probs, so p*logp stays 0.
    out.entropy = scalar_mul(reduce_sum_lastdim(mul(out.probs, out.logp)), -1.0);
    return out;
}

Tensor ppo_actor_loss(const Tensor& new_logp, const Tensor& old_logp_detached,
                      const Tensor& advantages_detached, const Tensor& entropy_per_sample,
                      double eps_p, double lambda_e) {
    using namespace grad;
    if (new_logp.shape() != old_logp_detached.shape() ||
        new_logp.shape() != advantages_detached.shape()) {
        throw ContractError("ppo_actor_loss: sample vectors must share one shape");
    }
    for (double v : old_logp_detached.data()) {
        if (!std::isfinite(v)) {
            throw ContractError("ppo_actor_loss: non-finite old log-probability "
                                "(taken action had zero probability?)");
        }
    }
    Tensor ratio = grad::exp(sub(new_logp, old_logp_detached));
    ratio.check_finite("ppo_actor_loss ratio");
    Tensor surr1 = mul(ratio, advantages_detached);
    Tensor surr2 = mul(clip(ratio, 1.0 - eps_p, 1.0 + eps_p), advantages_detached);
    Tensor objective = reduce_mean(min_elem(surr1, surr2));
    Tensor entropy = reduce_mean(entropy_per_sample);
    return sub(scalar_mul(objective, -1.0), scalar_mul(entropy, lambda_e));
}

Tensor value_loss(const Tensor& v_new, const Tensor& v_old_detached,
                  const Tensor& returns_detached, double eps_v) {
    using namespace grad;
    if (v_new.shape() != v_old_detached.shape() || v_new.shape() != returns_detached.shape()) {
        throw ContractError("value_loss: sample vectors must share one shape");
    }
    Tensor err = square(sub(v_new, returns_detached));
    Tensor clipped = add(v_old_detached, clip(sub(v_new, v_old_detached), -eps_v, eps_v));
    Tensor err_clipped = square(sub(clipped, returns_detached));
    return reduce_mean(max_elem(err, err_clipped));
}

namespace {

Tensor cgi_mse(const Tensor& pred, const Tensor& target_detached,
               const std::vector<std::uint8_t>& inverse_mask, const char* name) {
    using namespace grad;
    if (pred.shape() != target_detached.shape()) {
        throw ContractError(std::string(name) + ": prediction/target shape mismatch");
    }
    if (pred.rank() != 2 || pred.shape()[1] != inverse_mask.size()) {
        throw ContractError(std::string(name) + ": mask length must equal the UAS dimension");
    }
    std::size_t avail = 0;
    for (auto b : inverse_mask) avail += b ? 1 : 0;
    if (avail == 0) throw ContractError(std::string(name) + ": empty inverse mask");
    Tensor diff = sub(masked_fill(pred, inverse_mask, 0.0),
                      masked_fill(target_detached, inverse_mask, 0.0));
    Tensor total = reduce_sum(square(diff));
    const double count = static_cast<double>(pred.shape()[0] * avail);
    return scalar_mul(total, 1.0 / count);
}

} // namespace

Tensor cgi_policy_loss(const Tensor& rho_inv, const Tensor& rho_target_detached,
                       const std::vector<std::uint8_t>& inverse_mask) {
    return cgi_mse(rho_inv, rho_target_detached, inverse_mask, "cgi_policy_loss");
}

Tensor cgi_value_loss(const Tensor& q_inv, const Tensor& q_target_detached,
                      const std::vector<std::uint8_t>& inverse_mask) {
    return cgi_mse(q_inv, q_target_detached, inverse_mask, "cgi_value_loss");
}

Tensor umappo_total_loss(const Tensor& actor_loss, const Tensor& value_loss_term,
                         const Tensor& cgi_loss, double lambda_v, double lambda_i) {
    using namespace grad;
    return add(actor_loss,
               add(scalar_mul(value_loss_term, lambda_v), scalar_mul(cgi_loss, lambda_i)));
}

std::vector<double> td_targets(const std::vector<double>& rewards,
                               const std::vector<std::uint8_t>& terminated,
                               const std::vector<double>& max_qtot_next, double gamma) {
    if (rewards.size() != terminated.size() || rewards.size() != max_qtot_next.size()) {
        throw ContractError("td_targets: input lengths differ");
    }
    std::vector<double> y(rewards.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = rewards[i] + (terminated[i] ? 0.0 : gamma * max_qtot_next[i]);
    }
    return y;
}

Tensor td_loss(const Tensor& q_tot, const std::vector<double>& targets,
               const std::vector<std::uint8_t>& valid) {
    using namespace grad;
    if (q_tot.numel() != targets.size() || q_tot.numel() != valid.size()) {
        throw ContractError("td_loss: lengths differ");
    }
    std::size_t n_valid = 0;
    for (auto b : valid) n_valid += b ? 1 : 0;
    if (n_valid == 0) throw ContractError("td_loss: no valid steps");
    Tensor q_flat = q_tot.rank() == 1 ? q_tot : reshape(q_tot, {q_tot.numel()});
    Tensor y = Tensor::from_vector({targets.size()}, targets);
    const std::size_t n_entries = valid.size();
    std::vector<double> w(n_entries);
    for (std::size_t i = 0; i < n_entries; ++i) w[i] = valid[i] ? 1.0 : 0.0;
    Tensor weights = Tensor::from_vector({n_entries}, std::move(w));
    Tensor sq = mul(square(sub(q_flat, y)), weights);
    return scalar_mul(reduce_sum(sq), 1.0 / static_cast<double>(n_valid));
}

Tensor uqmix_total_loss(const Tensor& td, const Tensor& cgi, double lambda_i) {
    using namespace grad;
    return add(td, scalar_mul(cgi, lambda_i));
}

double epsilon_schedule(std::uint64_t t, double start, double end, std::uint64_t anneal_steps) {
    if (anneal_steps == 0 || t >= anneal_steps) return end;
    const double slope = (start - end) / static_cast<double>(anneal_steps);
    return std::max(end, start - static_cast<double>(t) * slope);
}

} // namespace uasrl::algos
