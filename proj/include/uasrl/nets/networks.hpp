#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uasrl/grad/adam.hpp"
#include "uasrl/grad/ops.hpp"
#include "uasrl/grad/random.hpp"

namespace uasrl::nets {

/// Orthogonal weight init (modified Gram-Schmidt on a Gaussian draw).
void orthogonal_init(grad::Tensor& w, double gain, grad::Rng& rng);

// Shared recurrent trunk: embedding of (observation, last-action one-hot),
// a GRU cell, and a two-layer head emitting one value per UAS action.
// The same parameters serve every agent; only inputs differ.
struct TrunkConfig {
    std::size_t obs_dim = 0;
    std::size_t uas_dim = 0;
    std::size_t hidden = 64;
};

grad::ParameterSet make_trunk(const TrunkConfig& cfg, grad::Rng& rng,
                              const std::string& prefix = "trunk");

struct TrunkStep {
    grad::Tensor output; // [B, uas_dim] (logits in actor mode, Q values in Q mode)
    grad::Tensor h_next; // [B, hidden]
};

TrunkStep trunk_forward(const grad::ParameterSet& params, const TrunkConfig& cfg,
                        const grad::Tensor& obs, const grad::Tensor& last_action_onehot,
                        const grad::Tensor& h_prev, const std::string& prefix = "trunk");

struct TrunkUnroll {
    std::vector<grad::Tensor> outputs; // per step, [B, uas_dim]
    std::vector<grad::Tensor> hiddens; // per step, h after that step, [B, hidden]
};

TrunkUnroll trunk_unroll(const grad::ParameterSet& params, const TrunkConfig& cfg,
                         const std::vector<grad::Tensor>& obs_seq,
                         const std::vector<grad::Tensor>& last_action_seq,
                         const grad::Tensor& h0, const std::string& prefix = "trunk");

// Predictor branch: GRU hidden state -> UAS-sized prediction.
struct PredictorConfig {
    std::size_t hidden = 64;
    std::size_t uas_dim = 0;
};

grad::ParameterSet make_predictor(const PredictorConfig& cfg, grad::Rng& rng,
                                  const std::string& prefix = "psi");

grad::Tensor predictor_forward(const grad::ParameterSet& params, const PredictorConfig& cfg,
                               const grad::Tensor& h, const std::string& prefix = "psi");

// Centralized critic: state -> scalar V(s). Consumes the state only.
struct CriticConfig {
    std::size_t state_dim = 0;
    std::size_t hidden = 64;
};

grad::ParameterSet make_critic(const CriticConfig& cfg, grad::Rng& rng,
                               const std::string& prefix = "critic");

grad::Tensor critic_forward(const grad::ParameterSet& params, const CriticConfig& cfg,
                            const grad::Tensor& state, const std::string& prefix = "critic");

// Monotonic mixing network. Hypernetworks map the state to absolute-value
// weights, so dQ_tot/dQ_i >= 0 for every parameter setting.
struct MixerConfig {
    std::size_t n_agents = 0;
    std::size_t state_dim = 0;
    std::size_t embed = 32;
    std::size_t hyper_hidden = 64;
};

grad::ParameterSet make_mixer(const MixerConfig& cfg, grad::Rng& rng,
                              const std::string& prefix = "mixer");

grad::Tensor mixer_forward(const grad::ParameterSet& params, const MixerConfig& cfg,
                           const grad::Tensor& chosen_q, const grad::Tensor& state,
                           const std::string& prefix = "mixer");

/// Frozen copy of a parameter set, refreshed only by explicit hard sync.
struct TargetParameters {
    grad::ParameterSet params;
    std::uint64_t iterations_since_sync = 0;
    std::uint64_t sync_count = 0;
};

TargetParameters make_target(const grad::ParameterSet& source);

/// Hard copy source -> target; names and shapes must match bit-exactly.
void sync_target(const grad::ParameterSet& source, TargetParameters& target);

} // namespace uasrl::nets
