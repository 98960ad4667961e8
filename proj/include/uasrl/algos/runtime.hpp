#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>

#include "uasrl/envs/env.hpp"
#include "uasrl/grad/adam.hpp"
#include "uasrl/nets/networks.hpp"

namespace uasrl::algos {

/// One record per training iteration. NaN marks fields the algorithm does
/// not produce (entropy for Q-learning, epsilon for PPO, ...).
struct MetricsRecord {
    std::uint64_t step = 0;
    std::uint64_t episode = 0;
    double loss_total = NAN;
    double loss_actor = NAN;
    double loss_td = NAN;
    double loss_value = NAN;
    double loss_cgi = NAN;
    double entropy = NAN;
    double epsilon = NAN;
    bool has_eval = false;
    double eval_wr = NAN;
    double eval_return = NAN;
    double eval_length = NAN;
    std::uint64_t seed = 0;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

using EnvFactory = std::function<std::unique_ptr<envs::Env>()>;

struct EvalResult {
    double wr = 0.0;
    double mean_return = 0.0;
    double mean_length = 0.0;
    std::size_t episodes = 0;
};

enum class PolicyMode : std::uint8_t { Greedy, Sample };

/// Runs `episodes` evaluation episodes with the shared trunk. Greedy mode
/// takes the masked argmax (identical rule for logits and Q values); sample
/// mode draws from the masked softmax. No exploration state is consumed and
/// parameters are never mutated.
EvalResult evaluate_policy(envs::Env& env, const grad::ParameterSet& params,
                           const nets::TrunkConfig& trunk_cfg, std::uint64_t seed_base,
                           std::size_t episodes, PolicyMode mode,
                           const std::string& prefix = "trunk");

/// Deterministic per-episode seed derivation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

grad::Tensor rows_tensor(const std::vector<const double*>& rows, std::size_t dim);
grad::Tensor onehot_rows(const std::vector<std::size_t>& ids, std::size_t dim);

} // namespace uasrl::algos
