#pragma once

#include <optional>
#include <string>

#include "uasrl/envs/env.hpp"

namespace uasrl::envs {

enum class ObsMode : std::uint8_t { Blind, Id, IdGroup };

ObsMode obs_mode_from_string(const std::string& s);
std::string to_string(ObsMode mode);

/// One-shot coordination game with two groups of N agents. Group 0 owns a
/// target block of size a0, group 1 a block of size a1 (a1 >= a0 >= N).
/// The joint reward is 1 exactly when every agent picks the block action
/// matching its within-group id, else 0. The episode ends after one step.
struct PropositionConfig {
    std::size_t agents_per_group = 2; // N
    std::size_t a0 = 4;
    std::size_t a1 = 6;
    ObsMode obs_mode = ObsMode::Id;
    act::Layout layout = act::Layout::Unified;

    void validate() const;
};

class PropositionGame final : public Env {
public:
    explicit PropositionGame(PropositionConfig config);

    const EnvInfo& info() const override { return info_; }
    ResetResult reset(std::uint64_t seed) override;
    StepResult step(const std::vector<std::size_t>& actions) override;
    std::vector<double> state() const override;

    /// Index the agent must play for reward (depends on group and id).
    std::size_t required_action(std::size_t agent) const;

    const PropositionConfig& config() const { return config_; }

private:
    std::vector<double> observation(std::size_t agent) const;
    std::vector<act::AvailableActionMask> availability() const;

    PropositionConfig config_;
    EnvInfo info_;
    bool awaiting_step_ = false;
};

/// Eq-form optimum of the shared unconditioned policy: (rho_r / N)^(2N).
double analytic_shared_optimum(std::size_t n_agents_per_group, double rho_r);

struct BruteForceResult {
    double max_reward = 0.0;
    std::vector<double> argmax;   // distribution over the union action set
    double analytic = 0.0;        // (1/N)^(2N)
    double gap = 0.0;             // |max_reward - analytic|
    std::size_t evaluated = 0;    // grid points visited
};

/// Exhaustive simplex-grid search of J = prod_{i<N} rho_i^2 over shared
/// unconditioned distributions on the union action set (size a1).
BruteForceResult brute_force_shared_optimum(std::size_t n_agents_per_group, std::size_t a0,
                                            std::size_t a1, std::size_t grid_resolution);

struct DeterministicOptimumResult {
    bool attainable = false;
    double value = 0.0;        // expected reward of the constructed policy
    double shared_bound = 0.0; // (1/N)^(2N), reported when unattainable
    std::string note;
};

/// Builds the deterministic per-id policy through the group masks and
/// evaluates it analytically. Requires id-conditioned observations; in
/// blind mode the optimum is unreachable and the result explains why.
DeterministicOptimumResult uas_deterministic_optimum(const PropositionConfig& config);

} // namespace uasrl::envs
