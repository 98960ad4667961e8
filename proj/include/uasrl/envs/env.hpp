#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "uasrl/act/action_space.hpp"

namespace uasrl::envs {

struct EnvInfo {
    std::size_t n_agents = 0;
    std::size_t obs_dim = 0;
    std::size_t state_dim = 0;
    std::size_t episode_limit = 200;
    act::UnifiedActionSpace uas;
    std::vector<act::GroupSpec> groups;
    std::vector<act::AvailableActionMask> group_masks;
    std::vector<std::size_t> agent_group; // agent index -> index into `groups`
};

struct ResetResult {
    std::vector<std::vector<double>> obs;            // per agent
    std::vector<act::AvailableActionMask> avail;     // per agent, dynamic
};

struct StepResult {
    double reward = 0.0;
    bool terminated = false;
    bool won = false;
    std::vector<std::vector<double>> obs;
    std::vector<act::AvailableActionMask> avail;
};

/// Dec-POMDP episode interface. Instances are single-threaded; run one per
/// worker for parallel seeds.
class Env {
public:
    virtual ~Env() = default;
    virtual const EnvInfo& info() const = 0;
    virtual ResetResult reset(std::uint64_t seed) = 0;
    virtual StepResult step(const std::vector<std::size_t>& actions) = 0;
    virtual std::vector<double> state() const = 0;
};

} // namespace uasrl::envs
