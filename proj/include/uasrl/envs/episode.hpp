#pragma once

#include <string>
#include <vector>

#include "uasrl/envs/env.hpp"

namespace uasrl::envs {

/// Time-major storage of one complete episode. Observations, states and
/// availability carry length+1 slices (the post-step values are needed for
/// bootstrapped targets); actions/rewards/termination flags carry `length`.
struct EpisodeBatch {
    std::size_t n_agents = 0;
    std::size_t obs_dim = 0;
    std::size_t state_dim = 0;
    std::size_t uas_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t length = 0;
    bool won = false;

    std::vector<double> obs;             // [length+1][n_agents][obs_dim]
    std::vector<double> states;          // [length+1][state_dim]
    std::vector<std::uint8_t> avail;     // [length+1][n_agents][uas_dim]
    std::vector<std::size_t> actions;    // [length][n_agents]
    std::vector<double> rewards;         // [length]
    std::vector<std::uint8_t> terminated;// [length], exactly one trailing 1
    std::vector<double> hidden;          // [length][n_agents][hidden_dim]

    const double* obs_at(std::size_t t, std::size_t agent) const {
        return obs.data() + (t * n_agents + agent) * obs_dim;
    }
    const double* state_at(std::size_t t) const { return states.data() + t * state_dim; }
    const std::uint8_t* avail_at(std::size_t t, std::size_t agent) const {
        return avail.data() + (t * n_agents + agent) * uas_dim;
    }
    std::size_t action_at(std::size_t t, std::size_t agent) const {
        return actions[t * n_agents + agent];
    }

    double total_reward() const;
    void validate() const;

    /// One JSON object per time-step (debug replay format).
    void export_jsonl(const std::string& path) const;
};

} // namespace uasrl::envs
