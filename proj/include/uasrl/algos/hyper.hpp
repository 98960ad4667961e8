#pragma once

#include <cstdint>

#include "uasrl/errors.hpp"

namespace uasrl::algos {

struct UMappoHyper {
    double lr = 5e-4;
    std::uint64_t total_steps = 10'000'000;
    double eps_p = 0.2;
    double eps_v = 0.2;
    double lambda_e = 0.01;
    double lambda_v = 1.0;
    double lambda_i = 0.8;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    std::size_t ppo_updates = 5;
    double grad_clip = 10.0;

    void validate() const {
        if (!(eps_p > 0.0) || !(eps_v > 0.0)) throw ConfigError("u-mappo: eps_p/eps_v must be > 0");
        if (lambda_e < 0.0 || lambda_v < 0.0 || lambda_i < 0.0) {
            throw ConfigError("u-mappo: loss coefficients must be >= 0");
        }
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("u-mappo: gamma must lie in [0,1)");
        if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
            throw ConfigError("u-mappo: gae_lambda must lie in [0,1]");
        }
        if (ppo_updates == 0) throw ConfigError("u-mappo: ppo_updates must be >= 1");
        if (!(lr > 0.0)) throw ConfigError("u-mappo: lr must be > 0");
    }
};

struct UQmixHyper {
    double lr = 3e-4;
    std::uint64_t total_steps = 5'000'000;
    double lambda_i = 0.06;
    double gamma = 0.99;
    std::size_t buffer_size = 5000;
    std::size_t batch_size = 32;
    double eps_start = 1.0;
    double eps_end = 0.05;
    std::uint64_t eps_anneal_steps = 50'000;
    double lr_decay_factor = 0.5;
    std::uint64_t lr_decay_episodes = 50'000;
    std::uint64_t target_sync_interval = 200;
    double grad_clip = 10.0;

    void validate() const {
        if (buffer_size < batch_size) throw ConfigError("u-qmix: buffer_size must be >= batch_size");
        if (batch_size == 0) throw ConfigError("u-qmix: batch_size must be >= 1");
        if (eps_end > eps_start) throw ConfigError("u-qmix: eps_end must be <= eps_start");
        if (lambda_i < 0.0) throw ConfigError("u-qmix: lambda_i must be >= 0");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("u-qmix: gamma must lie in [0,1)");
        if (!(lr > 0.0)) throw ConfigError("u-qmix: lr must be > 0");
        if (target_sync_interval == 0) throw ConfigError("u-qmix: target_sync_interval must be >= 1");
    }
};

/// (false,false) is the vanilla baseline; (true,true) the full method.
/// use_uas selects the unified layout, use_cgi enables the predictor loss.
struct AblationFlags {
    bool use_uas = true;
    bool use_cgi = true;
};

} // namespace uasrl::algos
