#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "uasrl/algos/hyper.hpp"
#include "uasrl/algos/runtime.hpp"
#include "uasrl/envs/proposition.hpp"
#include "uasrl/envs/skirmish.hpp"

namespace uasrl::harness {

enum class AlgoFamily : std::uint8_t { Mappo, Qmix };

struct AlgoVariant {
    std::string name; // e.g. "u-qmix", "qmix+uas"
    AlgoFamily family = AlgoFamily::Qmix;
    algos::AblationFlags flags;
};

/// Maps the ablation naming scheme to flag pairs:
/// base -> (false,false), +uas -> (true,false), +cgi -> (false,true),
/// u-* -> (true,true).
AlgoVariant parse_algorithm(const std::string& name);

struct ExperimentConfig {
    // [env]
    std::string env_name = "proposition";
    std::size_t prop_agents_per_group = 2;
    std::size_t prop_a0 = 4;
    std::size_t prop_a1 = 6;
    std::string obs_mode = "id";
    envs::SkirmishConfig skirmish; // layout/append flags filled per variant

    // [algo]
    std::vector<std::string> algorithms; // single entry or an ablation matrix
    algos::UMappoHyper umappo;
    algos::UQmixHyper uqmix;

    // [train]
    std::uint64_t total_steps = 50'000;
    std::vector<std::uint64_t> seeds = {1};
    std::uint64_t eval_interval = 10'000;
    std::size_t eval_episodes = 32;
    std::string out_dir = "runs/out";
    std::uint64_t checkpoint_interval = 0; // 0 = final checkpoint only
    bool export_replays = false;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);

    /// Throws ConfigError listing every violation.
    void validate() const;

    /// Canonical semantic form (key order fixed); equal configs hash equal.
    nlohmann::json canonical() const;
    std::string hash() const;

    algos::EnvFactory env_factory(const algos::AblationFlags& flags) const;
};

} // namespace uasrl::harness
