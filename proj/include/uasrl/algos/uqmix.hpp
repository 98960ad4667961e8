#pragma once

#include <json.hpp>

#include "uasrl/algos/hyper.hpp"
#include "uasrl/algos/losses.hpp"
#include "uasrl/algos/replay.hpp"
#include "uasrl/algos/runtime.hpp"

namespace uasrl::algos {

struct UQmixSettings {
    UQmixHyper hyper;
    AblationFlags flags;
    std::uint64_t seed = 1;
    std::uint64_t eval_interval = 10'000;
    std::size_t eval_episodes = 32;
};

/// Episodic Q-learning with monotonic value factorization: epsilon-greedy
/// collection into a replay buffer, batched TD updates against a frozen
/// target network, optional cross-group value prediction loss.
class UQmixTrainer {
public:
    UQmixTrainer(EnvFactory factory, UQmixSettings settings);

    void run(const MetricsSink& sink);

    /// One collected episode (+ one update once the buffer holds a batch).
    MetricsRecord train_iteration();

    EvalResult evaluate(std::size_t episodes, PolicyMode mode = PolicyMode::Greedy);

    const grad::ParameterSet& parameters() const { return params_; }
    const nets::TrunkConfig& trunk_config() const { return trunk_cfg_; }
    const nets::TargetParameters& target() const { return target_; }
    nlohmann::json architecture() const;

    std::uint64_t steps() const { return t_total_; }
    std::uint64_t episode_count() const { return episode_count_; }
    std::uint64_t update_count() const { return update_count_; }
    std::uint64_t illegal_action_count() const { return illegal_actions_; }
    std::uint64_t cgi_evaluations() const { return cgi_evaluations_; }
    bool cgi_active() const { return cgi_active_; }
    double current_lr() const;
    double current_epsilon() const;
    const grad::Tape& last_update_tape() const { return tape_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const envs::EpisodeBatch& last_episode() const { return last_episode_; }
    const envs::EnvInfo& env_info() const { return env_->info(); }

private:
    envs::EpisodeBatch collect_episode();
    MetricsRecord update_from_buffer();

    UQmixSettings settings_;
    std::unique_ptr<envs::Env> env_;
    std::unique_ptr<envs::Env> eval_env_;
    nets::TrunkConfig trunk_cfg_;
    nets::MixerConfig mixer_cfg_;
    nets::PredictorConfig predictor_cfg_;
    grad::ParameterSet params_;
    nets::TargetParameters target_;
    std::unique_ptr<grad::Adam> adam_;
    grad::Tape tape_;
    ReplayBuffer buffer_;

    grad::Rng env_seed_rng_;
    grad::Rng policy_rng_;
    grad::Rng sample_rng_;
    std::uint64_t eval_seed_base_ = 0;
    std::uint64_t eval_round_ = 0;

    bool cgi_active_ = false;
    std::uint64_t t_total_ = 0;
    std::uint64_t episode_count_ = 0;
    std::uint64_t update_count_ = 0;
    std::uint64_t illegal_actions_ = 0;
    std::uint64_t cgi_evaluations_ = 0;
    envs::EpisodeBatch last_episode_;
};

} // namespace uasrl::algos
