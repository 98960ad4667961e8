#pragma once

#include "uasrl/envs/env.hpp"
#include "uasrl/grad/random.hpp"

namespace uasrl::envs {

/// Asymmetric grid combat: learned attackers + healers versus scripted
/// attackers. Moves resolve before attacks/heals; everything within a step
/// is simultaneous. Reward = damage dealt + 10 per kill + 200 on a win.
struct SkirmishConfig {
    std::size_t width = 12;
    std::size_t height = 12;
    std::size_t n_attackers = 3;
    std::size_t n_healers = 1;
    std::size_t n_enemies = 4;
    int attacker_hp = 45;
    int attacker_damage = 6;
    std::size_t attack_range = 2; // Chebyshev
    int healer_hp = 30;
    int heal_amount = 5;
    std::size_t heal_range = 2;
    std::size_t sight_range = 4;
    std::size_t episode_limit = 200;
    act::Layout layout = act::Layout::Unified;
    bool append_agent_id = false;

    std::size_t n_allies() const { return n_attackers + n_healers; }
    void validate() const;
};

class Skirmish final : public Env {
public:
    explicit Skirmish(SkirmishConfig config);

    const EnvInfo& info() const override { return info_; }
    ResetResult reset(std::uint64_t seed) override;
    StepResult step(const std::vector<std::size_t>& actions) override;
    std::vector<double> state() const override;

    const SkirmishConfig& config() const { return config_; }

    struct Unit {
        int x = 0;
        int y = 0;
        int hp = 0;
        int max_hp = 0;
        bool healer = false;
        bool alive() const { return hp > 0; }
    };

    const std::vector<Unit>& allies() const { return allies_; }
    const std::vector<Unit>& enemies() const { return enemies_; }
    std::size_t step_count() const { return t_; }

    /// Test hook: pin a unit's hit points (clamped to [0, max]).
    void force_hp(bool enemy_side, std::size_t index, int hp);

    /// Total reward available in one episode (for conservation checks).
    double max_episode_reward() const;

private:
    std::vector<double> observation(std::size_t agent) const;
    std::vector<act::AvailableActionMask> availability() const;
    bool occupied(int x, int y) const;
    static std::size_t chebyshev(const Unit& a, const Unit& b);

    SkirmishConfig config_;
    EnvInfo info_;
    std::vector<Unit> allies_;
    std::vector<Unit> enemies_;
    std::size_t t_ = 0;
    bool done_ = true;
    std::vector<act::AvailableActionMask> current_avail_;
};

} // namespace uasrl::envs
