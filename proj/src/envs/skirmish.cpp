#include "uasrl/envs/skirmish.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uasrl::envs {

namespace {
constexpr int kMoveDx[4] = {0, 0, -1, 1};  // up, down, left, right (x = column)
constexpr int kMoveDy[4] = {-1, 1, 0, 0};
} // namespace

void SkirmishConfig::validate() const {
    if (width < 4 || height < 4) throw ConfigError("skirmish: grid must be at least 4x4");
    if (n_attackers + n_healers == 0) throw ConfigError("skirmish: no ally units");
    if (n_enemies == 0) throw ConfigError("skirmish: no enemy units");
    if (n_allies() + n_enemies > width * height) {
        throw ConfigError("skirmish: more units than grid cells");
    }
    const std::size_t zone = (height - 2) * 2;
    if (n_allies() > zone || n_enemies > zone) {
        throw ConfigError("skirmish: spawn zones cannot hold the requested unit counts");
    }
}

Skirmish::Skirmish(SkirmishConfig config) : config_(config) {
    config_.validate();
    const std::size_t n = config_.n_allies();

    std::vector<act::GroupSpec> groups;
    act::GroupSpec attackers;
    attackers.group_id = 0;
    attackers.capabilities = {.self_act = true, .ally_act = false, .enemy_act = true};
    for (std::size_t i = 0; i < config_.n_attackers; ++i) {
        attackers.agent_ids.push_back(static_cast<int>(i));
    }
    if (config_.n_attackers > 0) groups.push_back(attackers);
    if (config_.n_healers > 0) {
        act::GroupSpec healers;
        healers.group_id = 1;
        healers.capabilities = {.self_act = true, .ally_act = true, .enemy_act = false};
        for (std::size_t i = 0; i < config_.n_healers; ++i) {
            healers.agent_ids.push_back(static_cast<int>(config_.n_attackers + i));
        }
        groups.push_back(healers);
    }

    auto built = act::build_uas(groups, config_.n_healers > 0 ? n : 0, config_.n_enemies,
                                config_.layout);
    info_.n_agents = n;
    info_.episode_limit = config_.episode_limit;
    info_.uas = built.uas;
    info_.groups = groups;
    info_.group_masks = built.group_masks;
    info_.agent_group.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        info_.agent_group[a] = (a < config_.n_attackers) ? 0 : (groups.size() - 1);
    }
    // Unit type is deliberately absent from observations: groups are told
    // apart structurally (via masks) or through the optional id one-hot.
    info_.obs_dim = 3 + 4 * n + 5 * config_.n_enemies + (config_.append_agent_id ? n : 0);
    info_.state_dim = 3 * (n + config_.n_enemies) + 1;
}

std::size_t Skirmish::chebyshev(const Unit& a, const Unit& b) {
    return static_cast<std::size_t>(std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)));
}

bool Skirmish::occupied(int x, int y) const {
    for (const auto& u : allies_) {
        if (u.alive() && u.x == x && u.y == y) return true;
    }
    for (const auto& u : enemies_) {
        if (u.alive() && u.x == x && u.y == y) return true;
    }
    return false;
}

ResetResult Skirmish::reset(std::uint64_t seed) {
    grad::Rng rng(seed ^ 0x536b69726d697368ULL);
    allies_.assign(config_.n_allies(), Unit{});
    enemies_.assign(config_.n_enemies, Unit{});
    t_ = 0;
    done_ = false;

    const int h = static_cast<int>(config_.height);
    const int w = static_cast<int>(config_.width);
    auto spawn_zone = [&](int col0, int col1) {
        std::vector<std::pair<int, int>> cells;
        for (int y = 1; y < h - 1; ++y) {
            cells.emplace_back(col0, y);
            cells.emplace_back(col1, y);
        }
        // Fisher-Yates with the episode stream
        for (std::size_t i = cells.size(); i > 1; --i) {
            std::swap(cells[i - 1], cells[rng.uniform_index(i)]);
        }
        return cells;
    };

    auto ally_cells = spawn_zone(1, 2);
    for (std::size_t i = 0; i < allies_.size(); ++i) {
        allies_[i].x = ally_cells[i].first;
        allies_[i].y = ally_cells[i].second;
        allies_[i].healer = i >= config_.n_attackers;
        allies_[i].max_hp = allies_[i].healer ? config_.healer_hp : config_.attacker_hp;
        allies_[i].hp = allies_[i].max_hp;
    }
    auto enemy_cells = spawn_zone(w - 3, w - 2);
    for (std::size_t i = 0; i < enemies_.size(); ++i) {
        enemies_[i].x = enemy_cells[i].first;
        enemies_[i].y = enemy_cells[i].second;
        enemies_[i].healer = false;
        enemies_[i].max_hp = config_.attacker_hp;
        enemies_[i].hp = enemies_[i].max_hp;
    }

    ResetResult out;
    out.obs.reserve(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) out.obs.push_back(observation(a));
    out.avail = availability();
    current_avail_ = out.avail;
    return out;
}

std::vector<double> Skirmish::observation(std::size_t agent) const {
    std::vector<double> obs(info_.obs_dim, 0.0);
    const Unit& self = allies_[agent];
    if (!self.alive()) return obs;

    const double sight = static_cast<double>(config_.sight_range);
    std::size_t k = 0;
    obs[k++] = static_cast<double>(self.hp) / self.max_hp;
    obs[k++] = static_cast<double>(self.x) / (config_.width - 1);
    obs[k++] = static_cast<double>(self.y) / (config_.height - 1);

    for (std::size_t j = 0; j < allies_.size(); ++j) {
        const Unit& u = allies_[j];
        const bool visible = j != agent && u.alive() && chebyshev(self, u) <= config_.sight_range;
        if (visible) {
            obs[k + 0] = 1.0;
            obs[k + 1] = static_cast<double>(u.hp) / u.max_hp;
            obs[k + 2] = static_cast<double>(u.x - self.x) / sight;
            obs[k + 3] = static_cast<double>(u.y - self.y) / sight;
        }
        k += 4;
    }
    for (std::size_t j = 0; j < enemies_.size(); ++j) {
        const Unit& u = enemies_[j];
        const bool visible = u.alive() && chebyshev(self, u) <= config_.sight_range;
        if (visible) {
            obs[k + 0] = 1.0;
            obs[k + 1] = static_cast<double>(u.hp) / u.max_hp;
            obs[k + 2] = static_cast<double>(u.x - self.x) / sight;
            obs[k + 3] = static_cast<double>(u.y - self.y) / sight;
            obs[k + 4] = chebyshev(self, u) <= config_.attack_range ? 1.0 : 0.0;
        }
        k += 5;
    }
    if (config_.append_agent_id) obs[k + agent] = 1.0;
    return obs;
}

std::vector<act::AvailableActionMask> Skirmish::availability() const {
    std::vector<act::AvailableActionMask> out;
    out.reserve(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) {
        const Unit& self = allies_[a];
        std::vector<std::uint8_t> env_avail(info_.uas.size, 0);
        if (!self.alive()) {
            env_avail[act::kNullAction] = 1;
            out.push_back(act::dynamic_mask(info_.group_masks[info_.agent_group[a]], env_avail,
                                            /*agent_alive=*/false));
            continue;
        }
        env_avail[act::kStopAction] = 1;
        for (int m = 0; m < 4; ++m) {
            const int nx = self.x + kMoveDx[m];
            const int ny = self.y + kMoveDy[m];
            if (nx >= 0 && ny >= 0 && nx < static_cast<int>(config_.width) &&
                ny < static_cast<int>(config_.height)) {
                env_avail[act::kMoveUp + m] = 1;
            }
        }
        if (self.healer) {
            for (std::size_t j = 0; j < allies_.size(); ++j) {
                if (j != a && allies_[j].alive() &&
                    chebyshev(self, allies_[j]) <= config_.heal_range) {
                    env_avail[info_.uas.ally_action(j)] = 1;
                }
            }
        } else {
            for (std::size_t j = 0; j < enemies_.size(); ++j) {
                if (enemies_[j].alive() && chebyshev(self, enemies_[j]) <= config_.attack_range) {
                    env_avail[info_.uas.enemy_action(j)] = 1;
                }
            }
        }
        out.push_back(act::dynamic_mask(info_.group_masks[info_.agent_group[a]], env_avail));
    }
    return out;
}

StepResult Skirmish::step(const std::vector<std::size_t>& actions) {
    if (done_) throw ContractError("Skirmish::step: episode finished; reset first");
    if (actions.size() != info_.n_agents) {
        throw ContractError("Skirmish::step: expected " + std::to_string(info_.n_agents) +
                            " actions");
    }
    for (std::size_t a = 0; a < info_.n_agents; ++a) {
        if (actions[a] >= info_.uas.size || !current_avail_[a].bits[actions[a]]) {
            throw ContractError("Skirmish::step: unavailable action " + std::to_string(actions[a]) +
                                " for agent " + std::to_string(a));
        }
    }

    // Scripted enemies: attack the nearest ally in range, otherwise step
    // toward the nearest alive ally (dominant axis first, lowest id ties).
    struct EnemyIntent {
        int target = -1; // ally index to attack
        int move = -1;   // direction index, -1 = stay
    };
    std::vector<EnemyIntent> enemy_intents(enemies_.size());
    for (std::size_t e = 0; e < enemies_.size(); ++e) {
        if (!enemies_[e].alive()) continue;
        int nearest = -1;
        std::size_t best_d = 0;
        for (std::size_t a = 0; a < allies_.size(); ++a) {
            if (!allies_[a].alive()) continue;
            const std::size_t d = chebyshev(enemies_[e], allies_[a]);
            if (nearest < 0 || d < best_d) {
                nearest = static_cast<int>(a);
                best_d = d;
            }
        }
        if (nearest < 0) continue;
        if (best_d <= config_.attack_range) {
            enemy_intents[e].target = nearest;
        } else {
            const int dx = allies_[static_cast<std::size_t>(nearest)].x - enemies_[e].x;
            const int dy = allies_[static_cast<std::size_t>(nearest)].y - enemies_[e].y;
            int dir;
            if (std::abs(dx) >= std::abs(dy)) {
                dir = dx < 0 ? 2 : 3; // left / right
            } else {
                dir = dy < 0 ? 0 : 1; // up / down
            }
            enemy_intents[e].move = dir;
        }
    }

    // Move resolution in global unit order (allies then enemies); a move
    // succeeds when the target cell was empty at the start of the step and
    // has not been claimed earlier this step.
    std::vector<std::pair<int, int>> claimed;
    auto try_move = [&](Unit& u, int dir) {
        const int nx = u.x + kMoveDx[dir];
        const int ny = u.y + kMoveDy[dir];
        if (nx < 0 || ny < 0 || nx >= static_cast<int>(config_.width) ||
            ny >= static_cast<int>(config_.height)) {
            return;
        }
        if (occupied(nx, ny)) return;
        for (const auto& [cx, cy] : claimed) {
            if (cx == nx && cy == ny) return;
        }
        claimed.emplace_back(nx, ny);
        u.x = nx;
        u.y = ny;
    };
    for (std::size_t a = 0; a < allies_.size(); ++a) {
        if (!allies_[a].alive()) continue;
        const std::size_t act_id = actions[a];
        if (act_id >= act::kMoveUp && act_id < act::kMoveUp + 4) {
            try_move(allies_[a], static_cast<int>(act_id - act::kMoveUp));
        }
    }
    for (std::size_t e = 0; e < enemies_.size(); ++e) {
        if (enemies_[e].alive() && enemy_intents[e].move >= 0) {
            try_move(enemies_[e], enemy_intents[e].move);
        }
    }

    // Attacks/heals resolve simultaneously on post-move positions.
    std::vector<int> ally_delta(allies_.size(), 0);
    std::vector<int> enemy_delta(enemies_.size(), 0);
    for (std::size_t a = 0; a < allies_.size(); ++a) {
        if (!allies_[a].alive()) continue;
        const std::size_t act_id = actions[a];
        if (!allies_[a].healer && act_id >= info_.uas.enemy_offset &&
            act_id < info_.uas.enemy_offset + info_.uas.n_enemy_targets) {
            const std::size_t j = act_id - info_.uas.enemy_offset;
            if (enemies_[j].alive() && chebyshev(allies_[a], enemies_[j]) <= config_.attack_range) {
                enemy_delta[j] -= config_.attacker_damage;
            }
        } else if (allies_[a].healer && act_id >= info_.uas.ally_offset &&
                   act_id < info_.uas.ally_offset + info_.uas.n_ally_targets) {
            const std::size_t j = act_id - info_.uas.ally_offset;
            if (j != a && allies_[j].alive() &&
                chebyshev(allies_[a], allies_[j]) <= config_.heal_range) {
                ally_delta[j] += config_.heal_amount;
            }
        }
    }
    for (std::size_t e = 0; e < enemies_.size(); ++e) {
        const int tgt = enemy_intents[e].target;
        if (!enemies_[e].alive() || tgt < 0) continue;
        const auto& ally = allies_[static_cast<std::size_t>(tgt)];
        if (ally.alive() && chebyshev(enemies_[e], ally) <= config_.attack_range) {
            ally_delta[static_cast<std::size_t>(tgt)] -= config_.attacker_damage;
        }
    }

    double damage_dealt = 0.0;
    std::size_t kills = 0;
    for (std::size_t j = 0; j < enemies_.size(); ++j) {
        const int before = enemies_[j].hp;
        enemies_[j].hp = std::clamp(before + enemy_delta[j], 0, enemies_[j].max_hp);
        damage_dealt += static_cast<double>(before - enemies_[j].hp);
        if (before > 0 && enemies_[j].hp == 0) ++kills;
    }
    for (std::size_t j = 0; j < allies_.size(); ++j) {
        allies_[j].hp = std::clamp(allies_[j].hp + ally_delta[j], 0, allies_[j].max_hp);
    }

    const bool all_enemies_dead = std::none_of(enemies_.begin(), enemies_.end(),
                                               [](const Unit& u) { return u.alive(); });
    const bool all_allies_dead = std::none_of(allies_.begin(), allies_.end(),
                                              [](const Unit& u) { return u.alive(); });
    ++t_;

    StepResult out;
    out.reward = damage_dealt + 10.0 * static_cast<double>(kills) + (all_enemies_dead ? 200.0 : 0.0);
    out.won = all_enemies_dead;
    out.terminated = all_enemies_dead || all_allies_dead || t_ >= config_.episode_limit;
    done_ = out.terminated;
    out.obs.reserve(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) out.obs.push_back(observation(a));
    out.avail = availability();
    current_avail_ = out.avail;
    return out;
}

std::vector<double> Skirmish::state() const {
    std::vector<double> s;
    s.reserve(info_.state_dim);
    auto push_unit = [&](const Unit& u) {
        s.push_back(u.alive() ? static_cast<double>(u.hp) / u.max_hp : 0.0);
        s.push_back(u.alive() ? static_cast<double>(u.x) / (config_.width - 1) : 0.0);
        s.push_back(u.alive() ? static_cast<double>(u.y) / (config_.height - 1) : 0.0);
    };
    for (const auto& u : allies_) push_unit(u);
    for (const auto& u : enemies_) push_unit(u);
    s.push_back(static_cast<double>(t_) / static_cast<double>(config_.episode_limit));
    return s;
}

void Skirmish::force_hp(bool enemy_side, std::size_t index, int hp) {
    auto& units = enemy_side ? enemies_ : allies_;
    if (index >= units.size()) throw ContractError("force_hp: unit index out of range");
    units[index].hp = std::clamp(hp, 0, units[index].max_hp);
    current_avail_ = availability();
}

double Skirmish::max_episode_reward() const {
    double total_hp = 0.0;
    for (const auto& u : enemies_) total_hp += u.max_hp;
    return total_hp + 10.0 * static_cast<double>(enemies_.size()) + 200.0;
}

} // namespace uasrl::envs
