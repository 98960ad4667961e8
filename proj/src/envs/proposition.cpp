#include "uasrl/envs/proposition.hpp"

#include <cmath>

namespace uasrl::envs {

ObsMode obs_mode_from_string(const std::string& s) {
    if (s == "blind") return ObsMode::Blind;
    if (s == "id") return ObsMode::Id;
    if (s == "id_group") return ObsMode::IdGroup;
    throw ConfigError("unknown observation mode '" + s + "' (blind|id|id_group)");
}

std::string to_string(ObsMode mode) {
    switch (mode) {
        case ObsMode::Blind: return "blind";
        case ObsMode::Id: return "id";
        case ObsMode::IdGroup: return "id_group";
    }
    return "?";
}

void PropositionConfig::validate() const {
    if (agents_per_group == 0) throw ConfigError("proposition: N must be >= 1");
    if (a0 < agents_per_group || a1 < a0) {
        throw ConfigError("proposition: require a1 >= a0 >= N, got a0=" + std::to_string(a0) +
                          " a1=" + std::to_string(a1) + " N=" + std::to_string(agents_per_group));
    }
}

PropositionGame::PropositionGame(PropositionConfig config) : config_(config) {
    config_.validate();
    const std::size_t n = config_.agents_per_group;

    act::GroupSpec g0;
    g0.group_id = 0;
    g0.capabilities = {.self_act = true, .ally_act = true, .enemy_act = false};
    act::GroupSpec g1;
    g1.group_id = 1;
    g1.capabilities = {.self_act = true, .ally_act = false, .enemy_act = true};
    for (std::size_t i = 0; i < n; ++i) {
        g0.agent_ids.push_back(static_cast<int>(i));
        g1.agent_ids.push_back(static_cast<int>(n + i));
    }

    auto built = act::build_uas({g0, g1}, config_.a0, config_.a1, config_.layout);
    info_.n_agents = 2 * n;
    info_.episode_limit = 1;
    info_.uas = built.uas;
    info_.groups = {g0, g1};
    info_.group_masks = built.group_masks;
    info_.agent_group.resize(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) info_.agent_group[a] = a < n ? 0 : 1;
    switch (config_.obs_mode) {
        case ObsMode::Blind: info_.obs_dim = 1; break;
        case ObsMode::Id: info_.obs_dim = n; break;
        case ObsMode::IdGroup: info_.obs_dim = n + 2; break;
    }
    info_.state_dim = 1;
}

std::vector<double> PropositionGame::observation(std::size_t agent) const {
    std::vector<double> obs(info_.obs_dim, 0.0);
    const std::size_t n = config_.agents_per_group;
    const std::size_t within = agent % n;
    switch (config_.obs_mode) {
        case ObsMode::Blind:
            break;
        case ObsMode::Id:
            obs[within] = 1.0;
            break;
        case ObsMode::IdGroup:
            obs[within] = 1.0;
            obs[n + info_.agent_group[agent]] = 1.0;
            break;
    }
    return obs;
}

std::vector<act::AvailableActionMask> PropositionGame::availability() const {
    // All agents alive; everything but the null action stays enabled.
    std::vector<std::uint8_t> env_avail(info_.uas.size, 1);
    env_avail[act::kNullAction] = 0;
    std::vector<act::AvailableActionMask> out;
    out.reserve(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) {
        out.push_back(act::dynamic_mask(info_.group_masks[info_.agent_group[a]], env_avail));
    }
    return out;
}

ResetResult PropositionGame::reset(std::uint64_t) {
    awaiting_step_ = true;
    ResetResult out;
    out.obs.reserve(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) out.obs.push_back(observation(a));
    out.avail = availability();
    return out;
}

std::size_t PropositionGame::required_action(std::size_t agent) const {
    const std::size_t n = config_.agents_per_group;
    const std::size_t within = agent % n;
    return info_.agent_group[agent] == 0 ? info_.uas.ally_action(within)
                                         : info_.uas.enemy_action(within);
}

StepResult PropositionGame::step(const std::vector<std::size_t>& actions) {
    if (!awaiting_step_) throw ContractError("PropositionGame::step: episode finished; reset first");
    if (actions.size() != info_.n_agents) {
        throw ContractError("PropositionGame::step: expected " + std::to_string(info_.n_agents) +
                            " actions");
    }
    const auto avail = availability();
    for (std::size_t a = 0; a < info_.n_agents; ++a) {
        if (actions[a] >= info_.uas.size || !avail[a].bits[actions[a]]) {
            throw ContractError("PropositionGame::step: unavailable action " +
                                std::to_string(actions[a]) + " for agent " + std::to_string(a));
        }
    }
    bool all_match = true;
    for (std::size_t a = 0; a < info_.n_agents; ++a) {
        all_match = all_match && actions[a] == required_action(a);
    }
    awaiting_step_ = false;

    StepResult out;
    out.reward = all_match ? 1.0 : 0.0;
    out.terminated = true;
    out.won = all_match;
    out.obs.reserve(info_.n_agents);
    for (std::size_t a = 0; a < info_.n_agents; ++a) out.obs.push_back(observation(a));
    out.avail = avail;
    return out;
}

std::vector<double> PropositionGame::state() const { return {1.0}; }

double analytic_shared_optimum(std::size_t n_agents_per_group, double rho_r) {
    if (n_agents_per_group == 0) throw ContractError("analytic_shared_optimum: N must be >= 1");
    if (!(rho_r > 0.0 && rho_r <= 1.0)) {
        throw ContractError("analytic_shared_optimum: rho_r must lie in (0, 1]");
    }
    const double n = static_cast<double>(n_agents_per_group);
    return std::pow(rho_r / n, 2.0 * n);
}

namespace {

void search_compositions(std::size_t remaining, std::size_t slot, std::vector<std::size_t>& counts,
                         std::size_t n_required, double inv_res, BruteForceResult& best) {
    if (slot + 1 == counts.size()) {
        counts[slot] = remaining;
        ++best.evaluated;
        double j = 1.0;
        for (std::size_t i = 0; i < n_required; ++i) {
            const double p = static_cast<double>(counts[i]) * inv_res;
            j *= p * p;
        }
        if (j > best.max_reward) {
            best.max_reward = j;
            best.argmax.assign(counts.size(), 0.0);
            for (std::size_t i = 0; i < counts.size(); ++i) {
                best.argmax[i] = static_cast<double>(counts[i]) * inv_res;
            }
        }
        return;
    }
    // mass beyond the required ids never helps; prune identical tails
    for (std::size_t c = 0; c <= remaining; ++c) {
        counts[slot] = c;
        search_compositions(remaining - c, slot + 1, counts, n_required, inv_res, best);
        if (slot >= n_required) break; // extra slots are interchangeable dead mass
    }
}

} // namespace

BruteForceResult brute_force_shared_optimum(std::size_t n_agents_per_group, std::size_t a0,
                                            std::size_t a1, std::size_t grid_resolution) {
    const std::size_t n = n_agents_per_group;
    if (n == 0 || a0 < n || a1 < a0) {
        throw ContractError("brute_force_shared_optimum: require a1 >= a0 >= N >= 1");
    }
    if (grid_resolution < 10) {
        throw ContractError("brute_force_shared_optimum: grid_resolution must be >= 10");
    }
    BruteForceResult best;
    best.analytic = analytic_shared_optimum(n, 1.0);
    std::vector<std::size_t> counts(a1, 0);
    search_compositions(grid_resolution, 0, counts, n, 1.0 / static_cast<double>(grid_resolution),
                        best);
    best.gap = std::fabs(best.max_reward - best.analytic);
    return best;
}

DeterministicOptimumResult uas_deterministic_optimum(const PropositionConfig& config) {
    config.validate();
    DeterministicOptimumResult out;
    out.shared_bound = analytic_shared_optimum(config.agents_per_group, 1.0);
    if (config.obs_mode == ObsMode::Blind) {
        out.attainable = false;
        out.note = "blind observations give every agent an identical policy input, so the "
                   "deterministic per-id assignment cannot be expressed; the shared "
                   "unconditioned optimum is the reported bound";
        return out;
    }
    PropositionGame game(config);
    const auto& info = game.info();

    // Per-id UAS preference: a large logit at the id's slot in both target
    // blocks; each group's mask then selects its own block.
    double expected = 1.0;
    for (std::size_t agent = 0; agent < info.n_agents; ++agent) {
        const std::size_t within = agent % config.agents_per_group;
        std::vector<double> logits(info.uas.size, 0.0);
        logits[info.uas.ally_action(std::min(within, info.uas.n_ally_targets - 1))] = 200.0;
        logits[info.uas.enemy_action(std::min(within, info.uas.n_enemy_targets - 1))] = 200.0;
        const auto policy = act::mask_policy(logits, info.group_masks[info.agent_group[agent]],
                                             act::MaskInput::Logits);
        expected *= policy.probs[game.required_action(agent)];
    }
    out.attainable = true;
    out.value = expected;
    out.note = "deterministic per-id policy expressed through group masks";
    return out;
}

} // namespace uasrl::envs
