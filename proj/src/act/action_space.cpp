#include "uasrl/act/action_space.hpp"

#include <algorithm>
#include <cmath>

namespace uasrl::act {

std::size_t UnifiedActionSpace::ally_action(std::size_t target) const {
    if (target >= n_ally_targets) throw ContractError("ally_action: target out of range");
    return ally_offset + target;
}

std::size_t UnifiedActionSpace::enemy_action(std::size_t target) const {
    if (target >= n_enemy_targets) throw ContractError("enemy_action: target out of range");
    return enemy_offset + target;
}

nlohmann::json UnifiedActionSpace::to_json() const {
    return {
        {"layout", layout == Layout::Unified ? "unified" : "overlapped"},
        {"size", size},
        {"self_block", {{"offset", 0}, {"size", kSelfBlockSize}}},
        {"ally_block", {{"offset", ally_offset}, {"size", n_ally_targets}}},
        {"enemy_block", {{"offset", enemy_offset}, {"size", n_enemy_targets}}},
    };
}

std::size_t AvailableActionMask::count() const {
    std::size_t c = 0;
    for (auto b : bits) c += b ? 1 : 0;
    return c;
}

nlohmann::json AvailableActionMask::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (auto b : bits) arr.push_back(static_cast<int>(b));
    return arr;
}

UasBuildResult build_uas(const std::vector<GroupSpec>& groups, std::size_t n_ally_targets,
                         std::size_t n_enemy_targets, Layout layout) {
    if (groups.empty()) throw ContractError("build_uas: empty group list");
    for (const auto& g : groups) {
        if (!g.capabilities.self_act) {
            throw ContractError("build_uas: group " + std::to_string(g.group_id) +
                                " lacks the self-action capability");
        }
    }

    UnifiedActionSpace uas;
    uas.layout = layout;
    uas.n_ally_targets = n_ally_targets;
    uas.n_enemy_targets = n_enemy_targets;
    uas.ally_offset = kSelfBlockSize;
    if (layout == Layout::Unified) {
        uas.enemy_offset = kSelfBlockSize + n_ally_targets;
        uas.size = kSelfBlockSize + n_ally_targets + n_enemy_targets;
    } else {
        uas.enemy_offset = kSelfBlockSize; // shares indices with the ally block
        uas.size = kSelfBlockSize + std::max(n_ally_targets, n_enemy_targets);
    }

    bool any_ally = false, any_enemy = false;
    UasBuildResult out;
    out.uas = uas;
    out.group_masks.reserve(groups.size());
    for (const auto& g : groups) {
        AvailableActionMask m;
        m.bits.assign(uas.size, 0);
        for (std::size_t i = 0; i < kSelfBlockSize; ++i) m.bits[i] = 1;
        if (g.capabilities.ally_act) {
            any_ally = true;
            for (std::size_t t = 0; t < n_ally_targets; ++t) m.bits[uas.ally_offset + t] = 1;
        }
        if (g.capabilities.enemy_act) {
            any_enemy = true;
            for (std::size_t t = 0; t < n_enemy_targets; ++t) m.bits[uas.enemy_offset + t] = 1;
        }
        out.group_masks.push_back(std::move(m));
    }
    if (n_ally_targets > 0 && !any_ally) {
        throw ContractError("build_uas: ally block is non-empty but no group can act on allies");
    }
    if (n_enemy_targets > 0 && !any_enemy) {
        throw ContractError("build_uas: enemy block is non-empty but no group can act on enemies");
    }
    return out;
}

PolicyDistribution mask_policy(const std::vector<double>& input, const AvailableActionMask& mask,
                               MaskInput kind) {
    if (input.size() != mask.size()) {
        throw ContractError("mask_policy: input length " + std::to_string(input.size()) +
                            " != mask length " + std::to_string(mask.size()));
    }
    if (!mask.any()) throw ContractError("mask_policy: all-zero mask");

    PolicyDistribution out;
    out.probs.assign(input.size(), 0.0);

    if (kind == MaskInput::Logits) {
        double mx = kMaskSentinel;
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (mask.bits[i] && input[i] > mx) mx = input[i];
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (mask.bits[i]) {
                out.probs[i] = std::exp(input[i] - mx);
                sum += out.probs[i];
            }
        }
        if (!(sum > 0.0) || !std::isfinite(sum)) {
            throw NumericalError("mask_policy: softmax over masked logits degenerated");
        }
        for (double& p : out.probs) p /= sum;
    } else {
        double sum = 0.0;
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (input[i] < 0.0) {
                throw ContractError("mask_policy: negative probability in distribution input");
            }
            if (mask.bits[i]) sum += input[i];
        }
        if (!(sum > 0.0)) {
            throw ContractError("mask_policy: masked distribution has zero total mass");
        }
        for (std::size_t i = 0; i < input.size(); ++i) {
            if (mask.bits[i]) out.probs[i] = input[i] / sum;
        }
    }
    return out;
}

std::size_t mask_q_argmax(const QVector& q, const AvailableActionMask& mask) {
    if (q.values.size() != mask.size()) {
        throw ContractError("mask_q_argmax: length mismatch");
    }
    if (!mask.any()) throw ContractError("mask_q_argmax: all-zero mask");
    bool found = false;
    std::size_t best = 0;
    double best_v = 0.0;
    for (std::size_t i = 0; i < q.values.size(); ++i) {
        if (!mask.bits[i]) continue;
        if (!std::isfinite(q.values[i])) {
            throw NumericalError("mask_q_argmax: non-finite Q at available index " +
                                 std::to_string(i));
        }
        if (!found || q.values[i] > best_v) {
            found = true;
            best = i;
            best_v = q.values[i];
        }
    }
    return best;
}

std::vector<std::pair<int, AvailableActionMask>> inverse_masks(
    const GroupSpec& own_group, const std::vector<GroupSpec>& all_groups,
    const std::vector<AvailableActionMask>& group_masks) {
    if (all_groups.size() != group_masks.size()) {
        throw ContractError("inverse_masks: groups and masks differ in length");
    }
    std::vector<std::pair<int, AvailableActionMask>> out;
    for (std::size_t i = 0; i < all_groups.size(); ++i) {
        if (all_groups[i].group_id == own_group.group_id) continue;
        out.emplace_back(all_groups[i].group_id, group_masks[i]);
    }
    return out;
}

AvailableActionMask dynamic_mask(const AvailableActionMask& static_mask,
                                 const std::vector<std::uint8_t>& env_availability,
                                 bool agent_alive) {
    if (env_availability.size() != static_mask.size()) {
        throw ContractError("dynamic_mask: availability length mismatch");
    }
    AvailableActionMask out;
    out.bits.resize(static_mask.size());
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
        out.bits[i] = static_mask.bits[i] && env_availability[i] ? 1 : 0;
    }
    if (!agent_alive) {
        bool only_null = out.bits[kNullAction] == 1 && out.count() == 1;
        if (!only_null) {
            throw ContractError("dynamic_mask: dead agent must have exactly the null action");
        }
        return out;
    }
    if (out.bits[kNullAction]) {
        throw ContractError("dynamic_mask: null action enabled for a live agent");
    }
    if (!out.any()) {
        throw ContractError("dynamic_mask: live agent left with no available action");
    }
    return out;
}

std::size_t sample_policy(const PolicyDistribution& dist, grad::Rng& rng) {
    return grad::sample_categorical(dist.probs, rng);
}

nlohmann::json masks_to_json(const UnifiedActionSpace& uas,
                             const std::vector<GroupSpec>& groups,
                             const std::vector<AvailableActionMask>& group_masks) {
    nlohmann::json out;
    out["uas"] = uas.to_json();
    out["groups"] = nlohmann::json::array();
    for (std::size_t i = 0; i < groups.size(); ++i) {
        nlohmann::json g;
        g["group_id"] = groups[i].group_id;
        g["agent_ids"] = groups[i].agent_ids;
        g["capabilities"] = {
            {"self", groups[i].capabilities.self_act},
            {"ally", groups[i].capabilities.ally_act},
            {"enemy", groups[i].capabilities.enemy_act},
        };
        g["static_mask"] = group_masks[i].to_json();
        out["groups"].push_back(std::move(g));
    }
    return out;
}

} // namespace uasrl::act
