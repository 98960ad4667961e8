#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasrl/errors.hpp"
#include "uasrl/grad/random.hpp"

namespace uasrl::act {

/// What a group's actions act upon: the agent itself, an ally, or an enemy.
enum class ActionSemanticsClass : std::uint8_t { SelfAct = 0, AllyAct = 1, EnemyAct = 2 };

struct Capabilities {
    bool self_act = true; // every group can act on itself
    bool ally_act = false;
    bool enemy_act = false;

    bool has(ActionSemanticsClass c) const {
        switch (c) {
            case ActionSemanticsClass::SelfAct: return self_act;
            case ActionSemanticsClass::AllyAct: return ally_act;
            case ActionSemanticsClass::EnemyAct: return enemy_act;
        }
        return false;
    }
    bool operator==(const Capabilities&) const = default;
};

struct GroupSpec {
    int group_id = 0;
    Capabilities capabilities;
    std::vector<int> agent_ids;
};

// Fixed self-action block: indices 0..5.
inline constexpr std::size_t kSelfBlockSize = 6;
inline constexpr std::size_t kNullAction = 0;
inline constexpr std::size_t kStopAction = 1;
inline constexpr std::size_t kMoveUp = 2;
inline constexpr std::size_t kMoveDown = 3;
inline constexpr std::size_t kMoveLeft = 4;
inline constexpr std::size_t kMoveRight = 5;

enum class Layout : std::uint8_t {
    Unified,   // self | ally targets | enemy targets, disjoint blocks
    Overlapped // self | shared target block (ally and enemy actions collide)
};

/// Ordered union of all action-semantics blocks. In the unified layout the
/// ally and enemy target blocks are disjoint; in the overlapped layout they
/// share one block of size max(n_ally_targets, n_enemy_targets), which is
/// the undiscriminated baseline representation.
struct UnifiedActionSpace {
    Layout layout = Layout::Unified;
    std::size_t n_ally_targets = 0;
    std::size_t n_enemy_targets = 0;
    std::size_t size = 0;
    std::size_t ally_offset = 0;  // first ally-target index
    std::size_t enemy_offset = 0; // first enemy-target index

    std::size_t ally_action(std::size_t target) const;
    std::size_t enemy_action(std::size_t target) const;

    nlohmann::json to_json() const;
};

struct AvailableActionMask {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::size_t count() const;
    bool any() const { return count() > 0; }
    bool operator==(const AvailableActionMask&) const = default;

    nlohmann::json to_json() const;
};

/// Normalized probabilities over the UAS; zero at masked-out indices.
struct PolicyDistribution {
    std::vector<double> probs;
};

struct QVector {
    std::vector<double> values;
};

struct UasBuildResult {
    UnifiedActionSpace uas;
    std::vector<AvailableActionMask> group_masks; // indexed like `groups`
};

/// Builds the action space and each group's static mask: the self block is
/// always enabled, target blocks follow the group's capabilities. Validates
/// that every positive-size block is covered by at least one group.
UasBuildResult build_uas(const std::vector<GroupSpec>& groups, std::size_t n_ally_targets,
                         std::size_t n_enemy_targets, Layout layout = Layout::Unified);

enum class MaskInput : std::uint8_t { Logits, Distribution };

inline constexpr double kMaskSentinel = -1e9;

/// The masking-policy operator: logits are filled with a large-negative
/// sentinel then softmaxed; distributions are zeroed and renormalized.
PolicyDistribution mask_policy(const std::vector<double>& input, const AvailableActionMask& mask,
                               MaskInput kind);

/// Argmax restricted to available indices; ties break toward the lowest index.
std::size_t mask_q_argmax(const QVector& q, const AvailableActionMask& mask);

/// For an agent of `own_group`: every other group's static mask, labeled by
/// group id. Single-group systems yield an empty list.
std::vector<std::pair<int, AvailableActionMask>> inverse_masks(
    const GroupSpec& own_group, const std::vector<GroupSpec>& all_groups,
    const std::vector<AvailableActionMask>& group_masks);

/// Bitwise AND of the static mask with the environment's availability
/// vector. A live agent must keep at least one action; a dead agent's
/// availability is exactly the null action.
AvailableActionMask dynamic_mask(const AvailableActionMask& static_mask,
                                 const std::vector<std::uint8_t>& env_availability,
                                 bool agent_alive = true);

std::size_t sample_policy(const PolicyDistribution& dist, grad::Rng& rng);

nlohmann::json masks_to_json(const UnifiedActionSpace& uas,
                             const std::vector<GroupSpec>& groups,
                             const std::vector<AvailableActionMask>& group_masks);

} // namespace uasrl::act
