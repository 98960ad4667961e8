#include "uasrl/envs/episode.hpp"

#include <fstream>

#include <json.hpp>

namespace uasrl::envs {

double EpisodeBatch::total_reward() const {
    double s = 0.0;
    for (double r : rewards) s += r;
    return s;
}

void EpisodeBatch::validate() const {
    if (length == 0) throw ContractError("EpisodeBatch: empty episode");
    const std::size_t tp1 = length + 1;
    if (obs.size() != tp1 * n_agents * obs_dim || states.size() != tp1 * state_dim ||
        avail.size() != tp1 * n_agents * uas_dim || actions.size() != length * n_agents ||
        rewards.size() != length || terminated.size() != length ||
        hidden.size() != length * n_agents * hidden_dim) {
        throw ContractError("EpisodeBatch: field lengths are inconsistent");
    }
    std::size_t terminal_count = 0;
    for (auto f : terminated) terminal_count += f ? 1 : 0;
    if (terminal_count != 1 || !terminated.back()) {
        throw ContractError("EpisodeBatch: expected exactly one trailing terminal flag");
    }
}

void EpisodeBatch::export_jsonl(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("EpisodeBatch::export_jsonl: cannot open '" + path + "'");
    for (std::size_t t = 0; t < length; ++t) {
        nlohmann::json rec;
        rec["t"] = t;
        rec["reward"] = rewards[t];
        rec["terminated"] = static_cast<bool>(terminated[t]);
        rec["state"] = std::vector<double>(state_at(t), state_at(t) + state_dim);
        nlohmann::json obs_arr = nlohmann::json::array();
        nlohmann::json act_arr = nlohmann::json::array();
        nlohmann::json avail_arr = nlohmann::json::array();
        nlohmann::json h_arr = nlohmann::json::array();
        for (std::size_t a = 0; a < n_agents; ++a) {
            obs_arr.push_back(std::vector<double>(obs_at(t, a), obs_at(t, a) + obs_dim));
            act_arr.push_back(action_at(t, a));
            avail_arr.push_back(std::vector<int>(avail_at(t, a), avail_at(t, a) + uas_dim));
            const double* h = hidden.data() + (t * n_agents + a) * hidden_dim;
            h_arr.push_back(std::vector<double>(h, h + hidden_dim));
        }
        rec["obs"] = std::move(obs_arr);
        rec["actions"] = std::move(act_arr);
        rec["avail"] = std::move(avail_arr);
        rec["hidden"] = std::move(h_arr);
        os << rec.dump() << "\n";
    }
}

} // namespace uasrl::envs
