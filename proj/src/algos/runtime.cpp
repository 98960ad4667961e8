#include "uasrl/algos/runtime.hpp"

namespace uasrl::algos {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = base ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xd1342543de82ef95ULL);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

grad::Tensor rows_tensor(const std::vector<const double*>& rows, std::size_t dim) {
    std::vector<double> data;
    data.reserve(rows.size() * dim);
    for (const double* r : rows) data.insert(data.end(), r, r + dim);
    return grad::Tensor::from_vector({rows.size(), dim}, std::move(data));
}

grad::Tensor onehot_rows(const std::vector<std::size_t>& ids, std::size_t dim) {
    std::vector<double> data(ids.size() * dim, 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= dim) throw ContractError("onehot_rows: id out of range");
        data[i * dim + ids[i]] = 1.0;
    }
    return grad::Tensor::from_vector({ids.size(), dim}, std::move(data));
}

EvalResult evaluate_policy(envs::Env& env, const grad::ParameterSet& params,
                           const nets::TrunkConfig& trunk_cfg, std::uint64_t seed_base,
                           std::size_t episodes, PolicyMode mode, const std::string& prefix) {
    grad::NoGradScope no_grad;
    const auto& info = env.info();
    const std::size_t n = info.n_agents;
    const std::size_t uas = info.uas.size;

    EvalResult out;
    out.episodes = episodes;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        grad::Rng sample_rng(derive_seed(seed_base, ep, 0x5eedULL));
        auto reset = env.reset(derive_seed(seed_base, ep));
        grad::Tensor h = grad::Tensor::zeros({n, trunk_cfg.hidden});
        std::vector<std::size_t> last_actions(n, act::kNullAction);
        bool first_step = true;
        double ep_return = 0.0;
        std::size_t ep_len = 0;
        bool won = false;
        auto obs = reset.obs;
        auto avail = reset.avail;
        while (true) {
            std::vector<const double*> obs_rows(n);
            for (std::size_t a = 0; a < n; ++a) obs_rows[a] = obs[a].data();
            grad::Tensor obs_t = rows_tensor(obs_rows, info.obs_dim);
            grad::Tensor act_t = first_step ? grad::Tensor::zeros({n, uas})
                                            : onehot_rows(last_actions, uas);
            auto step_out = nets::trunk_forward(params, trunk_cfg, obs_t, act_t, h, prefix);
            h = step_out.h_next;

            std::vector<std::size_t> actions(n);
            for (std::size_t a = 0; a < n; ++a) {
                const double* row = step_out.output.data().data() + a * uas;
                if (mode == PolicyMode::Greedy) {
                    act::QVector q{std::vector<double>(row, row + uas)};
                    actions[a] = act::mask_q_argmax(q, avail[a]);
                } else {
                    auto policy = act::mask_policy(std::vector<double>(row, row + uas), avail[a],
                                                   act::MaskInput::Logits);
                    actions[a] = act::sample_policy(policy, sample_rng);
                }
            }
            auto result = env.step(actions);
            ep_return += result.reward;
            ++ep_len;
            last_actions = actions;
            first_step = false;
            obs = result.obs;
            avail = result.avail;
            if (result.terminated) {
                won = result.won;
                break;
            }
        }
        out.wr += won ? 1.0 : 0.0;
        out.mean_return += ep_return;
        out.mean_length += static_cast<double>(ep_len);
    }
    if (episodes > 0) {
        out.wr /= static_cast<double>(episodes);
        out.mean_return /= static_cast<double>(episodes);
        out.mean_length /= static_cast<double>(episodes);
    }
    return out;
}

} // namespace uasrl::algos
