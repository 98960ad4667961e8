#include "uasrl/algos/umappo.hpp"

#include <cmath>
#include <iostream>

namespace uasrl::algos {

using grad::Tensor;

UMappoTrainer::UMappoTrainer(EnvFactory factory, UMappoSettings settings)
    : settings_(settings), env_seed_rng_(0), policy_rng_(0) {
    settings_.hyper.validate();
    env_ = factory();
    eval_env_ = factory();
    const auto& info = env_->info();

    const bool unified = info.uas.layout == act::Layout::Unified;
    if (settings_.flags.use_uas != unified) {
        throw ConfigError("u-mappo: use_uas flag does not match the environment layout");
    }

    grad::Rng master(settings_.seed);
    grad::Rng init_rng = master.split();
    env_seed_rng_ = master.split();
    policy_rng_ = master.split();
    eval_seed_base_ = master.next_u64();

    trunk_cfg_ = {.obs_dim = info.obs_dim, .uas_dim = info.uas.size, .hidden = 64};
    critic_cfg_ = {.state_dim = info.state_dim, .hidden = 64};
    predictor_cfg_ = {.hidden = trunk_cfg_.hidden, .uas_dim = info.uas.size};

    cgi_active_ = settings_.flags.use_cgi && settings_.hyper.lambda_i > 0.0;
    if (cgi_active_ && info.groups.size() < 2) {
        std::cerr << "[u-mappo] notice: single-group system, CGI loss is vacuous and disabled\n";
        cgi_active_ = false;
    }

    params_ = nets::make_trunk(trunk_cfg_, init_rng);
    params_.extend(nets::make_critic(critic_cfg_, init_rng));
    if (cgi_active_) params_.extend(nets::make_predictor(predictor_cfg_, init_rng));
    adam_ = std::make_unique<grad::Adam>(params_);
}

UMappoTrainer::Collected UMappoTrainer::collect_episode() {
    grad::NoGradScope no_grad;
    const auto& info = env_->info();
    const std::size_t n = info.n_agents;
    const std::size_t uas = info.uas.size;

    Collected out;
    auto& ep = out.episode;
    ep.n_agents = n;
    ep.obs_dim = info.obs_dim;
    ep.state_dim = info.state_dim;
    ep.uas_dim = uas;
    ep.hidden_dim = trunk_cfg_.hidden;

    auto reset = env_->reset(env_seed_rng_.next_u64());
    auto obs = reset.obs;
    auto avail = reset.avail;
    Tensor h = Tensor::zeros({n, trunk_cfg_.hidden});
    std::vector<std::size_t> last_actions(n, act::kNullAction);
    bool first = true;

    auto push_slice = [&](const std::vector<std::vector<double>>& o,
                          const std::vector<act::AvailableActionMask>& av) {
        for (std::size_t a = 0; a < n; ++a) {
            ep.obs.insert(ep.obs.end(), o[a].begin(), o[a].end());
        }
        const auto s = env_->state();
        ep.states.insert(ep.states.end(), s.begin(), s.end());
        for (std::size_t a = 0; a < n; ++a) {
            ep.avail.insert(ep.avail.end(), av[a].bits.begin(), av[a].bits.end());
        }
    };

    while (true) {
        push_slice(obs, avail);
        std::vector<const double*> obs_rows(n);
        for (std::size_t a = 0; a < n; ++a) obs_rows[a] = obs[a].data();
        Tensor obs_t = rows_tensor(obs_rows, info.obs_dim);
        Tensor act_t = first ? Tensor::zeros({n, uas}) : onehot_rows(last_actions, uas);
        auto fwd = nets::trunk_forward(params_, trunk_cfg_, obs_t, act_t, h);
        h = fwd.h_next;

        std::vector<std::size_t> actions(n);
        for (std::size_t a = 0; a < n; ++a) {
            const double* row = fwd.output.data().data() + a * uas;
            auto policy = act::mask_policy(std::vector<double>(row, row + uas), avail[a],
                                           act::MaskInput::Logits);
            const std::size_t action = act::sample_policy(policy, policy_rng_);
            if (!avail[a].bits[action]) ++illegal_actions_;
            actions[a] = action;
            out.old_logp.push_back(std::log(policy.probs[action]));
            ep.actions.push_back(action);
        }
        ep.hidden.insert(ep.hidden.end(), h.data().begin(), h.data().end());

        auto result = env_->step(actions);
        ep.rewards.push_back(result.reward);
        ep.terminated.push_back(result.terminated ? 1 : 0);
        ++ep.length;
        last_actions = actions;
        first = false;
        obs = result.obs;
        avail = result.avail;
        if (result.terminated) {
            ep.won = result.won;
            push_slice(obs, avail); // final slice for bootstrapped consumers
            break;
        }
    }
    ep.validate();
    t_total_ += ep.length;
    ++episode_count_;
    return out;
}

MetricsRecord UMappoTrainer::update(const Collected& collected) {
    const auto& info = env_->info();
    const auto& ep = collected.episode;
    const std::size_t T = ep.length;
    const std::size_t n = ep.n_agents;
    const std::size_t uas = ep.uas_dim;
    const auto& hyper = settings_.hyper;

    // constants shared by all epochs
    std::vector<const double*> state_rows(T);
    for (std::size_t t = 0; t < T; ++t) state_rows[t] = ep.state_at(t);
    Tensor states_t = rows_tensor(state_rows, ep.state_dim);

    std::vector<double> v_old(T);
    {
        grad::NoGradScope no_grad;
        Tensor v = nets::critic_forward(params_, critic_cfg_, states_t);
        for (std::size_t t = 0; t < T; ++t) v_old[t] = v.data()[t];
    }
    std::vector<double> values(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t) values[t] = v_old[t];
    // all episodes end on a true terminal in these environments
    GaeResult gae = compute_gae(ep.rewards, values, hyper.gamma, hyper.gae_lambda);
    std::vector<double> adv_std = standardize(gae.advantages);

    std::vector<double> adv_rows(T * n), old_logp_rows = collected.old_logp;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t a = 0; a < n; ++a) adv_rows[t * n + a] = adv_std[t];
    }
    Tensor adv_t = Tensor::from_vector({T * n}, adv_rows);
    Tensor old_logp_t = Tensor::from_vector({T * n}, old_logp_rows);
    Tensor v_old_t = Tensor::from_vector({T}, v_old);
    Tensor returns_t = Tensor::from_vector({T}, gae.returns);

    std::vector<std::uint8_t> keep(ep.avail.begin(), ep.avail.begin() + T * n * uas);
    std::vector<std::size_t> flat_actions(ep.actions.begin(), ep.actions.end());

    std::vector<Tensor> obs_seq(T), act_seq(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<const double*> rows(n);
        for (std::size_t a = 0; a < n; ++a) rows[a] = ep.obs_at(t, a);
        obs_seq[t] = rows_tensor(rows, ep.obs_dim);
        if (t == 0) {
            act_seq[t] = Tensor::zeros({n, uas});
        } else {
            std::vector<std::size_t> prev(n);
            for (std::size_t a = 0; a < n; ++a) prev[a] = ep.action_at(t - 1, a);
            act_seq[t] = onehot_rows(prev, uas);
        }
    }

    double sum_actor = 0.0, sum_value = 0.0, sum_cgi = 0.0, sum_entropy = 0.0, sum_total = 0.0;
    for (std::size_t u = 0; u < hyper.ppo_updates; ++u) {
        tape_.reset();
        grad::TapeScope scope(tape_);

        auto unroll = nets::trunk_unroll(params_, trunk_cfg_, obs_seq, act_seq,
                                         Tensor::zeros({n, trunk_cfg_.hidden}));
        Tensor logits = grad::concat_rows(unroll.outputs); // [T*n, uas]
        MaskedPolicyRows mp = masked_policy_rows(logits, keep);
        Tensor logp_taken = grad::gather_lastdim(mp.logp, flat_actions);
        Tensor actor = ppo_actor_loss(logp_taken, old_logp_t, adv_t, mp.entropy, hyper.eps_p,
                                      hyper.lambda_e);

        Tensor v_new = grad::reshape(nets::critic_forward(params_, critic_cfg_, states_t), {T});
        Tensor v_loss = value_loss(v_new, v_old_t, returns_t, hyper.eps_v);

        Tensor cgi_loss = Tensor::scalar(0.0);
        if (cgi_active_) {
            ++cgi_evaluations_;
            Tensor h_all = grad::concat_rows(unroll.hiddens); // [T*n, hidden]
            Tensor preds = nets::predictor_forward(params_, predictor_cfg_, h_all);
            Tensor sq_sum = Tensor::scalar(0.0);
            double count = 0.0;
            for (std::size_t gh = 0; gh < info.groups.size(); ++gh) {
                const auto& am_h = info.group_masks[gh].bits;
                const std::size_t avail_h = info.group_masks[gh].count();
                Tensor probs_inv =
                    grad::softmax_lastdim(grad::masked_fill(preds, am_h, act::kMaskSentinel));

                // targets: per-step mean of group gh's actual masked policies
                std::vector<double> tgt(T * n * uas, 0.0);
                std::vector<double> weight(T * n * uas, 0.0);
                std::size_t members = 0;
                for (std::size_t t = 0; t < T; ++t) {
                    std::vector<double> mean_row(uas, 0.0);
                    members = 0;
                    for (std::size_t a = 0; a < n; ++a) {
                        if (info.agent_group[a] != gh) continue;
                        ++members;
                        const double* row = mp.probs.data().data() + (t * n + a) * uas;
                        for (std::size_t k = 0; k < uas; ++k) mean_row[k] += row[k];
                    }
                    for (std::size_t k = 0; k < uas; ++k) {
                        mean_row[k] /= static_cast<double>(members);
                    }
                    for (std::size_t a = 0; a < n; ++a) {
                        if (info.agent_group[a] == gh) continue;
                        double* trow = tgt.data() + (t * n + a) * uas;
                        double* wrow = weight.data() + (t * n + a) * uas;
                        for (std::size_t k = 0; k < uas; ++k) {
                            trow[k] = mean_row[k];
                            wrow[k] = am_h[k] ? 1.0 : 0.0;
                        }
                    }
                }
                Tensor tgt_t = Tensor::from_vector({T * n, uas}, std::move(tgt));
                Tensor w_t = Tensor::from_vector({T * n, uas}, std::move(weight));
                Tensor part = grad::reduce_sum(grad::mul(grad::square(grad::sub(probs_inv, tgt_t)), w_t));
                sq_sum = grad::add(sq_sum, part);
                count += static_cast<double>(T * (n - members) * avail_h);
            }
            cgi_loss = grad::scalar_mul(sq_sum, 1.0 / count);
        }

        Tensor total = umappo_total_loss(actor, v_loss, cgi_loss, hyper.lambda_v,
                                         cgi_active_ ? hyper.lambda_i : 0.0);
        if (!std::isfinite(total.item())) {
            throw NumericalError("u-mappo: non-finite loss at step " + std::to_string(t_total_) +
                                 " (actor=" + std::to_string(actor.item()) +
                                 ", value=" + std::to_string(v_loss.item()) +
                                 ", cgi=" + std::to_string(cgi_loss.item()) + ")");
        }
        sum_actor += actor.item();
        sum_value += v_loss.item();
        sum_cgi += cgi_loss.item();
        sum_total += total.item();
        double mean_ent = 0.0;
        for (double e : mp.entropy.data()) mean_ent += e;
        sum_entropy += mean_ent / static_cast<double>(mp.entropy.numel());

        tape_.backward(total);
        grad::clip_grad_norm(params_, hyper.grad_clip);
        adam_->step(params_, hyper.lr);
        params_.zero_grad();
    }

    const double inv_u = 1.0 / static_cast<double>(hyper.ppo_updates);
    MetricsRecord rec;
    rec.step = t_total_;
    rec.episode = episode_count_;
    rec.loss_total = sum_total * inv_u;
    rec.loss_actor = sum_actor * inv_u;
    rec.loss_value = sum_value * inv_u;
    rec.loss_cgi = cgi_active_ ? sum_cgi * inv_u : NAN;
    rec.entropy = sum_entropy * inv_u;
    rec.seed = settings_.seed;
    return rec;
}

MetricsRecord UMappoTrainer::train_iteration() {
    Collected collected = collect_episode();
    MetricsRecord rec = update(collected);
    last_episode_ = std::move(collected.episode);
    return rec;
}

EvalResult UMappoTrainer::evaluate(std::size_t episodes, PolicyMode mode) {
    const std::uint64_t base = derive_seed(eval_seed_base_, eval_round_++);
    return evaluate_policy(*eval_env_, params_, trunk_cfg_, base, episodes, mode);
}

void UMappoTrainer::run(const MetricsSink& sink) {
    std::uint64_t next_eval = settings_.eval_interval;
    bool last_had_eval = false;
    while (t_total_ < settings_.hyper.total_steps) {
        MetricsRecord rec = train_iteration();
        last_had_eval = false;
        if (t_total_ >= next_eval) {
            EvalResult ev = evaluate(settings_.eval_episodes);
            rec.has_eval = true;
            rec.eval_wr = ev.wr;
            rec.eval_return = ev.mean_return;
            rec.eval_length = ev.mean_length;
            while (next_eval <= t_total_) next_eval += settings_.eval_interval;
            last_had_eval = true;
        }
        sink(rec);
    }
    if (!last_had_eval) {
        EvalResult ev = evaluate(settings_.eval_episodes);
        MetricsRecord rec;
        rec.step = t_total_;
        rec.episode = episode_count_;
        rec.has_eval = true;
        rec.eval_wr = ev.wr;
        rec.eval_return = ev.mean_return;
        rec.eval_length = ev.mean_length;
        rec.seed = settings_.seed;
        sink(rec);
    }
    if (illegal_actions_ != 0) {
        throw ContractError("u-mappo: illegal actions were selected during training");
    }
}

nlohmann::json UMappoTrainer::architecture() const {
    const auto& info = env_->info();
    return {
        {"algo", "u-mappo"},
        {"obs_dim", info.obs_dim},
        {"state_dim", info.state_dim},
        {"uas_dim", info.uas.size},
        {"hidden", trunk_cfg_.hidden},
        {"n_agents", info.n_agents},
        {"layout", info.uas.layout == act::Layout::Unified ? "unified" : "overlapped"},
        {"use_uas", settings_.flags.use_uas},
        {"use_cgi", settings_.flags.use_cgi},
    };
}

} // namespace uasrl::algos
