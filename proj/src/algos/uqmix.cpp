#include "uasrl/algos/uqmix.hpp"

#include <cmath>
#include <iostream>

namespace uasrl::algos {

using grad::Tensor;

UQmixTrainer::UQmixTrainer(EnvFactory factory, UQmixSettings settings)
    : settings_(settings), buffer_(settings.hyper.buffer_size), env_seed_rng_(0), policy_rng_(0),
      sample_rng_(0) {
    settings_.hyper.validate();
    env_ = factory();
    eval_env_ = factory();
    const auto& info = env_->info();

    const bool unified = info.uas.layout == act::Layout::Unified;
    if (settings_.flags.use_uas != unified) {
        throw ConfigError("u-qmix: use_uas flag does not match the environment layout");
    }

    grad::Rng master(settings_.seed);
    grad::Rng init_rng = master.split();
    env_seed_rng_ = master.split();
    policy_rng_ = master.split();
    sample_rng_ = master.split();
    eval_seed_base_ = master.next_u64();

    trunk_cfg_ = {.obs_dim = info.obs_dim, .uas_dim = info.uas.size, .hidden = 64};
    mixer_cfg_ = {.n_agents = info.n_agents, .state_dim = info.state_dim, .embed = 32,
                  .hyper_hidden = 64};
    predictor_cfg_ = {.hidden = trunk_cfg_.hidden, .uas_dim = info.uas.size};

    cgi_active_ = settings_.flags.use_cgi && settings_.hyper.lambda_i > 0.0;
    if (cgi_active_ && info.groups.size() < 2) {
        std::cerr << "[u-qmix] notice: single-group system, CGI loss is vacuous and disabled\n";
        cgi_active_ = false;
    }

    params_ = nets::make_trunk(trunk_cfg_, init_rng);
    params_.extend(nets::make_mixer(mixer_cfg_, init_rng));
    if (cgi_active_) params_.extend(nets::make_predictor(predictor_cfg_, init_rng));
    adam_ = std::make_unique<grad::Adam>(params_);

    // the target tracks the TD-relevant parameters (trunk + mixer)
    grad::ParameterSet td_side;
    for (const auto& [name, t] : params_.items()) {
        if (name.rfind("psi.", 0) != 0) td_side.add(name, t);
    }
    target_ = nets::make_target(td_side);
}

double UQmixTrainer::current_lr() const {
    const auto& h = settings_.hyper;
    const auto decays = h.lr_decay_episodes == 0 ? 0 : episode_count_ / h.lr_decay_episodes;
    return h.lr * std::pow(h.lr_decay_factor, static_cast<double>(decays));
}

double UQmixTrainer::current_epsilon() const {
    const auto& h = settings_.hyper;
    return epsilon_schedule(t_total_, h.eps_start, h.eps_end, h.eps_anneal_steps);
}

envs::EpisodeBatch UQmixTrainer::collect_episode() {
    grad::NoGradScope no_grad;
    const auto& info = env_->info();
    const std::size_t n = info.n_agents;
    const std::size_t uas = info.uas.size;

    envs::EpisodeBatch ep;
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

        const double eps = current_epsilon();
        std::vector<std::size_t> actions(n);
        for (std::size_t a = 0; a < n; ++a) {
            const double* row = fwd.output.data().data() + a * uas;
            std::size_t action;
            if (policy_rng_.uniform01() < eps) {
                // uniform draw over the available actions
                std::vector<std::size_t> avail_ids;
                avail_ids.reserve(uas);
                for (std::size_t k = 0; k < uas; ++k) {
                    if (avail[a].bits[k]) avail_ids.push_back(k);
                }
                action = avail_ids[policy_rng_.uniform_index(avail_ids.size())];
            } else {
                act::QVector q{std::vector<double>(row, row + uas)};
                action = act::mask_q_argmax(q, avail[a]);
            }
            if (!avail[a].bits[action]) ++illegal_actions_;
            actions[a] = action;
            ep.actions.push_back(action);
        }
        ep.hidden.insert(ep.hidden.end(), h.data().begin(), h.data().end());

        auto result = env_->step(actions);
        ep.rewards.push_back(result.reward);
        ep.terminated.push_back(result.terminated ? 1 : 0);
        ++ep.length;
        ++t_total_;
        last_actions = actions;
        first = false;
        obs = result.obs;
        avail = result.avail;
        if (result.terminated) {
            ep.won = result.won;
            push_slice(obs, avail);
            break;
        }
    }
    ep.validate();
    ++episode_count_;
    return ep;
}

MetricsRecord UQmixTrainer::update_from_buffer() {
    const auto& info = env_->info();
    const auto& hyper = settings_.hyper;
    const std::size_t n = info.n_agents;
    const std::size_t uas = info.uas.size;
    const std::size_t B = hyper.batch_size;

    auto batch = buffer_.sample(B, sample_rng_);
    std::size_t L = 0;
    for (const auto* ep : batch) L = std::max(L, ep->length);

    // time-major padded input tensors; padded rows reuse each episode's
    // final slice so masks stay well-formed, and a valid-bit excludes them
    auto obs_tensor_at = [&](std::size_t t) {
        std::vector<const double*> rows(B * n);
        for (std::size_t b = 0; b < B; ++b) {
            const auto* ep = batch[b];
            const std::size_t tt = std::min(t, ep->length);
            for (std::size_t a = 0; a < n; ++a) rows[b * n + a] = ep->obs_at(tt, a);
        }
        return rows_tensor(rows, info.obs_dim);
    };
    auto state_tensor_at = [&](std::size_t t) {
        std::vector<const double*> rows(B);
        for (std::size_t b = 0; b < B; ++b) {
            rows[b] = batch[b]->state_at(std::min(t, batch[b]->length));
        }
        return rows_tensor(rows, info.state_dim);
    };
    auto actions_at = [&](std::size_t t) {
        std::vector<std::size_t> acts(B * n, act::kStopAction);
        for (std::size_t b = 0; b < B; ++b) {
            if (t < batch[b]->length) {
                for (std::size_t a = 0; a < n; ++a) acts[b * n + a] = batch[b]->action_at(t, a);
            }
        }
        return acts;
    };
    auto last_action_tensor_at = [&](std::size_t t) {
        if (t == 0) return Tensor::zeros({B * n, uas});
        return onehot_rows(actions_at(t - 1), uas);
    };

    tape_.reset();
    grad::TapeScope scope(tape_);

    // current net over t = 0..L-1
    std::vector<Tensor> q_outputs(L), hiddens(L);
    {
        Tensor h = Tensor::zeros({B * n, trunk_cfg_.hidden});
        for (std::size_t t = 0; t < L; ++t) {
            auto step = nets::trunk_forward(params_, trunk_cfg_, obs_tensor_at(t),
                                            last_action_tensor_at(t), h);
            h = step.h_next;
            q_outputs[t] = std::move(step.output);
            hiddens[t] = h;
        }
    }

    // frozen target net over t = 0..L (never requires grad, never on tape)
    std::vector<Tensor> target_outputs(L + 1);
    {
        Tensor h = Tensor::zeros({B * n, trunk_cfg_.hidden});
        for (std::size_t t = 0; t <= L; ++t) {
            auto step = nets::trunk_forward(target_.params, trunk_cfg_, obs_tensor_at(t),
                                            last_action_tensor_at(t), h);
            h = step.h_next;
            target_outputs[t] = std::move(step.output);
        }
    }

    // per-step Q_tot of the chosen actions + TD targets
    std::vector<Tensor> qtot_steps(L);
    std::vector<double> y_flat(L * B, 0.0);
    std::vector<std::uint8_t> valid_flat(L * B, 0);
    for (std::size_t t = 0; t < L; ++t) {
        Tensor chosen = grad::reshape(grad::gather_lastdim(q_outputs[t], actions_at(t)), {B, n});
        qtot_steps[t] = mixer_forward(params_, mixer_cfg_, chosen, state_tensor_at(t));

        // target max over next-step availability
        std::vector<double> max_next(B * n, 0.0);
        const auto& tq = target_outputs[t + 1].data();
        for (std::size_t b = 0; b < B; ++b) {
            const auto* ep = batch[b];
            if (t >= ep->length) continue;
            const std::size_t tt = std::min(t + 1, ep->length);
            for (std::size_t a = 0; a < n; ++a) {
                const std::uint8_t* am = ep->avail_at(tt, a);
                const double* row = tq.data() + (b * n + a) * uas;
                double best = 0.0;
                bool found = false;
                for (std::size_t k = 0; k < uas; ++k) {
                    if (!am[k]) continue;
                    if (!found || row[k] > best) {
                        best = row[k];
                        found = true;
                    }
                }
                max_next[b * n + a] = best;
            }
        }
        Tensor max_next_t = Tensor::from_vector({B, n}, std::move(max_next));
        Tensor tgt_qtot = mixer_forward(target_.params, mixer_cfg_, max_next_t, state_tensor_at(t + 1));
        for (std::size_t b = 0; b < B; ++b) {
            const auto* ep = batch[b];
            if (t >= ep->length) continue;
            valid_flat[t * B + b] = 1;
            const bool term = ep->terminated[t] != 0;
            y_flat[t * B + b] =
                ep->rewards[t] + (term ? 0.0 : hyper.gamma * tgt_qtot.data()[b]);
        }
    }
    Tensor qtot_all = grad::reshape(grad::concat_rows(qtot_steps), {L * B});
    Tensor td = td_loss(qtot_all, y_flat, valid_flat);

    Tensor cgi_loss = Tensor::scalar(0.0);
    if (cgi_active_) {
        ++cgi_evaluations_;
        Tensor h_all = grad::concat_rows(hiddens); // [L*B*n, hidden]
        Tensor preds = nets::predictor_forward(params_, predictor_cfg_, h_all);
        Tensor sq_sum = Tensor::scalar(0.0);
        double count = 0.0;
        for (std::size_t gh = 0; gh < info.groups.size(); ++gh) {
            const auto& am_h = info.group_masks[gh].bits;
            const std::size_t avail_h = info.group_masks[gh].count();
            std::size_t members = 0;
            for (std::size_t a = 0; a < n; ++a) members += info.agent_group[a] == gh ? 1 : 0;

            std::vector<double> tgt(L * B * n * uas, 0.0);
            std::vector<double> weight(L * B * n * uas, 0.0);
            std::size_t valid_rows = 0;
            for (std::size_t t = 0; t < L; ++t) {
                const auto& qd = q_outputs[t].data();
                for (std::size_t b = 0; b < B; ++b) {
                    if (t >= batch[b]->length) continue;
                    std::vector<double> mean_row(uas, 0.0);
                    for (std::size_t a = 0; a < n; ++a) {
                        if (info.agent_group[a] != gh) continue;
                        const double* row = qd.data() + (b * n + a) * uas;
                        for (std::size_t k = 0; k < uas; ++k) mean_row[k] += row[k];
                    }
                    for (std::size_t k = 0; k < uas; ++k) {
                        mean_row[k] /= static_cast<double>(members);
                    }
                    for (std::size_t a = 0; a < n; ++a) {
                        if (info.agent_group[a] == gh) continue;
                        ++valid_rows;
                        const std::size_t base = ((t * B + b) * n + a) * uas;
                        for (std::size_t k = 0; k < uas; ++k) {
                            tgt[base + k] = mean_row[k];
                            weight[base + k] = am_h[k] ? 1.0 : 0.0;
                        }
                    }
                }
            }
            Tensor tgt_t = Tensor::from_vector({L * B * n, uas}, std::move(tgt));
            Tensor w_t = Tensor::from_vector({L * B * n, uas}, std::move(weight));
            Tensor part = grad::reduce_sum(grad::mul(grad::square(grad::sub(preds, tgt_t)), w_t));
            sq_sum = grad::add(sq_sum, part);
            count += static_cast<double>(valid_rows) * static_cast<double>(avail_h);
        }
        cgi_loss = grad::scalar_mul(sq_sum, 1.0 / count);
    }

    Tensor total = uqmix_total_loss(td, cgi_loss, cgi_active_ ? hyper.lambda_i : 0.0);
    if (!std::isfinite(total.item())) {
        throw NumericalError("u-qmix: non-finite loss at step " + std::to_string(t_total_) +
                             " (td=" + std::to_string(td.item()) +
                             ", cgi=" + std::to_string(cgi_loss.item()) + ")");
    }

    MetricsRecord rec;
    rec.step = t_total_;
    rec.episode = episode_count_;
    rec.loss_td = td.item();
    rec.loss_cgi = cgi_active_ ? cgi_loss.item() : NAN;
    rec.loss_total = total.item();
    rec.epsilon = current_epsilon();
    rec.seed = settings_.seed;

    tape_.backward(total);
    grad::clip_grad_norm(params_, hyper.grad_clip);
    adam_->step(params_, current_lr());
    params_.zero_grad();
    ++update_count_;

    ++target_.iterations_since_sync;
    if (target_.iterations_since_sync >= hyper.target_sync_interval) {
        grad::ParameterSet td_side;
        for (const auto& [name, t] : params_.items()) {
            if (name.rfind("psi.", 0) != 0) td_side.add(name, t);
        }
        nets::sync_target(td_side, target_);
    }
    return rec;
}

MetricsRecord UQmixTrainer::train_iteration() {
    envs::EpisodeBatch ep = collect_episode();
    last_episode_ = ep;
    buffer_.add(std::move(ep));
    if (buffer_.size() >= settings_.hyper.batch_size) {
        return update_from_buffer();
    }
    MetricsRecord rec;
    rec.step = t_total_;
    rec.episode = episode_count_;
    rec.epsilon = current_epsilon();
    rec.seed = settings_.seed;
    return rec;
}

EvalResult UQmixTrainer::evaluate(std::size_t episodes, PolicyMode mode) {
    const std::uint64_t base = derive_seed(eval_seed_base_, eval_round_++);
    return evaluate_policy(*eval_env_, params_, trunk_cfg_, base, episodes, mode);
}

void UQmixTrainer::run(const MetricsSink& sink) {
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
        rec.epsilon = current_epsilon();
        rec.has_eval = true;
        rec.eval_wr = ev.wr;
        rec.eval_return = ev.mean_return;
        rec.eval_length = ev.mean_length;
        rec.seed = settings_.seed;
        sink(rec);
    }
    if (illegal_actions_ != 0) {
        throw ContractError("u-qmix: illegal actions were selected during training");
    }
}

nlohmann::json UQmixTrainer::architecture() const {
    const auto& info = env_->info();
    return {
        {"algo", "u-qmix"},
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
