#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "uasrl/algos/losses.hpp"
#include "uasrl/algos/replay.hpp"
#include "uasrl/algos/umappo.hpp"
#include "uasrl/algos/uqmix.hpp"
#include "uasrl/envs/proposition.hpp"

using namespace uasrl;
using namespace uasrl::algos;
using grad::Tensor;

namespace {

EnvFactory prop_factory(act::Layout layout, envs::ObsMode mode = envs::ObsMode::Id,
                        std::size_t n = 2, std::size_t a0 = 2, std::size_t a1 = 2) {
    envs::PropositionConfig cfg{n, a0, a1, mode, layout};
    return [cfg]() { return std::make_unique<envs::PropositionGame>(cfg); };
}

envs::EpisodeBatch tiny_episode(std::size_t length, double reward_last = 1.0) {
    envs::EpisodeBatch ep;
    ep.n_agents = 1;
    ep.obs_dim = 1;
    ep.state_dim = 1;
    ep.uas_dim = 2;
    ep.hidden_dim = 1;
    ep.length = length;
    ep.obs.assign((length + 1) * 1 * 1, 0.5);
    ep.states.assign((length + 1) * 1, 1.0);
    ep.avail.assign((length + 1) * 1 * 2, 1);
    for (std::size_t t = 0; t <= length; ++t) ep.avail[t * 2] = 0; // null off
    ep.actions.assign(length, 1);
    ep.rewards.assign(length, 0.0);
    ep.rewards.back() = reward_last;
    ep.terminated.assign(length, 0);
    ep.terminated.back() = 1;
    ep.hidden.assign(length * 1 * 1, 0.0);
    ep.won = reward_last > 0;
    return ep;
}

} // namespace

TEST_SUITE("algos") {

TEST_CASE("one-step gae matches the closed form") {
    auto g = compute_gae({1.0}, {0.5, 0.2}, 0.99, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(1.0 + 0.99 * 0.2 - 0.5).epsilon(1e-12));
    CHECK(g.advantages[0] == doctest::Approx(0.698).epsilon(1e-12));
    CHECK(g.returns[0] == doctest::Approx(0.698 + 0.5).epsilon(1e-12));
}

TEST_CASE("gae with lambda=0 reduces to td residuals") {
    grad::Rng rng(3);
    std::vector<double> rewards(10), values(11);
    for (auto& r : rewards) r = rng.gaussian();
    for (auto& v : values) v = rng.gaussian();
    auto g = compute_gae(rewards, values, 0.9, 0.0);
    for (std::size_t t = 0; t < 10; ++t) {
        const double delta = rewards[t] + 0.9 * values[t + 1] - values[t];
        CHECK(g.advantages[t] == doctest::Approx(delta).epsilon(1e-12));
    }
}

TEST_CASE("recursive gae equals the direct double sum") {
    grad::Rng rng(4);
    std::vector<double> rewards(20), values(21);
    for (auto& r : rewards) r = rng.gaussian();
    for (auto& v : values) v = rng.gaussian();
    const double gamma = 0.99, lam = 0.95;
    auto g = compute_gae(rewards, values, gamma, lam);
    for (std::size_t t = 0; t < 20; ++t) {
        double direct = 0.0;
        for (std::size_t l = 0; t + l < 20; ++l) {
            const double delta =
                rewards[t + l] + gamma * values[t + l + 1] - values[t + l];
            direct += std::pow(gamma * lam, static_cast<double>(l)) * delta;
        }
        CHECK(std::fabs(g.advantages[t] - direct) < 1e-12);
    }
    CHECK_THROWS_AS(compute_gae(rewards, rewards, gamma, lam), ContractError);
}

TEST_CASE("standardization guards degenerate batches") {
    auto z = standardize({3.0});
    CHECK(z[0] == 3.0); // single sample keeps its raw signal
    auto s = standardize({1.0, 2.0, 3.0});
    double mean = (s[0] + s[1] + s[2]) / 3.0;
    CHECK(std::fabs(mean) < 1e-12);
}

TEST_CASE("ppo surrogate at ratio 1 is minus the mean advantage") {
    Tensor logp = Tensor::from_vector({3}, {-0.5, -1.0, -2.0}, true);
    Tensor old_logp = logp.detach();
    Tensor adv = Tensor::from_vector({3}, {1.0, -2.0, 0.5});
    Tensor entropy = Tensor::zeros({3});
    Tensor loss = ppo_actor_loss(logp, old_logp, adv, entropy, 0.2, 0.0);
    CHECK(loss.item() == doctest::Approx(-(1.0 - 2.0 + 0.5) / 3.0).epsilon(1e-12));
}

TEST_CASE("ppo clip arithmetic on a single sample") {
    // ratio 1.5 with eps 0.2 and A=+1: min(1.5, 1.2) = 1.2 -> loss -1.2
    Tensor logp = Tensor::from_vector({1}, {std::log(1.5)}, true);
    Tensor old_logp = Tensor::from_vector({1}, {0.0});
    Tensor adv = Tensor::from_vector({1}, {1.0});
    Tensor entropy = Tensor::zeros({1});
    Tensor loss = ppo_actor_loss(logp, old_logp, adv, entropy, 0.2, 0.0);
    CHECK(loss.item() == doctest::Approx(-1.2).epsilon(1e-12));
}

TEST_CASE("vectorized ppo loss equals the per-sample scalar oracle") {
    grad::Rng rng(5);
    const std::size_t M = 1000;
    std::vector<double> lp(M), olp(M), adv(M), ent(M);
    for (std::size_t i = 0; i < M; ++i) {
        lp[i] = -std::fabs(rng.gaussian());
        olp[i] = -std::fabs(rng.gaussian());
        adv[i] = rng.gaussian();
        ent[i] = std::fabs(rng.gaussian());
    }
    Tensor loss = ppo_actor_loss(Tensor::from_vector({M}, lp, true), Tensor::from_vector({M}, olp),
                                 Tensor::from_vector({M}, adv), Tensor::from_vector({M}, ent), 0.2,
                                 0.01);
    double expect = 0.0, ent_mean = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double ratio = std::exp(lp[i] - olp[i]);
        const double clipped = std::min(std::max(ratio, 0.8), 1.2);
        expect += std::min(ratio * adv[i], clipped * adv[i]);
        ent_mean += ent[i];
    }
    expect = -expect / M - 0.01 * ent_mean / M;
    CHECK(std::fabs(loss.item() - expect) < 1e-10);
}

TEST_CASE("value loss obeys the clipped max semantics") {
    Tensor v = Tensor::from_vector({2}, {1.0, 1.0}, true);
    Tensor v_old = Tensor::from_vector({2}, {1.0, 1.0});
    Tensor ret = Tensor::from_vector({2}, {1.0, 1.0});
    CHECK(value_loss(v, v_old, ret, 0.2).item() == 0.0);

    // v_new == R but v_old far away: the clipped branch dominates
    Tensor v2 = Tensor::from_vector({1}, {2.0}, true);
    Tensor v2_old = Tensor::from_vector({1}, {1.0});
    Tensor ret2 = Tensor::from_vector({1}, {2.0});
    const double clipped = 1.0 + 0.2; // v_old + eps
    CHECK(value_loss(v2, v2_old, ret2, 0.2).item() ==
          doctest::Approx((clipped - 2.0) * (clipped - 2.0)).epsilon(1e-12));

    grad::Rng rng(6);
    const std::size_t M = 500;
    std::vector<double> vn(M), vo(M), rr(M);
    for (std::size_t i = 0; i < M; ++i) {
        vn[i] = rng.gaussian();
        vo[i] = rng.gaussian();
        rr[i] = rng.gaussian();
    }
    Tensor loss = value_loss(Tensor::from_vector({M}, vn, true), Tensor::from_vector({M}, vo),
                             Tensor::from_vector({M}, rr), 0.2);
    double expect = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double c = vo[i] + std::min(std::max(vn[i] - vo[i], -0.2), 0.2);
        expect += std::max((vn[i] - rr[i]) * (vn[i] - rr[i]), (c - rr[i]) * (c - rr[i]));
    }
    CHECK(std::fabs(loss.item() - expect / M) < 1e-10);
}

TEST_CASE("cgi losses on the worked examples") {
    std::vector<std::uint8_t> mask{1, 1};
    Tensor pred = Tensor::from_vector({1, 2}, {0.5, 0.5}, true);
    Tensor tgt = Tensor::from_vector({1, 2}, {1.0, 0.0});
    CHECK(cgi_policy_loss(pred, tgt, mask).item() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(cgi_policy_loss(tgt.detach(), tgt, mask).item() == 0.0);

    Tensor qp = Tensor::from_vector({1, 2}, {1.0, 2.0}, true);
    Tensor qt = Tensor::from_vector({1, 2}, {3.0, 2.0});
    CHECK(cgi_value_loss(qp, qt, mask).item() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cgi regression on a frozen target decreases monotonically") {
    grad::Rng rng(7);
    nets::PredictorConfig cfg{.hidden = 4, .uas_dim = 6};
    auto psi = nets::make_predictor(cfg, rng);
    grad::Adam adam(psi);
    Tensor h = testutil::random_tensor({5, 4}, rng, false);
    Tensor target = testutil::random_tensor({5, 6}, rng, false, 0.5);
    std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1};
    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
        grad::Tape tape;
        grad::TapeScope scope(tape);
        Tensor pred = nets::predictor_forward(psi, cfg, h);
        Tensor loss = cgi_value_loss(pred, target, mask);
        CHECK(loss.item() < prev + 1e-12);
        prev = loss.item();
        tape.backward(loss);
        adam.step(psi, 1e-2);
        psi.zero_grad();
    }
}

TEST_CASE("total losses with the published coefficients") {
    Tensor a = Tensor::scalar(1.0, true);
    Tensor v = Tensor::scalar(2.0, true);
    Tensor c = Tensor::scalar(3.0, true);
    CHECK(umappo_total_loss(a, v, c, 1.0, 0.8).item() == doctest::Approx(5.4).epsilon(1e-12));
    CHECK(uqmix_total_loss(Tensor::scalar(2.0), Tensor::scalar(1.0), 0.06).item() ==
          doctest::Approx(2.06).epsilon(1e-12));

    // lambda_i = 0 removes the cgi contribution from gradients
    grad::Tape tape;
    grad::TapeScope scope(tape);
    Tensor c2 = Tensor::scalar(3.0, true);
    Tensor total = umappo_total_loss(grad::square(a), grad::square(v), grad::square(c2), 1.0, 0.0);
    tape.backward(total);
    CHECK(c2.grad_or_zeros()[0] == 0.0);
    CHECK(a.grad_or_zeros()[0] != 0.0);
}

TEST_CASE("td targets and loss on hand-computed values") {
    // terminal step keeps only the reward
    auto y = td_targets({216.0}, {1}, {5.0}, 0.99);
    CHECK(y[0] == 216.0);

    // hand-built 2-step episode
    auto y2 = td_targets({1.0, 2.0}, {0, 1}, {3.0, 7.0}, 0.9);
    CHECK(y2[0] == doctest::Approx(1.0 + 0.9 * 3.0).epsilon(1e-12));
    CHECK(y2[1] == doctest::Approx(2.0).epsilon(1e-12));
    Tensor qtot = Tensor::from_vector({2}, {3.5, 1.5}, true);
    Tensor loss = td_loss(qtot, y2, {1, 1});
    const double expect = ((3.5 - 3.7) * (3.5 - 3.7) + (1.5 - 2.0) * (1.5 - 2.0)) / 2.0;
    CHECK(std::fabs(loss.item() - expect) < 1e-10);

    // padding never leaks into the mean
    Tensor padded = Tensor::from_vector({3}, {3.5, 1.5, 999.0}, true);
    Tensor loss_padded = td_loss(padded, {3.7, 2.0, 0.0}, {1, 1, 0});
    CHECK(std::fabs(loss_padded.item() - expect) < 1e-10);

    // q_tot == y everywhere gives zero loss
    Tensor exact = Tensor::from_vector({2}, {y2[0], y2[1]}, true);
    CHECK(td_loss(exact, y2, {1, 1}).item() == 0.0);
}

TEST_CASE("epsilon schedule endpoints and midpoint") {
    CHECK(epsilon_schedule(0) == 1.0);
    CHECK(epsilon_schedule(50'000) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(epsilon_schedule(1'000'000) == 0.05);
    CHECK(epsilon_schedule(25'000) == doctest::Approx(0.525).epsilon(1e-12));
}

TEST_CASE("replay buffer keeps complete episodes up to capacity") {
    ReplayBuffer buf(5);
    for (int i = 0; i < 8; ++i) buf.add(tiny_episode(2, static_cast<double>(i)));
    CHECK(buf.size() == 5);
    grad::Rng rng(8);
    auto batch = buf.sample(5, rng);
    CHECK(batch.size() == 5);
    // without replacement: all five pointers distinct
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = i + 1; j < batch.size(); ++j) CHECK(batch[i] != batch[j]);
    }
    CHECK_THROWS_AS(buf.sample(6, rng), ContractError);

    envs::EpisodeBatch incomplete = tiny_episode(2);
    incomplete.terminated.back() = 0;
    CHECK_THROWS_AS(buf.add(incomplete), ContractError);
}

TEST_CASE("replay sampling is uniform (chi-square over 1e4 draws)") {
    const std::size_t K = 50, B = 10, draws = 10'000;
    ReplayBuffer buf(K);
    for (std::size_t i = 0; i < K; ++i) buf.add(tiny_episode(1));
    grad::Rng rng(9);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t d = 0; d < draws; ++d) {
        for (const auto* ep : buf.sample(B, rng)) {
            counts[static_cast<std::size_t>(ep - &buf.at(0))]++;
        }
    }
    const double expected = static_cast<double>(draws * B) / K;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        const double diff = static_cast<double>(counts[i]) - expected;
        chi2 += diff * diff / expected;
    }
    // 0.999 quantile of chi-square with 49 dof; exceeding it would reject
    // uniformity at p < 0.001
    CHECK(chi2 < 85.4);
}

TEST_CASE("u-mappo trains deterministically and honors ablation flags") {
    UMappoSettings settings;
    settings.hyper.total_steps = 40;
    settings.seed = 11;
    settings.flags = {.use_uas = true, .use_cgi = true};
    auto run = [&]() {
        UMappoTrainer trainer(prop_factory(act::Layout::Unified), settings);
        std::vector<double> losses;
        for (int i = 0; i < 30; ++i) losses.push_back(trainer.train_iteration().loss_total);
        return losses;
    };
    CHECK(run() == run());

    UMappoTrainer trainer(prop_factory(act::Layout::Unified), settings);
    for (int i = 0; i < 3; ++i) trainer.train_iteration();
    CHECK(trainer.cgi_active());
    CHECK(trainer.cgi_evaluations() == 3 * settings.hyper.ppo_updates);
    CHECK(trainer.illegal_action_count() == 0);
    bool psi_on_tape = false;
    for (const auto& [name, t] : trainer.parameters().items()) {
        if (name.rfind("psi.", 0) == 0) {
            psi_on_tape = psi_on_tape || trainer.last_update_tape().records(t);
        }
    }
    CHECK(psi_on_tape);

    // vanilla flags: no predictor anywhere, overlapped layout enforced
    settings.flags = {.use_uas = false, .use_cgi = false};
    CHECK_THROWS_AS(UMappoTrainer(prop_factory(act::Layout::Unified), settings), ConfigError);
    UMappoTrainer vanilla(prop_factory(act::Layout::Overlapped), settings);
    for (int i = 0; i < 3; ++i) vanilla.train_iteration();
    CHECK(!vanilla.cgi_active());
    CHECK(vanilla.cgi_evaluations() == 0);
    for (const auto& [name, t] : vanilla.parameters().items()) {
        CHECK(name.rfind("psi.", 0) != 0);
    }
}

TEST_CASE("cgi optimization alone never changes trunk outputs") {
    grad::Rng rng(12);
    nets::TrunkConfig tcfg{.obs_dim = 3, .uas_dim = 5, .hidden = 4};
    nets::PredictorConfig pcfg{.hidden = 4, .uas_dim = 5};
    auto trunk = nets::make_trunk(tcfg, rng);
    auto psi = nets::make_predictor(pcfg, rng);
    Tensor obs = testutil::random_tensor({2, 3}, rng, false);
    Tensor acts = testutil::random_tensor({2, 5}, rng, false);
    auto before = trunk_forward(trunk, tcfg, obs, acts, Tensor::zeros({2, 4})).output.data();

    grad::Adam adam(psi); // optimizer only sees the predictor
    std::vector<std::uint8_t> mask{1, 1, 1, 0, 0};
    for (int step = 0; step < 20; ++step) {
        grad::Tape tape;
        grad::TapeScope scope(tape);
        auto out = trunk_forward(trunk, tcfg, obs, acts, Tensor::zeros({2, 4}));
        Tensor pred = nets::predictor_forward(psi, pcfg, out.h_next);
        Tensor target = Tensor::from_vector({2, 5}, std::vector<double>(10, 0.2));
        Tensor loss = cgi_value_loss(pred, target, mask);
        tape.backward(loss);
        adam.step(psi, 1e-2);
        psi.zero_grad();
        trunk.zero_grad();
    }
    auto after = trunk_forward(trunk, tcfg, obs, acts, Tensor::zeros({2, 4})).output.data();
    CHECK(before == after);
}

TEST_CASE("u-qmix trains deterministically with buffer and sync bookkeeping") {
    UQmixSettings settings;
    settings.hyper.total_steps = 80;
    settings.hyper.buffer_size = 64;
    settings.hyper.batch_size = 8;
    settings.hyper.target_sync_interval = 5;
    settings.seed = 13;
    settings.flags = {.use_uas = true, .use_cgi = true};
    auto run = [&]() {
        UQmixTrainer trainer(prop_factory(act::Layout::Unified), settings);
        std::vector<double> losses;
        for (int i = 0; i < 40; ++i) losses.push_back(trainer.train_iteration().loss_total);
        return losses;
    };
    auto l1 = run();
    auto l2 = run();
    REQUIRE(l1.size() == l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i) {
        const bool same = (std::isnan(l1[i]) && std::isnan(l2[i])) || l1[i] == l2[i];
        CHECK(same);
    }
    // warmup iterations emit records without losses
    CHECK(std::isnan(l1[0]));
    CHECK(!std::isnan(l1.back()));

    UQmixTrainer trainer(prop_factory(act::Layout::Unified), settings);
    for (int i = 0; i < 20; ++i) trainer.train_iteration();
    CHECK(trainer.buffer().size() <= settings.hyper.buffer_size);
    CHECK(trainer.update_count() == 20 - settings.hyper.batch_size + 1);
    CHECK(trainer.target().sync_count >= 1);
    CHECK(trainer.illegal_action_count() == 0);
    CHECK(trainer.cgi_active());

    settings.flags = {.use_uas = false, .use_cgi = false};
    UQmixTrainer vanilla(prop_factory(act::Layout::Overlapped), settings);
    for (int i = 0; i < 12; ++i) vanilla.train_iteration();
    CHECK(vanilla.cgi_evaluations() == 0);
    for (const auto& [name, t] : vanilla.parameters().items()) {
        CHECK(name.rfind("psi.", 0) != 0);
    }
}

TEST_CASE("u-qmix learning rate decays on episode count") {
    UQmixSettings settings;
    settings.hyper.lr = 1.0;
    settings.hyper.lr_decay_factor = 0.5;
    settings.hyper.lr_decay_episodes = 10;
    UQmixTrainer trainer(prop_factory(act::Layout::Unified), settings);
    CHECK(trainer.current_lr() == 1.0);
    for (int i = 0; i < 10; ++i) trainer.train_iteration();
    CHECK(trainer.current_lr() == 0.5);
    for (int i = 0; i < 10; ++i) trainer.train_iteration();
    CHECK(trainer.current_lr() == 0.25);
}

} // TEST_SUITE
