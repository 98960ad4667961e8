"""End-to-end smoke tests of the python bindings."""

import json
import math

import pytest

import uasrl


def test_build_uas_and_masks():
    marines = uasrl.GroupSpec(0, ally_act=False, enemy_act=True, agent_ids=[0, 1])
    medivacs = uasrl.GroupSpec(1, ally_act=True, enemy_act=False, agent_ids=[2])
    uas, masks = uasrl.build_uas([marines, medivacs], 2, 3)
    assert uas.size == 11
    assert uas.ally_offset == 6
    assert uas.enemy_offset == 8
    assert masks[0][:6] == [1] * 6
    assert masks[0][6:8] == [0, 0]
    assert masks[0][8:] == [1, 1, 1]
    assert masks[1][6:8] == [1, 1]

    layout = json.dumps(uas.to_json())
    assert "enemy_block" in layout


def test_mask_policy_normalizes_and_zeroes():
    probs = uasrl.mask_policy([1.0, 2.0, 3.0, 4.0], [0, 1, 1, 0], kind="logits")
    assert probs[0] == 0.0
    assert probs[3] == 0.0
    assert abs(sum(probs) - 1.0) < 1e-12
    assert probs[2] > probs[1]

    with pytest.raises(ValueError):
        uasrl.mask_policy([1.0, 2.0], [0, 0], kind="logits")


def test_mask_q_argmax_tie_break():
    assert uasrl.mask_q_argmax([5.0, 1.0, 9.0, 2.0], [1, 1, 0, 1]) == 0
    assert uasrl.mask_q_argmax([3.0, 3.0, 3.0], [1, 1, 1]) == 0


def test_shared_optimum_oracles():
    assert uasrl.analytic_shared_optimum(2, 1.0) == pytest.approx(0.0625, abs=1e-15)
    result = uasrl.brute_force_shared_optimum(2, 4, 6, grid_resolution=20)
    assert result["gap"] < 1e-3
    assert result["argmax"][0] == pytest.approx(0.5)

    det = uasrl.uas_deterministic_optimum(2, 4, 6, obs_mode="id")
    assert det["attainable"]
    assert det["value"] == 1.0
    blind = uasrl.uas_deterministic_optimum(2, 4, 6, obs_mode="blind")
    assert not blind["attainable"]
    assert blind["shared_bound"] == pytest.approx(0.0625)


def test_epsilon_schedule_and_gae():
    assert uasrl.epsilon_schedule(0) == 1.0
    assert uasrl.epsilon_schedule(50_000) == pytest.approx(0.05)
    adv, ret = uasrl.compute_gae([1.0], [0.5, 0.2], gamma=0.99, gae_lambda=0.95)
    assert adv[0] == pytest.approx(0.698)
    assert ret[0] == pytest.approx(1.198)


def test_proposition_game_round_trip():
    game = uasrl.PropositionGame(2, 4, 6, obs_mode="id")
    state = game.reset(seed=0)
    assert len(state["obs"]) == game.n_agents == 4
    actions = [game.required_action(a) for a in range(game.n_agents)]
    out = game.step(actions)
    assert out["reward"] == 1.0
    assert out["terminated"] and out["won"]


def test_skirmish_runs_legal_random_episodes():
    import random

    env = uasrl.Skirmish(attackers=3, healers=1, enemies=4)
    rng = random.Random(0)
    state = env.reset(seed=1)
    total = 0.0
    for _ in range(env.episode_limit):
        actions = []
        for bits in state["avail"]:
            legal = [i for i, b in enumerate(bits) if b]
            actions.append(rng.choice(legal))
        out = env.step(actions)
        total += out["reward"]
        if out["terminated"]:
            break
        state = {"obs": out["obs"], "avail": out["avail"]}
    assert total <= env.max_episode_reward()
    assert len(env.state()) == env.state_dim


def test_verify_suites_pass():
    for suite in ("masks", "proposition", "igm"):
        report = uasrl.verify(suite)
        assert report["passed"], report


def test_training_round_trip(tmp_path):
    config = f"""
[env]
name = "proposition"
n = 2
a0 = 2
a1 = 2
obs_mode = "id"

[algo]
name = "u-qmix"
buffer_size = 64
batch_size = 8

[train]
total_steps = 150
seeds = [1]
eval_interval = 75
eval_episodes = 4
out = "{tmp_path / 'runs'}"
"""
    records = uasrl.run_training_from_string(config, jobs=1)
    assert len(records) == 1
    assert records[0]["status"] == "ok"

    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(config)
    report = uasrl.evaluate_checkpoint(
        records[0]["checkpoint_paths"][-1], str(cfg_path), episodes=4
    )
    assert report["episodes"] == 4
    assert 0.0 <= report["wr"] <= 1.0

    csvs = uasrl.export_plots([str(tmp_path / "runs")], str(tmp_path / "plots"))
    assert len(csvs) == 2
