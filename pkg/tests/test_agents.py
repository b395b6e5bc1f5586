import dataclasses

import numpy as np
import pytest

from cv2xsim.config import default_config
from cv2xsim.agents import (FixedAllocationPolicy, MpdqnAgent, OuNoise,
                            RandomPolicy, ReplayBuffer, ga_step,
                            random_population)
from cv2xsim.agents.genetic import GaPopulation

CFG = default_config()
STATE = np.array([0.5, 0.3, 0.7, 0.2])


def test_random_policy_reproducible_and_bounded():
    a = RandomPolicy(CFG, np.random.default_rng(4))
    b = RandomPolicy(CFG, np.random.default_rng(4))
    for _ in range(50):
        rri_a, p_a = a.act(STATE, 0)
        rri_b, p_b = b.act(STATE, 0)
        assert (rri_a, p_a) == (rri_b, p_b)
        assert rri_a in CFG.rri_choices
        assert 0.0 <= p_a <= CFG.p_max_mw


def test_random_policy_rri_frequencies():
    rng = np.random.default_rng(8)
    policy = RandomPolicy(CFG, rng)
    counts = {g: 0 for g in CFG.rri_choices}
    n = 100_000
    for _ in range(n):
        rri, _ = policy.act(STATE, 0)
        counts[rri] += 1
    for g in CFG.rri_choices:
        assert abs(counts[g] / n - 1 / 3) < 0.02


def test_replay_fifo_eviction_and_sampling():
    buf = ReplayBuffer(capacity=5)
    for i in range(6):
        buf.push(np.full(4, float(i)), i % 3, np.zeros(3), float(i), np.zeros(4), False)
    assert len(buf) == 5
    assert buf.oldest()[3] == 1.0  # the original oldest (reward 0) was evicted
    rng = np.random.default_rng(3)
    states, ks, params, rewards, next_states, terms = buf.sample(rng, 5)
    assert sorted(rewards.tolist()) == [1.0, 2.0, 3.0, 4.0, 5.0]  # unique picks
    again = ReplayBuffer(capacity=5)
    for i in range(6):
        again.push(np.full(4, float(i)), i % 3, np.zeros(3), float(i), np.zeros(4), False)
    r2 = again.sample(np.random.default_rng(3), 5)
    assert np.array_equal(rewards, r2[3])
    with pytest.raises(ValueError):
        buf.sample(rng, 6)


def _agent(**cfg_overrides):
    cfg = dataclasses.replace(CFG, **cfg_overrides)
    return MpdqnAgent(cfg, np.random.default_rng(11)), cfg


def test_act_deterministic_without_exploration():
    agent, _ = _agent()
    agent.explore = False
    first = agent.act(STATE, 0)
    for _ in range(5):
        assert agent.act(STATE, 0) == first
    assert first[0] in CFG.rri_choices


def test_act_clamps_power_under_extreme_noise():
    agent, cfg = _agent()
    agent.ou.sigma = 100 * cfg.p_max_mw
    for _ in range(50):
        _, power = agent.act(STATE, 0)
        assert 0.0 <= power <= cfg.p_max_mw


def test_epsilon_schedule():
    agent, _ = _agent()
    assert agent.epsilon == 1.0
    agent.episode = 250
    assert agent.epsilon == pytest.approx(0.525)
    agent.episode = 500
    assert agent.epsilon == pytest.approx(0.05)
    agent.episode = 900
    assert agent.epsilon == pytest.approx(0.05)


def test_full_exploration_matches_random_rri_distribution():
    agent, cfg = _agent()
    counts = {g: 0 for g in cfg.rri_choices}
    n = 30_000
    for _ in range(n):
        rri, _ = agent.act(STATE, 0)
        counts[rri] += 1
    for g in cfg.rri_choices:
        assert abs(counts[g] / n - 1 / 3) < 0.03


def test_multipass_q_invariant_to_other_slots():
    agent, _ = _agent()
    states = np.tile(STATE, (4, 1))
    params = np.array([[10.0, 50.0, 90.0]] * 4)
    q1 = agent.q_values(agent.critic, states, params)
    perturbed = params.copy()
    perturbed[:, 1] = 199.0  # only slot 1 changes
    q2 = agent.q_values(agent.critic, states, perturbed)
    assert np.allclose(q1[:, 0], q2[:, 0])
    assert np.allclose(q1[:, 2], q2[:, 2])
    assert not np.allclose(q1[:, 1], q2[:, 1])


def test_greedy_rri_is_argmax_of_q():
    agent, cfg = _agent()
    agent.explore = False
    params = agent.actor.forward(STATE[None, :])
    q = agent.q_values(agent.critic, STATE[None, :], params)[0]
    rri, power = agent.act(STATE, 0)
    k = int(np.argmax(q))
    assert rri == cfg.rri_choices[k]
    assert power == pytest.approx(float(params[0, k]))


def test_td_targets():
    agent, cfg = _agent()
    rewards = np.array([-1.0, 0.5])
    next_states = np.vstack([STATE, STATE])
    # terminal epochs bootstrap with y = r
    y = agent.td_targets(rewards, next_states, np.array([1.0, 1.0]))
    assert np.allclose(y, rewards)
    agent_zero, _ = _agent(gamma_discount=0.0)
    y0 = agent_zero.td_targets(rewards, next_states, np.array([0.0, 0.0]))
    assert np.allclose(y0, rewards)
    # fixed bootstrap value: y = r + gamma * maxQ
    agent.q_values = lambda critic, s, p: np.full((len(s), 3), 2.0)
    y2 = agent.td_targets(np.array([-1.0]), STATE[None, :], np.array([0.0]))
    assert y2[0] == pytest.approx(-1.0 + 0.99 * 2.0)


def test_train_step_zero_network_perfect_fit():
    agent, cfg = _agent(gamma_discount=0.0, batch_size=8, replay_size=8)
    for net in (agent.critic, agent.critic_target):
        for p in net.params():
            p[...] = 0.0
    for i in range(8):
        agent.replay.push(STATE, i % 3, np.zeros(3), 0.0, STATE, False)
    loss_q, _ = agent.train_step()
    assert loss_q == 0.0


def test_train_step_overfits_frozen_batch():
    agent, cfg = _agent(gamma_discount=0.0, batch_size=16, replay_size=16)
    rng = np.random.default_rng(5)
    for i in range(16):
        s = rng.random(4)
        agent.replay.push(s, int(rng.integers(3)), rng.uniform(0, 100, 3),
                          float(rng.uniform(-1, 0)), s, False)
    first, _ = agent.train_step()
    for _ in range(80):
        last, _ = agent.train_step()
    assert last < first * 0.5


def test_train_step_polyak_update():
    agent, cfg = _agent(batch_size=8, replay_size=8)
    for i in range(8):
        agent.replay.push(STATE, i % 3, np.full(3, 10.0), -0.5, STATE, False)
    before = [p.copy() for p in agent.critic_target.params()]
    agent.train_step()
    for mixed, old, new in zip(agent.critic_target.params(), before,
                               agent.critic.params()):
        assert np.allclose(mixed, cfg.tau_q * new + (1 - cfg.tau_q) * old)


def test_checkpoint_round_trip(tmp_path):
    agent, cfg = _agent()
    agent.explore = False
    path = tmp_path / "ckpt.npz"
    agent.save(path)
    loaded = MpdqnAgent.load(path, cfg, np.random.default_rng(0))
    loaded.explore = False
    assert loaded.act(STATE, 0) == agent.act(STATE, 0)


def test_ou_noise_reset_and_determinism():
    ou1 = OuNoise(3, 0.15, 2.0)
    ou2 = OuNoise(3, 0.15, 2.0)
    r1, r2 = np.random.default_rng(2), np.random.default_rng(2)
    for _ in range(10):
        assert np.allclose(ou1.sample(r1), ou2.sample(r2))
    ou1.reset()
    assert np.allclose(ou1.state, 0.0)


# ------------------------------------------------------------------ genetic
def test_ga_population_respects_constraints():
    rng = np.random.default_rng(6)
    pop = random_population(CFG, rng, size=12)
    assert pop.rri_idx.shape == (12, CFG.n_vehicles)
    assert ((pop.rri_idx >= 0) & (pop.rri_idx < 3)).all()
    assert ((pop.power >= 0) & (pop.power <= CFG.p_max_mw)).all()


def test_ga_step_without_operators_copies_parents():
    rng = np.random.default_rng(7)
    pop = random_population(CFG, rng, size=10)
    fitness = np.linspace(-1.0, 0.0, 10)
    child = ga_step(pop, fitness, np.random.default_rng(8), CFG,
                    crossover_p=0.0, mutation_p=0.0)
    parents = {tuple(row) for row in np.hstack([pop.rri_idx, pop.power])}
    for row in np.hstack([child.rri_idx, child.power]):
        assert tuple(row) in parents
    # elitism pins the best parent into slot 0
    assert np.array_equal(child.rri_idx[0], pop.rri_idx[9])
    assert np.array_equal(child.power[0], pop.power[9])


def test_ga_children_respect_constraints():
    rng = np.random.default_rng(9)
    pop = random_population(CFG, rng, size=10)
    fitness = rng.uniform(-1, 0, size=10)
    for _ in range(5):
        pop = ga_step(pop, fitness, rng, CFG)
        assert ((pop.rri_idx >= 0) & (pop.rri_idx < 3)).all()
        assert ((pop.power >= 0) & (pop.power <= CFG.p_max_mw)).all()


def test_ga_improves_synthetic_fitness():
    # minimize total power: fitness = -sum(power); elitism keeps the best
    rng = np.random.default_rng(10)
    cfg = dataclasses.replace(CFG, n_vehicles=6)
    pop = random_population(cfg, rng, size=16)

    def evaluate(p: GaPopulation) -> np.ndarray:
        return -p.power.sum(axis=1)

    fitness = evaluate(pop)
    best0 = fitness.max()
    history = [best0]
    for _ in range(25):
        pop = ga_step(pop, fitness, rng, cfg)
        fitness = evaluate(pop)
        history.append(fitness.max())
    assert history[-1] > best0
    assert all(b >= a - 1e-12 for a, b in zip(history, history[1:]))  # elitism


def test_fixed_allocation_policy_lookup():
    policy = FixedAllocationPolicy([20, 50, 100], [10.0, 20.0, 30.0])
    assert policy.act(STATE, 1) == (50, 20.0)


def test_evolve_tiny_run_accepts_seed_forms():
    from cv2xsim.agents.genetic import evolve
    cfg = dataclasses.replace(CFG, n_vehicles=5, slots_per_episode=400)
    best_int, history = evolve(cfg, 7, generations=2, population=4, eval_slots=300)
    assert len(history) == 3
    best_seq, history_seq = evolve(cfg, np.random.SeedSequence(7), generations=2,
                                   population=4, eval_slots=300)
    assert history_seq == history
    assert best_seq.rri_by_vehicle == best_int.rri_by_vehicle
    assert best_seq.power_by_vehicle == best_int.power_by_vehicle
