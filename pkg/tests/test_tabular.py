import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qshaping.agents import (HeuristicPair, HeuristicSet, ReplayBuffer, TabularAgent,
                             heuristic_table, select_action, shaped_td_update)
from qshaping.agents.tabular import batched_q_learning
from qshaping.envs import ChainWalk, EnvConfig
from qshaping.mdp import chain_mdp, value_iteration

from conftest import CHAIN3_Q_STAR


def one_hot(i, n=3):
    return np.eye(n)[i]


class TestShapedUpdate:
    def test_full_step_terminal(self):
        ag = TabularAgent(3, 2, alpha=1.0)
        shaped_td_update(ag, (one_hot(0), 1, 1.0, one_hot(1), True))
        assert ag.q[0, 1] == 1.0

    def test_pure_shaping_term(self):
        ag = TabularAgent(3, 2, alpha=0.0)
        ag.q[:] = np.arange(6).reshape(3, 2)
        shaped_td_update(ag, (one_hot(2), 0, 0.7, one_hot(1), False), h=5.0)
        assert ag.q[2, 0] == 4.0 + 5.0

    def test_only_the_pair_changes(self):
        ag = TabularAgent(3, 2, alpha=0.5)
        ag.q[:] = 1.0
        before = ag.q.copy()
        shaped_td_update(ag, (one_hot(0), 0, 1.0, one_hot(2), False), h=-2.0)
        mask = np.ones_like(before, dtype=bool)
        mask[0, 0] = False
        np.testing.assert_array_equal(ag.q[mask], before[mask])
        assert ag.q[0, 0] == pytest.approx(1.0 + 0.5 * (1.0 + 0.9 - 1.0) - 2.0)

    def test_non_terminal_bootstraps_on_next_state(self):
        ag = TabularAgent(3, 2, alpha=1.0, gamma=0.5)
        ag.q[2] = [3.0, 7.0]
        shaped_td_update(ag, (one_hot(0), 1, 1.0, one_hot(2), False))
        assert ag.q[0, 1] == 1.0 + 0.5 * 7.0

    def test_visit_step_size(self):
        ag = TabularAgent(3, 2, step_size="visit")
        for r in (1.0, 0.0, 0.5):
            shaped_td_update(ag, (one_hot(0), 0, r, one_hot(2), True))
        assert ag.q[0, 0] == pytest.approx(0.5)  # running mean

    def test_chain_with_negative_heuristic_recovers_q_star(self):
        # One seeded run; 1/n step sizes are slow, so this is a single-run check and not a
        # statement about every seed.
        env = ChainWalk(EnvConfig("ChainWalk", params={"num_states": 3}))
        ag = TabularAgent(3, 2, 0.9, step_size="visit", epsilon=1.0, seed=0)
        ag.shape(HeuristicSet.from_pairs([HeuristicPair(one_hot(1), 1, -10.0)]))
        assert ag.q[1, 1] == -10.0
        obs = env.reset(seed=0)
        for _ in range(50_000):
            a = ag.act(obs, explore=True)
            r = env.step(a)
            ag.observe(obs, a, r.reward, r.observation, r.terminated)
            obs = env.reset() if r.terminated or r.truncated else r.observation
        assert np.abs(ag.q - CHAIN3_Q_STAR).max() < 1e-3


class TestAgent:
    def test_greedy_row(self):
        ag = TabularAgent(1, 2)
        ag.q[0] = [0.0, 1.0]
        assert select_action(ag, np.eye(1)[0]) == 1

    def test_greedy_is_deterministic(self):
        ag = TabularAgent(3, 2, seed=1)
        assert {ag.act(one_hot(0)) for _ in range(20)} == {0}

    def test_epsilon_schedule(self):
        ag = TabularAgent(3, 2, epsilon=1.0, epsilon_end=0.0, epsilon_decay_steps=10)
        ag.env_steps = 5
        assert ag.current_epsilon() == 0.5
        ag.env_steps = 50
        assert ag.current_epsilon() == 0.0

    def test_shape_adds_each_pair_once(self):
        ag = TabularAgent(3, 2)
        hs = HeuristicSet.from_pairs([HeuristicPair(one_hot(0), 1, 0.9),
                                      HeuristicPair(one_hot(1), 0, -1.0)])
        ag.shape(hs)
        np.testing.assert_array_equal(ag.q, heuristic_table(hs, 3, 2))

    def test_snapshot_is_independent(self):
        ag = TabularAgent(3, 2, seed=4)
        snap = ag.snapshot()
        snap.q[0, 0] = 9.0
        snap.rng.random()
        assert ag.q[0, 0] == 0.0
        assert ag.rng.random() == TabularAgent(3, 2, seed=4).rng.random()

    def test_save_load(self, tmp_path):
        ag = TabularAgent(3, 2, step_size="visit", seed=2)
        shaped_td_update(ag, (one_hot(0), 1, 1.0, one_hot(1), False))
        ag.rng.random()
        ag.save(tmp_path)
        back = TabularAgent.load(tmp_path)
        np.testing.assert_array_equal(back.q, ag.q)
        np.testing.assert_array_equal(back.counts, ag.counts)
        assert back.rng.random() == ag.rng.random()

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            TabularAgent(2, 2, alpha=1.5)


class TestBatchedQLearning:
    def test_all_lanes_converge(self):
        m = chain_mdp(3, 0.9)
        q, err = batched_q_learning(m, 20_000, 8, seed=1, visit_exponent=0.6,
                                    checkpoints=[20_000], reference=CHAIN3_Q_STAR)
        assert q.shape == (8, 3, 2)
        assert err[20_000].max() < 1e-3

    def test_heuristic_table_shape_checked(self):
        with pytest.raises(ValueError):
            batched_q_learning(chain_mdp(3), 10, 2, h_tables=np.zeros((3, 3, 2)))

    def test_heuristic_only_moves_trajectory(self):
        m = chain_mdp(3, 0.9)
        q_star, _ = value_iteration(m, 1e-12)
        h = np.zeros((4, 3, 2))
        h[:, 1, 1] = 50.0
        h[:, 0, 0] = -50.0
        q, _ = batched_q_learning(m, 50_000, 4, seed=0, h_tables=h, visit_exponent=0.6)
        assert np.abs(q - q_star).max() < 1e-3


class TestHeuristicSet:
    def test_polarity_derived(self):
        assert HeuristicPair([0.0], 0, 0.0).polarity == "bad"
        assert HeuristicPair([0.0], 0, 1e-9).polarity == "good"

    def test_inconsistent_polarity(self):
        with pytest.raises(ValueError):
            HeuristicPair([0.0], 0, 1.0, "bad")

    def test_set_rejects_misfiled_pair(self):
        with pytest.raises(ValueError):
            HeuristicSet(good=[HeuristicPair([0.0], 0, -1.0)])

    def test_round_trip(self, tmp_path):
        hs = HeuristicSet.from_pairs([HeuristicPair([1.0, 0.0], [0.5, -0.5], 2.0),
                                      HeuristicPair([0.0, 1.0], [0.1, 0.1], -1.0)], "test")
        hs.save(tmp_path / "h.json")
        back = HeuristicSet.load(tmp_path / "h.json")
        assert back.to_dict() == hs.to_dict()

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), max_size=30))
    def test_partition(self, qs):
        hs = HeuristicSet.from_pairs([HeuristicPair([0.0], 0, q) for q in qs])
        assert len(hs) == len(qs)
        assert all(p.q_value > 0 for p in hs.good)
        assert all(p.q_value <= 0 for p in hs.bad)


class TestReplayBuffer:
    def test_ring_capacity(self):
        buf = ReplayBuffer(3, 1, 1)
        for i in range(5):
            buf.add([i], [0], float(i), [i + 1], False)
        assert len(buf) == 3
        np.testing.assert_array_equal(buf.transitions()[2], [2.0, 3.0, 4.0])

    def test_too_small(self):
        with pytest.raises(ValueError):
            ReplayBuffer(10, 1, 1).sample(2)

    def test_sampling_is_seeded_and_uniform(self):
        def filled(seed):
            buf = ReplayBuffer(1000, 1, 1, seed=seed)
            for i in range(1000):
                buf.add([i], [0], float(i % 10), [0], False)
            return buf

        a, b = filled(5), filled(5)
        np.testing.assert_array_equal(a.sample(32)[2], b.sample(32)[2])
        drawn = np.concatenate([a.sample(1000)[2] for _ in range(50)]).astype(int)
        assert np.abs(np.bincount(drawn, minlength=10) / drawn.size - 0.1).max() < 0.01
