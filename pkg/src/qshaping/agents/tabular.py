from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..mdp import Mdp, terminal_states
from .heuristic_set import HeuristicSet


def _index(x) -> int:
    x = np.asarray(x)
    return int(x) if x.ndim == 0 else int(np.argmax(x))


class TabularAgent:
    """Q-learning on a table, with additive heuristic shaping.

    ``step_size="constant"`` uses ``alpha`` for every update. ``step_size="visit"`` uses
    ``1 / n(s,a) ** visit_exponent`` where ``n`` counts updates of the pair.
    Exploration is epsilon-greedy; epsilon decays linearly from ``epsilon`` to
    ``epsilon_end`` over ``epsilon_decay_steps`` environment steps (0 keeps it constant).
    """

    def __init__(self, num_states: int, num_actions: int, gamma: float = 0.9,
                 alpha: float = 0.1, step_size: str = "constant", visit_exponent: float = 1.0,
                 epsilon: float = 0.1, epsilon_end: Optional[float] = None,
                 epsilon_decay_steps: int = 0, seed: int = 0):
        if step_size not in ("constant", "visit"):
            raise ValueError(f"unknown step_size {step_size!r}")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.num_states, self.num_actions = num_states, num_actions
        self.gamma = gamma
        self.alpha = alpha
        self.step_size = step_size
        self.visit_exponent = visit_exponent
        self.epsilon = epsilon
        self.epsilon_end = epsilon if epsilon_end is None else epsilon_end
        self.epsilon_decay_steps = epsilon_decay_steps
        self.seed = seed
        self.q = np.zeros((num_states, num_actions))
        self.counts = np.zeros((num_states, num_actions))
        self.env_steps = 0
        self.rng = np.random.default_rng(seed)

    @classmethod
    def for_env(cls, env, seed: int = 0, **kwargs) -> "TabularAgent":
        kwargs.setdefault("gamma", env.mdp.gamma)
        return cls(env.mdp.num_states, env.mdp.num_actions, seed=seed, **kwargs)

    def current_epsilon(self) -> float:
        if self.epsilon_decay_steps <= 0:
            return self.epsilon
        frac = min(1.0, self.env_steps / self.epsilon_decay_steps)
        return self.epsilon + frac * (self.epsilon_end - self.epsilon)

    def step_size_for(self, s: int, a: int) -> float:
        if self.step_size == "constant":
            return self.alpha
        return 1.0 / self.counts[s, a] ** self.visit_exponent

    def act(self, obs, explore: bool = False) -> int:
        s = _index(obs)
        if explore and self.rng.random() < self.current_epsilon():
            return int(self.rng.integers(self.num_actions))
        return int(np.argmax(self.q[s]))

    def observe(self, obs, action, reward, next_obs, terminated) -> None:
        shaped_td_update(self, (obs, action, reward, next_obs, terminated))
        self.env_steps += 1

    def shape(self, hs: HeuristicSet, **_) -> dict:
        return {"q_shaping": apply_heuristics(self, hs)}

    def snapshot(self) -> "TabularAgent":
        clone = TabularAgent.__new__(TabularAgent)
        clone.__dict__.update(self.__dict__)
        clone.q = self.q.copy()
        clone.counts = self.counts.copy()
        clone.rng = np.random.default_rng()
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        config = {k: getattr(self, k) for k in (
            "num_states", "num_actions", "gamma", "alpha", "step_size", "visit_exponent",
            "epsilon", "epsilon_end", "epsilon_decay_steps", "seed", "env_steps")}
        (d / "config.json").write_text(json.dumps(config, indent=1))
        (d / "q_table.json").write_text(json.dumps({"q": self.q.tolist(), "counts": self.counts.tolist()}))
        (d / "rng.json").write_text(json.dumps(self.rng.bit_generator.state))

    @classmethod
    def load(cls, directory) -> "TabularAgent":
        d = Path(directory)
        config = json.loads((d / "config.json").read_text())
        env_steps = config.pop("env_steps")
        agent = cls(**config)
        agent.env_steps = env_steps
        tables = json.loads((d / "q_table.json").read_text())
        agent.q = np.asarray(tables["q"], dtype=float)
        agent.counts = np.asarray(tables["counts"], dtype=float)
        agent.rng.bit_generator.state = json.loads((d / "rng.json").read_text())
        return agent


def shaped_td_update(agent: TabularAgent, t, h: Optional[float] = None) -> np.ndarray:
    """TD-error step on the pair of transition ``t = (s, a, r, s', done)``, plus ``h`` if given.

    Only ``q[s, a]`` changes. Terminal transitions bootstrap with 0.
    """
    s_obs, a, r, s2_obs, done = t
    s, s2, a = _index(s_obs), _index(s2_obs), int(a)
    agent.counts[s, a] += 1.0
    alpha = agent.step_size_for(s, a)
    target = r if done else r + agent.gamma * np.max(agent.q[s2])
    agent.q[s, a] += alpha * (target - agent.q[s, a])
    if h is not None:
        agent.q[s, a] += h
    if not np.isfinite(agent.q[s, a]):
        raise FloatingPointError(f"Q-value at {(s, a)} became non-finite")
    return agent.q


def apply_heuristics(agent: TabularAgent, hs: HeuristicSet) -> list:
    """Add each pair's Q to the table once (the tabular shaping phase)."""
    applied = []
    for p in hs.pairs:
        s, a = _index(p.state), int(p.action)
        agent.q[s, a] += p.q_value
        applied.append(p.q_value)
    return applied


def batched_q_learning(mdp: Mdp, n_samples: int, n_runs: int, seed: int = 0,
                       h_tables: Optional[np.ndarray] = None, visit_exponent: float = 1.0,
                       checkpoints=(), reference: Optional[np.ndarray] = None):
    """Independent Q-learning runs under a uniform-random behaviour policy, vectorised.

    Each run starts from ``h_tables[run]`` (zeros when absent; the heuristic is applied at
    step 0), walks episodes from ``mdp.initial_dist`` and restarts after absorbing states.
    Step sizes are ``1 / n(s,a) ** visit_exponent``.

    Per step the generator draws, in order: actions ``integers(A, size=n_runs)``,
    transition uniforms ``random(n_runs)`` and restart uniforms ``random(n_runs)``.

    Returns ``(q, errors)``: final tables ``(n_runs, S, A)`` and, when ``reference`` is
    given, a dict mapping each checkpoint sample count to per-run sup-norm errors.
    """
    n_s, n_a = mdp.num_states, mdp.num_actions
    rng = np.random.default_rng(seed)
    q = np.zeros((n_runs, n_s, n_a)) if h_tables is None else np.array(h_tables, dtype=float)
    if q.shape != (n_runs, n_s, n_a):
        raise ValueError(f"h_tables shape {q.shape} != {(n_runs, n_s, n_a)}")
    counts = np.zeros((n_runs, n_s, n_a))
    cum = np.cumsum(mdp.transition, axis=-1)
    cum_init = np.cumsum(mdp.initial_dist)
    terminal = np.zeros(n_s, dtype=bool)
    terminal[terminal_states(mdp)] = True
    lanes = np.arange(n_runs)
    state = np.minimum(np.searchsorted(cum_init, rng.random(n_runs), side="right"), n_s - 1)
    checkpoints = set(checkpoints)
    errors = {}
    for k in range(1, n_samples + 1):
        a = rng.integers(n_a, size=n_runs)
        u = rng.random(n_runs)
        restart = rng.random(n_runs)
        nxt = np.minimum((u[:, None] >= cum[state, a]).sum(-1), n_s - 1)
        done = terminal[nxt]
        counts[lanes, state, a] += 1.0
        target = mdp.reward[state, a] + np.where(done, 0.0, mdp.gamma * q[lanes, nxt].max(-1))
        alpha = counts[lanes, state, a] ** -visit_exponent
        q[lanes, state, a] += alpha * (target - q[lanes, state, a])
        fresh = np.minimum(np.searchsorted(cum_init, restart, side="right"), n_s - 1)
        state = np.where(done, fresh, nxt)
        if reference is not None and k in checkpoints:
            errors[k] = np.abs(q - reference).max(axis=(1, 2))
    return q, errors
