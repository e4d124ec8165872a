"""Finite MDPs, the Bellman operator and the value-iteration oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_SUM_TOL = 1e-9


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Mdp:
    """Tabular MDP with expected rewards ``reward[s, a]`` and ``transition[s, a, s']``."""

    reward: np.ndarray
    transition: np.ndarray
    gamma: float
    initial_dist: np.ndarray

    def __post_init__(self):
        reward = np.array(self.reward, dtype=float)
        transition = np.array(self.transition, dtype=float)
        initial = np.array(self.initial_dist, dtype=float)
        if reward.ndim != 2:
            raise DimensionError(f"reward must be 2-D, got shape {reward.shape}")
        n_s, n_a = reward.shape
        if transition.shape != (n_s, n_a, n_s):
            raise DimensionError(
                f"transition shape {transition.shape} != {(n_s, n_a, n_s)}")
        if initial.shape != (n_s,):
            raise DimensionError(f"initial_dist shape {initial.shape} != {(n_s,)}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if np.any(reward < 0.0) or np.any(reward > 1.0):
            raise ValueError("rewards must lie in [0, 1]")
        if np.any(transition < 0.0) or np.any(np.abs(transition.sum(-1) - 1.0) > _SUM_TOL):
            raise ValueError("every transition row must be a probability vector")
        if np.any(initial < 0.0) or abs(initial.sum() - 1.0) > _SUM_TOL:
            raise ValueError("initial_dist must be a probability vector")
        for arr in (reward, transition, initial):
            arr.setflags(write=False)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "initial_dist", initial)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[1]

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "reward": self.reward.tolist(),
            "transition": self.transition.tolist(),
            "initial_dist": self.initial_dist.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Mdp":
        mdp = cls(reward=doc["reward"], transition=doc["transition"],
                  gamma=doc["gamma"], initial_dist=doc["initial_dist"])
        if (mdp.num_states, mdp.num_actions) != (doc["num_states"], doc["num_actions"]):
            raise DimensionError("declared num_states/num_actions disagree with arrays")
        return mdp

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Mdp":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check_table(mdp: Mdp, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionError(
            f"Q-table shape {q.shape} does not match MDP {(mdp.num_states, mdp.num_actions)}")
    return q


def bellman_backup(mdp: Mdp, q) -> np.ndarray:
    """One application of the optimality operator: r + gamma * P @ max_a' q."""
    q = _check_table(mdp, q)
    return mdp.reward + mdp.gamma * (mdp.transition @ q.max(axis=1))


def value_iteration(mdp: Mdp, tol: float = 1e-10, max_iter: int = 100_000,
                    q0=None) -> tuple[np.ndarray, int]:
    """Iterate the Bellman backup from ``q0`` (zeros by default) until the residual < tol.

    Returns the table and the number of backups performed.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    q = np.zeros((mdp.num_states, mdp.num_actions)) if q0 is None else _check_table(mdp, q0).copy()
    for it in range(1, max_iter + 1):
        nxt = bellman_backup(mdp, q)
        residual = np.max(np.abs(nxt - q))
        q = nxt
        # residual of the returned table is at most gamma * the last step
        if mdp.gamma * residual < tol:
            return q, it
    raise RuntimeError(f"value iteration did not reach tol={tol} in {max_iter} iterations")


def build_empirical_mdp(transitions: Iterable[Sequence], num_states: int, num_actions: int,
                        gamma: float, initial_dist=None) -> Mdp:
    """Maximum-likelihood MDP from ``(s, a, r, s')`` tuples.

    Unvisited pairs become zero-reward self-loops. Rewards are clipped into [0, 1].
    """
    counts = np.zeros((num_states, num_actions, num_states))
    reward_sum = np.zeros((num_states, num_actions))
    n = 0
    for s, a, r, s2 in transitions:
        s, a, s2 = int(s), int(a), int(s2)
        if not (0 <= s < num_states and 0 <= s2 < num_states and 0 <= a < num_actions):
            raise IndexError(f"transition {(s, a, r, s2)} out of range")
        counts[s, a, s2] += 1.0
        reward_sum[s, a] += float(r)
        n += 1
    if n == 0:
        raise ValueError("cannot build an MDP from an empty dataset")
    visits = counts.sum(-1)
    seen = visits > 0
    trans = np.zeros_like(counts)
    trans[seen] = counts[seen] / visits[seen][:, None]
    rew = np.zeros_like(reward_sum)
    rew[seen] = reward_sum[seen] / visits[seen]
    for s, a in zip(*np.nonzero(~seen)):
        trans[s, a, s] = 1.0
    if initial_dist is None:
        initial_dist = np.full(num_states, 1.0 / num_states)
    return Mdp(np.clip(rew, 0.0, 1.0), trans, gamma, initial_dist)


def greedy_policy(q) -> np.ndarray:
    """One-hot policy matrix; ties go to the lowest action index."""
    q = np.asarray(q, dtype=float)
    probs = np.zeros_like(q)
    probs[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
    return probs


def chain_mdp(num_states: int = 5, gamma: float = 0.9) -> Mdp:
    """Deterministic chain; action 0 = left, 1 = right.

    Entering the last state pays 1 and ends the episode; that state is absorbing with
    reward 0. Episodes start in state 0.
    """
    if num_states < 2:
        raise ValueError("chain needs at least 2 states")
    last = num_states - 1
    trans = np.zeros((num_states, 2, num_states))
    rew = np.zeros((num_states, 2))
    for s in range(num_states):
        if s == last:
            trans[s, :, s] = 1.0
            continue
        trans[s, 0, max(s - 1, 0)] = 1.0
        trans[s, 1, s + 1] = 1.0
        if s + 1 == last:
            rew[s, 1] = 1.0
    init = np.zeros(num_states)
    init[0] = 1.0
    return Mdp(rew, trans, gamma, init)


GRID_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left


def grid_mdp(rows: int = 4, cols: int = 4, gamma: float = 0.9) -> Mdp:
    """Deterministic grid; goal in the bottom-right cell pays 1 on entry and is absorbing.

    Moves into the border leave the agent in place. Start cells are uniform over the
    non-goal cells.
    """
    n_s = rows * cols
    goal = n_s - 1
    trans = np.zeros((n_s, 4, n_s))
    rew = np.zeros((n_s, 4))
    for s in range(n_s):
        if s == goal:
            trans[s, :, s] = 1.0
            continue
        r, c = divmod(s, cols)
        for a, (dr, dc) in enumerate(GRID_MOVES):
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols):
                nr, nc = r, c
            nxt = nr * cols + nc
            trans[s, a, nxt] = 1.0
            if nxt == goal:
                rew[s, a] = 1.0
    init = np.ones(n_s)
    init[goal] = 0.0
    return Mdp(rew, trans, gamma, init / init.sum())


def terminal_states(mdp: Mdp) -> np.ndarray:
    """Absorbing zero-reward states (self-loop under every action)."""
    idx = np.arange(mdp.num_states)
    loops = mdp.transition[idx, :, idx] == 1.0
    return np.nonzero(loops.all(axis=1) & (mdp.reward == 0.0).all(axis=1))[0]
