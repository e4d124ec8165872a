from __future__ import annotations

import numpy as np

from ..mdp import Mdp, chain_mdp, grid_mdp, terminal_states
from .base import Env, SpaceSpec


class MdpEnv(Env):
    """Samples an episode from a tabular :class:`Mdp`; observations are one-hot."""

    def __init__(self, config=None, **params):
        super().__init__(config, **params)
        self.mdp = self._build_mdp()
        self._cum = np.cumsum(self.mdp.transition, axis=-1)
        self._cum_init = np.cumsum(self.mdp.initial_dist)
        self._terminal = np.zeros(self.mdp.num_states, dtype=bool)
        self._terminal[terminal_states(self.mdp)] = True
        self._eye = np.eye(self.mdp.num_states)
        self.state = 0

    def _build_mdp(self) -> Mdp:
        raise NotImplementedError

    @property
    def observation_space(self) -> SpaceSpec:
        n = self.mdp.num_states
        return SpaceSpec.discrete(n, n)

    @property
    def action_space(self) -> SpaceSpec:
        return SpaceSpec.discrete(self.mdp.num_actions, 1)

    def _reset_state(self):
        self.state = _draw(self._cum_init, self.rng.random())
        return self._eye[self.state].copy()

    def set_state(self, s: int):
        self.state = int(s)
        self._done = False
        return self._eye[self.state].copy()

    def _transition(self, action):
        a = int(np.asarray(action).reshape(-1)[0])
        if not 0 <= a < self.mdp.num_actions:
            raise ValueError(f"action {a} outside discrete space of size {self.mdp.num_actions}")
        s = self.state
        reward = self.mdp.reward[s, a]
        self.state = _draw(self._cum[s, a], self.rng.random())
        return self._eye[self.state].copy(), reward, bool(self._terminal[self.state])


def _draw(cum: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


class ChainWalk(MdpEnv):
    env_id = "ChainWalk"
    default_horizon = 50
    default_params = {"num_states": 5, "gamma": 0.9}

    def _build_mdp(self):
        return chain_mdp(int(self.params["num_states"]), float(self.params["gamma"]))


class GridWorld(MdpEnv):
    env_id = "GridWorld"
    default_horizon = 50
    default_params = {"rows": 4, "cols": 4, "gamma": 0.9}

    def _build_mdp(self):
        return grid_mdp(int(self.params["rows"]), int(self.params["cols"]),
                        float(self.params["gamma"]))
