from __future__ import annotations

import numpy as np

from .base import Env, SpaceSpec


class PointMassReach(Env):
    """2-D point mass driven by bounded accelerations toward a fixed goal.

    State is ``(x, v)``; each step ``v <- clip(v + a*dt, +-v_max)`` then ``x <- x + v*dt``.
    The reward is the negative distance to the goal, and the episode terminates once the
    mass is within ``success_radius``. Positions are confined to ``[-pos_limit, pos_limit]``.
    """

    env_id = "PointMassReach"
    default_horizon = 200
    default_params = {
        "dt": 0.1,
        "v_max": 1.0,
        "goal": [0.0, 0.0],
        "pos_limit": 2.0,
        "start_low": -1.0,
        "start_high": 1.0,
        "start": None,  # fixed start position overrides sampling
        "success_radius": 0.05,
    }

    def __init__(self, config=None, **params):
        super().__init__(config, **params)
        self.goal = np.asarray(self.params["goal"], dtype=float)
        self.x = np.zeros(2)
        self.v = np.zeros(2)

    @property
    def observation_space(self):
        lim, vm = float(self.params["pos_limit"]), float(self.params["v_max"])
        return SpaceSpec.box([-lim, -lim, -vm, -vm], [lim, lim, vm, vm])

    @property
    def action_space(self):
        return SpaceSpec.box([-1.0, -1.0], [1.0, 1.0])

    def _obs(self):
        return np.concatenate([self.x, self.v])

    def set_state(self, x, v=(0.0, 0.0)):
        self.x = np.asarray(x, dtype=float).copy()
        self.v = np.asarray(v, dtype=float).copy()
        self._done = False
        return self._obs()

    def _reset_state(self):
        start = self.params.get("start")
        if start is None:
            lo, hi = float(self.params["start_low"]), float(self.params["start_high"])
            self.x = self.rng.uniform(lo, hi, size=2)
        else:
            self.x = np.asarray(start, dtype=float).copy()
        self.v = np.zeros(2)
        return self._obs()

    def _transition(self, action):
        a = np.clip(np.asarray(action, dtype=float).reshape(2), -1.0, 1.0)
        dt, vm, lim = float(self.params["dt"]), float(self.params["v_max"]), float(self.params["pos_limit"])
        self.v = np.clip(self.v + a * dt, -vm, vm)
        self.x = np.clip(self.x + self.v * dt, -lim, lim)
        dist = float(np.linalg.norm(self.x - self.goal))
        return self._obs(), -dist, dist < float(self.params["success_radius"])


class ReacherLite(Env):
    """Planar two-link arm; actions are joint angular velocities.

    Observation: ``sin/cos`` of both joint angles followed by the tip-to-goal vector.
    Reward is the negative tip-to-goal distance; episodes only end at the horizon.
    """

    env_id = "ReacherLite"
    default_horizon = 200
    default_params = {
        "link1": 0.5,
        "link2": 0.5,
        "dt": 0.1,
        "max_angular_velocity": 2.0,
        "goal": None,  # sampled inside the reachable annulus when None
        "goal_radius_low": 0.2,
        "goal_radius_high": 0.9,
    }

    def __init__(self, config=None, **params):
        super().__init__(config, **params)
        self.theta = np.zeros(2)
        self.goal = np.zeros(2)

    @property
    def observation_space(self):
        return SpaceSpec.box([-1.0] * 4 + [-2.0, -2.0], [1.0] * 4 + [2.0, 2.0])

    @property
    def action_space(self):
        return SpaceSpec.box([-1.0, -1.0], [1.0, 1.0])

    def tip(self):
        l1, l2 = float(self.params["link1"]), float(self.params["link2"])
        t1, t12 = self.theta[0], self.theta[0] + self.theta[1]
        return np.array([l1 * np.cos(t1) + l2 * np.cos(t12), l1 * np.sin(t1) + l2 * np.sin(t12)])

    def _obs(self):
        s, c = np.sin(self.theta), np.cos(self.theta)
        return np.array([s[0], c[0], s[1], c[1], *(self.tip() - self.goal)])

    def set_state(self, theta, goal=None):
        self.theta = np.asarray(theta, dtype=float).copy()
        if goal is not None:
            self.goal = np.asarray(goal, dtype=float).copy()
        self._done = False
        return self._obs()

    def _reset_state(self):
        self.theta = self.rng.uniform(-np.pi, np.pi, size=2)
        if self.params.get("goal") is None:
            radius = self.rng.uniform(float(self.params["goal_radius_low"]),
                                      float(self.params["goal_radius_high"]))
            angle = self.rng.uniform(-np.pi, np.pi)
            self.goal = radius * np.array([np.cos(angle), np.sin(angle)])
        else:
            self.goal = np.asarray(self.params["goal"], dtype=float)
        return self._obs()

    def _transition(self, action):
        a = np.clip(np.asarray(action, dtype=float).reshape(2), -1.0, 1.0)
        step = a * float(self.params["max_angular_velocity"]) * float(self.params["dt"])
        self.theta = (self.theta + step + np.pi) % (2 * np.pi) - np.pi
        return self._obs(), -float(np.linalg.norm(self.tip() - self.goal)), False
