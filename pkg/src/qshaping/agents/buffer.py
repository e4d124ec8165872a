from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity ring of ``(s, a, r, s', done)`` with uniform seeded sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, seed=0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.ptr = 0
        self.size = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int):
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        idx = self.rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx]

    def transitions(self):
        """Stored transitions in insertion order (oldest first)."""
        order = np.arange(self.size) if self.size < self.capacity else \
            (np.arange(self.capacity) + self.ptr) % self.capacity
        return self.obs[order], self.act[order], self.rew[order], self.next_obs[order], self.done[order]
