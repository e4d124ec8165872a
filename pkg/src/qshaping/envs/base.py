from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np


class ProtocolError(RuntimeError):
    """Raised when an episode is stepped after it has ended."""


@dataclass(frozen=True)
class SpaceSpec:
    kind: str  # "discrete" | "box"
    dim: int
    discrete_n: Optional[int] = None
    low: Optional[tuple] = None
    high: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("discrete", "box"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind == "discrete" and (self.discrete_n is None or self.discrete_n < 1):
            raise ValueError("discrete spaces need a positive discrete_n")
        if self.kind == "box":
            if self.low is None or self.high is None:
                raise ValueError("box spaces need low and high bounds")
            if len(self.low) != self.dim or len(self.high) != self.dim:
                raise ValueError("box bounds must have length dim")
            if not all(lo < hi for lo, hi in zip(self.low, self.high)):
                raise ValueError("box_low must be < box_high componentwise")

    @classmethod
    def discrete(cls, n: int, dim: int) -> "SpaceSpec":
        return cls("discrete", dim, discrete_n=n)

    @classmethod
    def box(cls, low, high) -> "SpaceSpec":
        low = tuple(float(x) for x in low)
        high = tuple(float(x) for x in high)
        return cls("box", len(low), low=low, high=high)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def describe(self) -> str:
        if self.is_discrete:
            return f"discrete n={self.discrete_n} (one-hot dim {self.dim})"
        return f"box dim {self.dim} low={list(self.low)} high={list(self.high)}"

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.is_discrete:
            return np.eye(self.discrete_n)[rng.integers(self.discrete_n)]
        return rng.uniform(self.low, self.high)


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


@dataclass
class EnvConfig:
    env_id: str
    horizon: Optional[int] = None  # None -> the environment's default
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "EnvConfig":
        horizon = doc.get("horizon")
        return cls(env_id=doc["env_id"], horizon=None if horizon is None else int(horizon),
                   params=dict(doc.get("params", {})), seed=int(doc.get("seed", 0)))

    @classmethod
    def load(cls, path) -> "EnvConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


class Env:
    """Episodic environment with a seeded RNG and a horizon-bounded step counter."""

    env_id = "Env"
    default_horizon = 200
    default_params: dict = {}

    def __init__(self, config: Optional[EnvConfig] = None, **params):
        if config is None:
            config = EnvConfig(self.env_id)
        merged = {**self.default_params, **config.params, **params}
        horizon = self.default_horizon if config.horizon is None else config.horizon
        self.config = EnvConfig(self.env_id, horizon, merged, config.seed)
        self.params = merged
        self.rng = np.random.default_rng(config.seed)
        self.t = 0
        self._done = True

    # subclasses implement these three
    def _reset_state(self) -> np.ndarray:
        raise NotImplementedError

    def _transition(self, action) -> tuple[np.ndarray, float, bool]:
        raise NotImplementedError

    @property
    def observation_space(self) -> SpaceSpec:
        raise NotImplementedError

    @property
    def action_space(self) -> SpaceSpec:
        raise NotImplementedError

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        self._done = False
        return self._reset_state()

    def step(self, action) -> StepResult:
        if self._done:
            raise ProtocolError("step() called on a finished episode; call reset() first")
        obs, reward, terminated = self._transition(action)
        self.t += 1
        truncated = not terminated and self.t >= self.config.horizon
        self._done = terminated or truncated
        return StepResult(obs, float(reward), bool(terminated), bool(truncated))

    def spec(self) -> tuple[SpaceSpec, SpaceSpec, EnvConfig]:
        return self.observation_space, self.action_space, self.config

    @property
    def description(self) -> str:
        return load_description(self.env_id)


def env_spec(env: Env) -> tuple[SpaceSpec, SpaceSpec, EnvConfig]:
    return env.spec()


def load_description(env_id: str) -> str:
    path = resources.files("qshaping.envs") / "descriptions" / f"{env_id}.md"
    if not path.is_file():
        return ""
    return path.read_text(encoding="utf-8")
