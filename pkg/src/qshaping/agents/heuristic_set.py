from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

Action = Union[int, np.ndarray]


def polarity_of(q_value: float) -> str:
    return "good" if q_value > 0 else "bad"


@dataclass
class HeuristicPair:
    """One ``(s, a, Q)`` triple; ``good`` exactly when Q > 0."""

    state: np.ndarray
    action: Action
    q_value: float
    polarity: str = ""

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float).reshape(-1)
        if not isinstance(self.action, (int, np.integer)):
            self.action = np.asarray(self.action, dtype=float).reshape(-1)
        else:
            self.action = int(self.action)
        self.q_value = float(self.q_value)
        if not np.isfinite(self.q_value):
            raise ValueError("heuristic Q-value must be finite")
        expected = polarity_of(self.q_value)
        if not self.polarity:
            self.polarity = expected
        elif self.polarity != expected:
            raise ValueError(
                f"polarity {self.polarity!r} inconsistent with Q={self.q_value} (expected {expected!r})")

    def to_dict(self) -> dict:
        action = self.action if isinstance(self.action, int) else self.action.tolist()
        return {"state": self.state.tolist(), "action": action,
                "q_value": self.q_value, "polarity": self.polarity}

    @classmethod
    def from_dict(cls, doc: dict) -> "HeuristicPair":
        action = doc["action"]
        if isinstance(action, list):
            action = np.asarray(action, dtype=float)
        return cls(doc["state"], action, doc["q_value"], doc.get("polarity", ""))


@dataclass
class HeuristicSet:
    good: list = field(default_factory=list)
    bad: list = field(default_factory=list)
    provenance: str = ""

    def __post_init__(self):
        if any(p.polarity != "good" for p in self.good):
            raise ValueError("good set contains a pair with Q <= 0")
        if any(p.polarity != "bad" for p in self.bad):
            raise ValueError("bad set contains a pair with Q > 0")

    @classmethod
    def from_pairs(cls, pairs: Iterable[HeuristicPair], provenance: str = "") -> "HeuristicSet":
        pairs = list(pairs)
        return cls([p for p in pairs if p.polarity == "good"],
                   [p for p in pairs if p.polarity == "bad"], provenance)

    @property
    def pairs(self) -> list:
        return self.good + self.bad

    def __len__(self) -> int:
        return len(self.good) + len(self.bad)

    def check_dims(self, obs_space, act_space) -> None:
        for p in self.pairs:
            if p.state.shape != (obs_space.dim,):
                raise ValueError(f"pair state has dim {p.state.size}, env expects {obs_space.dim}")
            if act_space.is_discrete:
                if not isinstance(p.action, int) or not 0 <= p.action < act_space.discrete_n:
                    raise ValueError(f"pair action {p.action!r} outside discrete action space")
            elif isinstance(p.action, int) or p.action.shape != (act_space.dim,):
                raise ValueError(f"pair action {p.action!r} does not match action dim {act_space.dim}")

    def arrays(self, which: str = "all"):
        """Stack states, actions and Q-values of ``good``, ``bad`` or ``all`` pairs."""
        pairs = {"good": self.good, "bad": self.bad, "all": self.pairs}[which]
        if not pairs:
            return None
        states = np.stack([p.state for p in pairs])
        actions = np.stack([np.atleast_1d(np.asarray(p.action, dtype=float)) for p in pairs])
        q = np.array([p.q_value for p in pairs])
        return states, actions, q

    def to_dict(self) -> dict:
        return {"provenance": self.provenance,
                "good": [p.to_dict() for p in self.good],
                "bad": [p.to_dict() for p in self.bad]}

    @classmethod
    def from_dict(cls, doc: dict) -> "HeuristicSet":
        return cls([HeuristicPair.from_dict(d) for d in doc.get("good", [])],
                   [HeuristicPair.from_dict(d) for d in doc.get("bad", [])],
                   doc.get("provenance", ""))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "HeuristicSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def heuristic_table(hs: HeuristicSet, num_states: int, num_actions: int) -> np.ndarray:
    """Sum the Q-values of each (state, action) pair into a table; states are one-hot."""
    table = np.zeros((num_states, num_actions))
    for p in hs.pairs:
        table[int(np.argmax(p.state)), int(p.action)] += p.q_value
    return table
