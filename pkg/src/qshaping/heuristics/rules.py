"""Rule sets: the JSON form heuristic functions compile to, and their materialization."""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..agents.heuristic_set import HeuristicPair, HeuristicSet, polarity_of
from .errors import RuleValidationError

OPS = {"<": operator.lt, "<=": operator.le, "≤": operator.le,
       ">": operator.gt, ">=": operator.ge, "≥": operator.ge}
DEFAULT_SAMPLE_BUDGET = 50

TOP_KEYS = {"env_id", "sample_budget", "rules"}
RULE_KEYS = {"condition", "action", "q_value", "polarity"}
CONDITION_KEYS = {"index", "op", "threshold"}
ACTION_KEYS = {"constant": {"kind", "value"}, "affine": {"kind", "weights", "bias"}}


@dataclass(frozen=True)
class Condition:
    index: int
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in OPS:
            raise RuleValidationError(f"unknown comparison {self.op!r}")

    def holds(self, obs: np.ndarray) -> bool:
        return bool(OPS[self.op](obs[self.index], self.threshold))

    def to_dict(self) -> dict:
        return {"index": self.index, "op": self.op, "threshold": self.threshold}


@dataclass
class ActionExpr:
    """``constant``: a fixed action (index or vector). ``affine``: ``weights @ obs + bias``."""

    kind: str
    value: Union[int, list, None] = None
    weights: Optional[list] = None
    bias: Optional[list] = None

    def __post_init__(self):
        if self.kind not in ACTION_KEYS:
            raise RuleValidationError(f"unknown action kind {self.kind!r}")
        if self.kind == "constant" and self.value is None:
            raise RuleValidationError("constant action needs a value")
        if self.kind == "affine" and (self.weights is None or self.bias is None):
            raise RuleValidationError("affine action needs weights and bias")

    def evaluate(self, obs: np.ndarray):
        if self.kind == "constant":
            if isinstance(self.value, (int, np.integer)):
                return int(self.value)
            return np.asarray(self.value, dtype=float)
        return np.asarray(self.weights, dtype=float) @ obs + np.asarray(self.bias, dtype=float)

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "affine", "weights": self.weights, "bias": self.bias}


@dataclass
class HeuristicRule:
    condition: list
    action: ActionExpr
    q_value: float
    polarity: str = ""

    def __post_init__(self):
        self.q_value = float(self.q_value)
        expected = polarity_of(self.q_value)
        if not self.polarity:
            self.polarity = expected
        elif self.polarity != expected:
            raise RuleValidationError(
                f"rule polarity {self.polarity!r} inconsistent with Q={self.q_value}")

    def matches(self, obs: np.ndarray) -> bool:
        return all(c.holds(obs) for c in self.condition)

    def to_dict(self) -> dict:
        return {"condition": [c.to_dict() for c in self.condition], "action": self.action.to_dict(),
                "q_value": self.q_value, "polarity": self.polarity}

    @classmethod
    def from_dict(cls, doc: dict) -> "HeuristicRule":
        conds = [Condition(int(c["index"]), c["op"], float(c["threshold"])) for c in doc["condition"]]
        act = doc["action"]
        action = ActionExpr(act["kind"], act.get("value"), act.get("weights"), act.get("bias"))
        return cls(conds, action, doc["q_value"], doc.get("polarity", ""))


@dataclass
class RuleSet:
    env_id: str
    rules: list = field(default_factory=list)
    sample_budget: int = DEFAULT_SAMPLE_BUDGET

    def __post_init__(self):
        if int(self.sample_budget) < 1:
            raise RuleValidationError("sample_budget must be positive")
        self.sample_budget = int(self.sample_budget)

    def to_dict(self) -> dict:
        return {"env_id": self.env_id, "sample_budget": self.sample_budget,
                "rules": [r.to_dict() for r in self.rules]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "RuleSet":
        try:
            rules = [HeuristicRule.from_dict(r) for r in doc.get("rules", [])]
            return cls(doc["env_id"], rules, doc.get("sample_budget", DEFAULT_SAMPLE_BUDGET))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, RuleValidationError):
                raise
            raise RuleValidationError(f"malformed rule set: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> "RuleSet":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RuleSet":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def check(self, env) -> None:
        """Raise :class:`RuleValidationError` unless every rule fits ``env``."""
        obs_space, act_space, config = env.spec()
        if self.env_id != config.env_id:
            raise RuleValidationError(f"rule set targets {self.env_id!r}, env is {config.env_id!r}")
        for i, rule in enumerate(self.rules):
            for c in rule.condition:
                if not 0 <= c.index < obs_space.dim:
                    raise RuleValidationError(
                        f"rule {i} reads component {c.index}, observation dim is {obs_space.dim}")
            _check_action(i, rule.action, obs_space, act_space)


def _check_action(i: int, action: ActionExpr, obs_space, act_space) -> None:
    if act_space.is_discrete:
        if action.kind != "constant" or isinstance(action.value, (list, tuple)):
            raise RuleValidationError(f"rule {i}: discrete actions must be constant indices")
        if not 0 <= int(action.value) < act_space.discrete_n:
            raise RuleValidationError(f"rule {i}: action {action.value} outside 0..{act_space.discrete_n - 1}")
        return
    if action.kind == "constant":
        if np.shape(action.value) != (act_space.dim,):
            raise RuleValidationError(f"rule {i}: constant action must have length {act_space.dim}")
    else:
        if np.shape(action.weights) != (act_space.dim, obs_space.dim):
            raise RuleValidationError(
                f"rule {i}: affine weights must be {act_space.dim}x{obs_space.dim}")
        if np.shape(action.bias) != (act_space.dim,):
            raise RuleValidationError(f"rule {i}: affine bias must have length {act_space.dim}")


def first_match(rules, obs: np.ndarray):
    for rule in rules:
        if rule.matches(obs):
            return rule
    return None


def sample_states(env, n: int, seed: int) -> np.ndarray:
    """``n`` observations uniform over the box, or every state (up to ``n``) when discrete."""
    obs_space = env.spec()[0]
    rng = np.random.default_rng(seed)
    if obs_space.is_discrete:
        idx = np.arange(obs_space.discrete_n)
        if n < idx.size:
            idx = np.sort(rng.choice(idx, size=n, replace=False))
        return np.eye(obs_space.discrete_n)[idx]
    return rng.uniform(obs_space.low, obs_space.high, size=(n, obs_space.dim))


def materialize(rs: RuleSet, env, seed: int = 0) -> HeuristicSet:
    """Evaluate the rules first-match on sampled states and emit ``(s, a, Q)`` pairs."""
    rs.check(env)
    act_space = env.spec()[1]
    pairs = []
    for obs in sample_states(env, rs.sample_budget, seed):
        rule = first_match(rs.rules, obs)
        if rule is None:
            continue
        action = rule.action.evaluate(obs)
        if not act_space.is_discrete:
            action = np.clip(action, act_space.low, act_space.high)
        pairs.append(HeuristicPair(obs, action, rule.q_value))
    return HeuristicSet.from_pairs(pairs, provenance=f"rules:{rs.env_id}:seed={seed}")
