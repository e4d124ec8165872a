"""Heuristics derived from ground truth: value iteration for tabular MDPs, a feedback
controller for the point-mass task."""

from __future__ import annotations

import re
from typing import Optional

import numpy as np

from ..agents.heuristic_set import HeuristicPair, HeuristicSet
from ..mdp import Mdp, value_iteration
from .rules import ActionExpr, HeuristicRule, RuleSet, first_match

MODES = ("exact", "scaled", "perturbed", "adversarial")
DEFAULT_SCALE = 10.0
DEFAULT_SIGMA = 5.0


def parse_mode(mode: str, param: Optional[float] = None) -> tuple:
    """``"scaled(10)"`` -> ``("scaled", 10.0)``; bare names take ``param`` or the default."""
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*", mode)
    if not m or m.group(1) not in MODES:
        raise ValueError(f"unknown oracle mode {mode!r}; expected one of {MODES}")
    name = m.group(1)
    if m.group(2) is not None:
        param = float(m.group(2))
    if param is None:
        param = {"scaled": DEFAULT_SCALE, "perturbed": DEFAULT_SIGMA}.get(name)
    return name, param


def oracle_heuristics(mdp: Mdp, mode: str = "exact", k: Optional[int] = None, seed: int = 0,
                      param: Optional[float] = None, q_star: Optional[np.ndarray] = None) -> HeuristicSet:
    """Pairs built from the optimal Q-table on ``k`` states sampled without replacement.

    exact:       ``(s, a*, q*(s, a*))``
    scaled(c):   same pairs with Q multiplied by ``c``
    perturbed(σ): same pairs with ``N(0, σ²)`` added to Q
    adversarial: two pairs per state, the worst action credited with ``-q*(s, a*)`` and
                 the best action with ``-q*(s, a_worst)``
    States are one-hot vectors; ``k`` defaults to every state.
    """
    name, p = parse_mode(mode, param)
    n_s = mdp.num_states
    k = n_s if k is None else int(k)
    if not 0 <= k <= n_s:
        raise ValueError(f"k={k} must lie in [0, {n_s}]")
    if q_star is None:
        q_star, _ = value_iteration(mdp, tol=1e-10)
    rng = np.random.default_rng(seed)
    states = np.sort(rng.choice(n_s, size=k, replace=False))
    eye = np.eye(n_s)
    pairs = []
    for s in states:
        best = int(np.argmax(q_star[s]))
        worst = int(np.argmin(q_star[s]))
        q_best = float(q_star[s, best])
        if name == "exact":
            pairs.append(HeuristicPair(eye[s], best, q_best))
        elif name == "scaled":
            pairs.append(HeuristicPair(eye[s], best, p * q_best))
        elif name == "perturbed":
            pairs.append(HeuristicPair(eye[s], best, q_best + rng.normal(0.0, p)))
        else:
            pairs.append(HeuristicPair(eye[s], worst, -q_best))
            pairs.append(HeuristicPair(eye[s], best, -float(q_star[s, worst])))
    label = name if p is None else f"{name}({p:g})"
    return HeuristicSet.from_pairs(pairs, provenance=f"oracle:{label}:k={k}:seed={seed}")


# Feedback gains picked by a coarse grid search over mean episode return.
POINT_MASS_GAINS = (8.0, 3.0)


def reference_rules(env, q_good: float = 1.0, sample_budget: int = 50) -> RuleSet:
    """A single always-true rule whose action is a saturating PD controller toward the goal.

    Only PointMassReach has a reference controller.
    """
    env_id = env.spec()[2].env_id
    if env_id != "PointMassReach":
        raise ValueError(f"no reference controller for {env_id!r}")
    kp, kd = POINT_MASS_GAINS
    goal = np.asarray(env.params["goal"], dtype=float)
    # a = kp * (goal - x) - kd * v
    weights = [[-kp, 0.0, -kd, 0.0], [0.0, -kp, 0.0, -kd]]
    bias = (kp * goal).tolist()
    rule = HeuristicRule([], ActionExpr("affine", weights=weights, bias=bias), q_good)
    return RuleSet(env_id, [rule], sample_budget)


def controller_states(env, rules: RuleSet, n: int, seed: int) -> np.ndarray:
    """``n`` states drawn without replacement from rollouts of the rule-set policy."""
    act_space = env.spec()[1]
    visited = []
    episode = 0
    while len(visited) < 4 * n:
        obs = env.reset(seed=int(np.random.SeedSequence([seed, episode]).generate_state(1)[0]))
        episode += 1
        done = False
        while not done:
            visited.append(obs)
            rule = first_match(rules.rules, obs)
            action = np.zeros(act_space.dim) if rule is None else rule.action.evaluate(obs)
            res = env.step(action)
            obs, done = res.observation, res.terminated or res.truncated
    rng = np.random.default_rng([seed, 2])
    idx = np.sort(rng.choice(len(visited), size=n, replace=False))
    return np.asarray(visited)[idx]


def continuous_oracle(env, mode: str = "exact", seed: int = 0, param: Optional[float] = None,
                      sample_budget: int = 50) -> HeuristicSet:
    """Reference-controller pairs on states the controller itself visits.

    Modes transform the pairs like :func:`oracle_heuristics`; adversarial negates the
    controller's action while keeping it in the good set.
    """
    name, p = parse_mode(mode, param)
    rules = reference_rules(env, sample_budget=sample_budget)
    act_space = env.spec()[1]
    rng = np.random.default_rng([seed, 1])
    pairs = []
    for obs in controller_states(env, rules, sample_budget, seed):
        action = np.clip(first_match(rules.rules, obs).action.evaluate(obs), act_space.low, act_space.high)
        q = rules.rules[0].q_value
        if name == "scaled":
            q = p * q
        elif name == "perturbed":
            q = q + rng.normal(0.0, p)
        elif name == "adversarial":
            action = np.clip(-action, act_space.low, act_space.high)
        pairs.append(HeuristicPair(obs, action, q))
    label = name if p is None else f"{name}({p:g})"
    return HeuristicSet.from_pairs(pairs, provenance=f"controller:{label}:seed={seed}")
