"""Five independent checks on a provider's raw answer.

Each check looks at one property so that a single planted defect flips a single flag:

- template_adherence: the answer is exactly one JSON object (optionally inside one
  json code fence) using only the schema's keys and container types
- code_completeness: every required key is present at every level
- correct_q_values: each rule's polarity matches the sign of its numeric Q-value
- correct_state_action_dim: env id, component indices and action shapes fit the env
- bug_free: evaluating every rule on sampled states raises nothing and yields finite numbers

The last four checks run on the first JSON object found in the text, so prose around
the JSON costs only template adherence.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .rules import (ACTION_KEYS, CONDITION_KEYS, OPS, RULE_KEYS, TOP_KEYS, RuleSet,
                    sample_states)

METRICS = ("template_adherence", "correct_q_values", "correct_state_action_dim",
           "code_completeness", "bug_free")
BUG_CHECK_STATES = 100

_FENCE = re.compile(r"\A```(?:json)?[ \t]*\n(.*)\n```\Z", re.DOTALL)


@dataclass
class ValidationReport:
    template_adherence: bool = False
    correct_q_values: bool = False
    correct_state_action_dim: bool = False
    code_completeness: bool = False
    bug_free: bool = False
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(getattr(self, m) for m in METRICS)

    @property
    def score(self) -> float:
        """Percentage of the five checks that passed."""
        return 100.0 * sum(bool(getattr(self, m)) for m in METRICS) / len(METRICS)

    def flags(self) -> dict:
        return {m: getattr(self, m) for m in METRICS}

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed, "score": self.score}


def _strict_json(raw: str):
    text = raw.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1).strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return None


def _lenient_json(raw: str):
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", raw):
        try:
            doc, _ = decoder.raw_decode(raw, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict):
            return doc
    return None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _rules(doc: dict) -> list:
    rules = doc.get("rules")
    return [r for r in rules if isinstance(r, dict)] if isinstance(rules, list) else []


def _conditions(rule: dict) -> list:
    conds = rule.get("condition")
    return [c for c in conds if isinstance(c, dict)] if isinstance(conds, list) else []


def check_template(doc, strict: bool, messages: list) -> bool:
    if not strict:
        messages.append("template: answer is not a single JSON object")
        return False
    if not isinstance(doc, dict):
        messages.append("template: top level is not an object")
        return False
    ok = True

    def unknown(where, d, allowed):
        nonlocal ok
        extra = set(d) - allowed
        if extra:
            messages.append(f"template: unknown keys {sorted(extra)} in {where}")
            ok = False

    unknown("rule set", doc, TOP_KEYS)
    if "rules" in doc and not isinstance(doc["rules"], list):
        messages.append("template: rules is not a list")
        return False
    for i, rule in enumerate(doc.get("rules", [])):
        if not isinstance(rule, dict):
            messages.append(f"template: rule {i} is not an object")
            ok = False
            continue
        unknown(f"rule {i}", rule, RULE_KEYS)
        conds = rule.get("condition", [])
        if not isinstance(conds, list) or not all(isinstance(c, dict) for c in conds):
            messages.append(f"template: rule {i} condition is not a list of objects")
            ok = False
        else:
            for c in conds:
                unknown(f"rule {i} condition", c, CONDITION_KEYS)
        action = rule.get("action", {})
        if not isinstance(action, dict):
            messages.append(f"template: rule {i} action is not an object")
            ok = False
        elif action.get("kind") in ACTION_KEYS:
            unknown(f"rule {i} action", action, ACTION_KEYS[action["kind"]])
        elif "kind" in action:
            messages.append(f"template: rule {i} action kind {action['kind']!r} is not constant/affine")
            ok = False
    return ok


def check_completeness(doc: dict, messages: list) -> bool:
    missing = [f"rule set.{k}" for k in sorted(TOP_KEYS - set(doc))]
    for i, rule in enumerate(_rules(doc)):
        missing += [f"rule {i}.{k}" for k in sorted(RULE_KEYS - set(rule))]
        for j, c in enumerate(_conditions(rule)):
            missing += [f"rule {i}.condition {j}.{k}" for k in sorted(CONDITION_KEYS - set(c))]
        action = rule.get("action")
        if isinstance(action, dict):
            needed = ACTION_KEYS.get(action.get("kind"), {"kind"})
            missing += [f"rule {i}.action.{k}" for k in sorted(needed - set(action))]
    if missing:
        messages.append(f"completeness: missing {', '.join(missing)}")
    return not missing


def check_q_values(doc: dict, messages: list) -> bool:
    ok = True
    for i, rule in enumerate(_rules(doc)):
        if "q_value" not in rule or "polarity" not in rule:
            continue
        q, pol = rule["q_value"], rule["polarity"]
        if not _is_number(q) or not np.isfinite(q):
            messages.append(f"q-values: rule {i} Q {q!r} is not a finite number")
            ok = False
        elif pol not in ("good", "bad") or (pol == "good") != (q > 0):
            messages.append(f"q-values: rule {i} has polarity {pol!r} with Q={q}")
            ok = False
    return ok


def check_dims(doc: dict, env, messages: list) -> bool:
    obs_space, act_space, config = env.spec()
    ok = True
    if "env_id" in doc and doc["env_id"] != config.env_id:
        messages.append(f"dims: rule set targets {doc['env_id']!r}, env is {config.env_id!r}")
        ok = False
    for i, rule in enumerate(_rules(doc)):
        for c in _conditions(rule):
            idx = c.get("index")
            if idx is None:
                continue
            if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < obs_space.dim:
                messages.append(f"dims: rule {i} reads component {idx!r}, observation dim is {obs_space.dim}")
                ok = False
        action = rule.get("action")
        if not isinstance(action, dict):
            continue
        kind = action.get("kind")
        if act_space.is_discrete:
            value = action.get("value")
            if kind == "affine":
                messages.append(f"dims: rule {i} uses an affine action on a discrete action space")
                ok = False
            elif value is not None and not (isinstance(value, int) and not isinstance(value, bool)
                                            and 0 <= value < act_space.discrete_n):
                messages.append(f"dims: rule {i} action {value!r} outside 0..{act_space.discrete_n - 1}")
                ok = False
        elif kind == "constant" and "value" in action:
            if np.shape(action["value"]) != (act_space.dim,):
                messages.append(f"dims: rule {i} constant action should have length {act_space.dim}")
                ok = False
        elif kind == "affine":
            if "weights" in action and np.shape(action["weights"]) != (act_space.dim, obs_space.dim):
                messages.append(f"dims: rule {i} weights should be {act_space.dim}x{obs_space.dim}")
                ok = False
            if "bias" in action and np.shape(action["bias"]) != (act_space.dim,):
                messages.append(f"dims: rule {i} bias should have length {act_space.dim}")
                ok = False
    return ok


def _evaluate_raw(rule: dict, obs: np.ndarray) -> None:
    for c in rule["condition"]:
        OPS[c["op"]](float(obs[c["index"]]), c["threshold"])
    action = rule["action"]
    if action["kind"] == "constant":
        a = np.asarray(action["value"], dtype=float)
    else:
        a = np.asarray(action["weights"], dtype=float) @ obs + np.asarray(action["bias"], dtype=float)
    q = float(rule["q_value"])
    if not (np.isfinite(a).all() and np.isfinite(q)):
        raise FloatingPointError("non-finite action or Q-value")


def check_bug_free(doc: dict, env, messages: list, n_states: int = BUG_CHECK_STATES,
                   seed: int = 0) -> bool:
    """Evaluate every rule (not only the first match) on sampled states."""
    try:
        states = sample_states(env, n_states, seed)
        for i, rule in enumerate(doc["rules"]):
            for obs in states:
                try:
                    _evaluate_raw(rule, obs)
                except Exception as exc:
                    messages.append(f"bug: rule {i} failed on a sampled state: {exc!r}")
                    return False
    except Exception as exc:
        messages.append(f"bug: rule set could not be evaluated: {exc!r}")
        return False
    return True


def validate_response(raw: str, env, n_states: int = BUG_CHECK_STATES,
                      seed: int = 0) -> tuple[Optional[RuleSet], ValidationReport]:
    """Score ``raw`` on the five checks; return a RuleSet only when all pass."""
    report = ValidationReport()
    msgs = report.messages
    strict = _strict_json(raw)
    doc = strict if isinstance(strict, dict) else _lenient_json(raw)
    if doc is None:
        msgs.append("no JSON object found in the answer")
        return None, report
    report.template_adherence = check_template(strict, strict is not None, msgs)
    report.code_completeness = check_completeness(doc, msgs)
    report.correct_q_values = check_q_values(doc, msgs)
    report.correct_state_action_dim = check_dims(doc, env, msgs)
    report.bug_free = check_bug_free(doc, env, msgs, n_states, seed)
    if not report.passed:
        return None, report
    try:
        rs = RuleSet.from_dict(doc)
        rs.check(env)
    except ValueError as exc:  # a check above should have caught this
        msgs.append(f"rule set rejected after validation: {exc}")
        report.bug_free = False
        return None, report
    return rs, report
