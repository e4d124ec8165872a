"""Provider configurations and the single entry point that turns one into a HeuristicSet.

A provider config is a dict with a ``kind``:

- ``oracle``: ``{"mode": "exact", "k": null, "seed": 0}``. Value iteration for tabular
  envs, the reference controller for PointMassReach.
- ``file``: ``{"path": ...}`` holding a saved HeuristicSet.
- ``rules``: ``{"path": ...}`` holding a rule-set answer, validated then materialized.
- ``remote``: chat-completion endpoint; ``base_url``/``api_key``/``model`` fall back to the
  QSHAPE_LLM_* environment variables.
- ``subprocess``: ``{"command": [...]}``, a program reading the prompt on stdin.
- ``none``: the empty set.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from ..agents.heuristic_set import HeuristicSet
from ..envs import MdpEnv, make_env
from .errors import ConfigurationError, HeuristicValidationError
from .oracle import continuous_oracle, oracle_heuristics
from .prompt import build_prompt
from .remote import RemoteConfig, fetch_remote, fetch_subprocess
from .rules import materialize
from .validate import validate_response

KINDS = ("oracle", "file", "rules", "remote", "subprocess", "none")
REMOTE_KEYS = ("base_url", "api_key", "model", "timeout", "max_attempts", "backoff",
               "max_concurrency", "temperature")


def _check_kind(cfg: dict) -> str:
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigurationError(f"heuristic provider kind must be one of {KINDS}, got {kind!r}")
    return kind


def fetch_raw(cfg: dict, env) -> str:
    """Raw answer of a ``rules``, ``remote`` or ``subprocess`` provider."""
    kind = _check_kind(cfg)
    if kind == "rules":
        return _read(cfg)
    prompt = build_prompt(cfg.get("template"), env)
    if kind == "remote":
        remote = RemoteConfig.from_env(**{k: cfg[k] for k in REMOTE_KEYS if k in cfg})
        return fetch_remote(remote, prompt)
    if kind == "subprocess":
        command = cfg.get("command")
        if not command:
            raise ConfigurationError("subprocess provider needs a command")
        return fetch_subprocess(command, prompt, cfg.get("timeout", 300.0))
    raise ConfigurationError(f"provider kind {kind!r} has no raw answer")


def _read(cfg: dict) -> str:
    if "path" not in cfg:
        raise ConfigurationError(f"{cfg['kind']} provider needs a path")
    path = Path(cfg["path"])
    if not path.is_file():
        raise ConfigurationError(f"heuristic file not found: {path}")
    return path.read_text(encoding="utf-8")


def provide(cfg: Optional[dict], env_config, seed: int = 0) -> HeuristicSet:
    """Fetch, validate and materialize heuristics for the environment ``env_config``."""
    cfg = cfg or {"kind": "none"}
    kind = _check_kind(cfg)
    env = make_env(env_config)
    seed = int(cfg.get("seed", seed))
    if kind == "none":
        return HeuristicSet(provenance="none")
    if kind == "oracle":
        mode = cfg.get("mode", "exact")
        if isinstance(env, MdpEnv):
            return oracle_heuristics(env.mdp, mode, cfg.get("k"), seed, cfg.get("param"))
        return continuous_oracle(env, mode, seed, cfg.get("param"), cfg.get("sample_budget", 50))
    if kind == "file":
        hs = HeuristicSet.from_dict(json.loads(_read(cfg)))
        obs_space, act_space, _ = env.spec()
        hs.check_dims(obs_space, act_space)
        return hs
    raw = fetch_raw(cfg, env)
    rs, report = validate_response(raw, env)
    if rs is None:
        raise HeuristicValidationError(
            f"heuristic answer failed validation: {'; '.join(report.messages)}", report)
    return materialize(rs, env, seed)
