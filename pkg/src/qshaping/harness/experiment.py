"""Experiment configs and the multi-arm comparison runner."""

from __future__ import annotations

import functools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..agents.heuristic_set import HeuristicSet
from ..envs import REGISTRY, EnvConfig
from ..heuristics.errors import ConfigurationError, ProviderError
from ..heuristics.providers import provide
from ..population import PopulationConfig, run_population
from .metrics import ComparisonSummary, summarize
from .training import AgentSpec, default_backbone, train


@dataclass
class ArmConfig:
    """One arm: a plain agent, or a population run when ``population`` is given."""

    algo_id: str
    baseline: bool = False
    population: Optional[dict] = None
    heuristic: Optional[dict] = None
    agent: Optional[dict] = None


@dataclass
class ExperimentConfig:
    env: EnvConfig
    agent: AgentSpec
    total_steps: int
    seeds: list
    arms: list = field(default_factory=list)
    heuristic: Optional[dict] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            env_doc = doc["env"]
            env = EnvConfig(env_doc) if isinstance(env_doc, str) else EnvConfig.from_dict(env_doc)
            if env.env_id not in REGISTRY:
                raise ConfigurationError(f"unknown env_id {env.env_id!r}; known: {sorted(REGISTRY)}")
            agent_doc = doc.get("agent") or {"backbone": default_backbone(env.env_id)}
            agent = AgentSpec.from_dict(agent_doc)
            total = int(doc["total_steps"])
            seeds = [int(s) for s in doc.get("seeds", [0])]
            arms = [ArmConfig(**a) for a in doc.get("arms", [{"algo_id": "vanilla", "baseline": True}])]
            if total < 1:
                raise ConfigurationError("total_steps must be positive")
            if len({a.algo_id for a in arms}) != len(arms):
                raise ConfigurationError("arm algo_ids must be unique")
            for a in arms:
                if a.population is not None:
                    population_config(a, total, 0)
        except ConfigurationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid experiment config: {exc!r}") from exc
        return cls(env, agent, total, seeds, arms, doc.get("heuristic"))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    @property
    def baselines(self) -> list:
        return [a.algo_id for a in self.arms if a.baseline]


def population_config(arm: ArmConfig, total_steps: int, seed: int) -> PopulationConfig:
    doc = dict(arm.population)
    num = int(doc.get("num_agents", PopulationConfig.num_agents))
    # outer seed s owns agent seeds s*num .. s*num + num - 1
    return PopulationConfig(**{**doc, "total_steps": total_steps, "base_seed": seed * num})


def arm_heuristics(exp: ExperimentConfig, arm: ArmConfig) -> Optional[HeuristicSet]:
    """Heuristic set shared by every run of a population arm, or None for plain arms."""
    if arm.population is None:
        return None
    pop = population_config(arm, exp.total_steps, 0)
    if not pop.shaping:
        return None
    cfg = arm.heuristic if arm.heuristic is not None else exp.heuristic
    if cfg is None:
        raise ConfigurationError(f"arm {arm.algo_id!r} shapes but no heuristic provider is configured")
    try:
        return provide(cfg, exp.env)
    except ProviderError as exc:
        if pop.on_provider_error == "abort":
            raise
        return HeuristicSet(provenance=f"fallback:{exc}")


def _const(hs):
    return hs


def run_unit(job):
    """One (arm, seed) cell; returns the curve that represents it."""
    exp, arm, seed, hs = job
    spec = AgentSpec.from_dict(arm.agent) if arm.agent else exp.agent
    if arm.population is None:
        return train(exp.env, spec, exp.total_steps, seed, arm.algo_id).curve
    pop = population_config(arm, exp.total_steps, seed)
    provider = functools.partial(_const, hs) if hs is not None else None
    report = run_population(pop, exp.env, spec, provider, algo_id=arm.algo_id)
    curve = report.retained_curve
    curve.algo_id, curve.seed = arm.algo_id, seed
    return curve


@dataclass
class ComparisonResult:
    curves: dict  # algo_id -> list of curves ordered like seeds
    summary: ComparisonSummary


def run_comparison(exp: ExperimentConfig, jobs: int = 1) -> ComparisonResult:
    """Every arm on every seed, then the summary. Output does not depend on ``jobs``."""
    if not exp.baselines:
        raise ConfigurationError("at least one arm must be marked as baseline")
    heuristics = {arm.algo_id: arm_heuristics(exp, arm) for arm in exp.arms}
    units = [(exp, arm, seed, heuristics[arm.algo_id]) for arm in exp.arms for seed in exp.seeds]
    if jobs <= 1 or len(units) <= 1:
        results = [run_unit(u) for u in units]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(units))) as pool:
            results = list(pool.map(run_unit, units))
    curves, k = {}, 0
    for arm in exp.arms:
        curves[arm.algo_id] = results[k:k + len(exp.seeds)]
        k += len(exp.seeds)
    return ComparisonResult(curves, summarize(exp.env.env_id, curves, exp.baselines))
