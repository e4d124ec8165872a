"""Population training: explore, shape, explore, select the best half, continue."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .agents.heuristic_set import HeuristicSet
from .envs import EnvConfig, make_env
from .harness.metrics import EvalRecord, LearningCurve
from .harness.training import AgentSpec, Trainer, make_agent, shaping_hook
from .heuristics.errors import ProviderError

log = logging.getLogger(__name__)

ON_PROVIDER_ERROR = ("abort", "fallback")


@dataclass
class PopulationConfig:
    num_agents: int = 20
    initial_explore_steps: int = 5000
    post_shape_explore_steps: int = 10000
    keep_count: int = 10
    total_steps: int = 50000
    base_seed: int = 0
    q_shaping: bool = True
    policy_shaping: bool = True
    selection: bool = True
    on_provider_error: str = "abort"

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be positive")
        if self.selection and not 1 <= self.keep_count <= self.num_agents:
            raise ValueError(f"keep_count {self.keep_count} must lie in [1, num_agents={self.num_agents}]")
        if self.on_provider_error not in ON_PROVIDER_ERROR:
            raise ValueError(f"on_provider_error must be one of {ON_PROVIDER_ERROR}")
        if self.shaping and self.total_steps < self.initial_explore_steps:
            raise ValueError("total_steps ends before the shaping step")
        if self.selection and self.total_steps < self.selection_step:
            raise ValueError("total_steps ends before the selection step")

    @property
    def shaping(self) -> bool:
        return self.q_shaping or self.policy_shaping

    @property
    def selection_step(self) -> int:
        return self.initial_explore_steps + self.post_shape_explore_steps

    def agent_seed(self, i: int) -> int:
        return self.base_seed + i

    @classmethod
    def from_dict(cls, doc: dict) -> "PopulationConfig":
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PopulationReport:
    config: PopulationConfig
    curves: list  # per agent, index = agent id
    retained: list
    selection_returns: list  # per agent; None when selection is off
    phase_log: list = field(default_factory=list)
    heuristic_provenance: str = ""

    @property
    def retained_curve(self) -> LearningCurve:
        """Mean over retained agents of each evaluation's mean return."""
        return average_curve([self.curves[i] for i in self.retained], "population")

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "retained": self.retained,
                "selection_returns": self.selection_returns, "phase_log": self.phase_log,
                "heuristic_provenance": self.heuristic_provenance,
                "retained_curve": self.retained_curve.to_dict(),
                "curves": [c.to_dict() for c in self.curves]}


def average_curve(curves: Sequence[LearningCurve], algo_id: str) -> LearningCurve:
    """Record-wise average; episode returns are pooled so mean/std stay recomputable."""
    n = min(len(c.records) for c in curves)
    records = []
    for j in range(n):
        pooled = [r for c in curves for r in c.records[j].episode_returns]
        records.append(EvalRecord.from_returns(curves[0].records[j].step, pooled))
    first = curves[0]
    return LearningCurve(first.env_id, algo_id, first.seed, records, first.interval)


def select_top(agents: Sequence[int], keep_count: int, evaluator: Callable[[int], float]) -> list:
    """Ids of the ``keep_count`` best agents by ``evaluator``, ties to the lower id.

    Returned in ascending id order.
    """
    agents = list(agents)
    if keep_count > len(agents):
        raise ValueError(f"keep_count {keep_count} exceeds population size {len(agents)}")
    if keep_count < 0:
        raise ValueError("keep_count must be non-negative")
    scores = {i: float(evaluator(i)) for i in agents}
    ranked = sorted(agents, key=lambda i: (-scores[i], i))
    return sorted(ranked[:keep_count])


def _phase_one(job):
    spec, env_config, seed, algo_id, until, hooks = job
    env = make_env(env_config)
    trainer = Trainer(make_agent(spec, env, seed), env_config, seed, algo_id)
    return trainer.advance(until, hooks)


def _phase_two(job):
    trainer, until = job
    return trainer.advance(until)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def default_workers() -> int:
    return os.cpu_count() or 1


def run_population(cfg: PopulationConfig, env_config: EnvConfig, spec: AgentSpec,
                   provider: Optional[Callable[[], HeuristicSet]] = None,
                   evaluator: Optional[Callable[[int, Trainer], float]] = None,
                   workers: int = 1, algo_id: str = "qshaping") -> PopulationReport:
    """Run the population protocol and return per-agent curves plus the selection.

    ``provider`` is called once; its HeuristicSet is shared by every agent. ``evaluator``
    scores agent ``i`` at the selection barrier; by default it reads the mean return of the
    evaluation recorded at the selection step. Results do not depend on ``workers``.
    """
    phase_log = []
    hs = None
    if cfg.shaping:
        try:
            if provider is None:
                raise ProviderError("shaping is enabled but no heuristic provider was given")
            hs = provider()
        except ProviderError as exc:
            if cfg.on_provider_error == "abort":
                raise
            log.warning("heuristic provider failed (%s); continuing with an empty set", exc)
            hs = HeuristicSet(provenance=f"fallback:{exc}")
        phase_log.append({"phase": "heuristics", "pairs": len(hs), "provenance": hs.provenance})

    first_stop = min(cfg.selection_step, cfg.total_steps) if cfg.selection else cfg.total_steps
    hooks = {}
    if cfg.shaping:
        hooks[cfg.initial_explore_steps] = shaping_hook(hs, cfg.q_shaping, cfg.policy_shaping)
    jobs = [(spec, env_config, cfg.agent_seed(i), algo_id, first_stop, hooks)
            for i in range(cfg.num_agents)]
    trainers = _map(_phase_one, jobs, workers)
    for i, tr in enumerate(trainers):
        if cfg.shaping:
            phase_log.append({"phase": "explore", "agent": i, "start": 0, "end": cfg.initial_explore_steps})
            phase_log.append({"phase": "shape", "agent": i, "step": cfg.initial_explore_steps,
                              "events": [e for e in tr.events if e["kind"] == "shape"]})
            phase_log.append({"phase": "explore", "agent": i, "start": cfg.initial_explore_steps,
                              "end": first_stop})
        else:
            phase_log.append({"phase": "explore", "agent": i, "start": 0, "end": first_stop})

    ids = list(range(cfg.num_agents))
    selection_returns = [None] * cfg.num_agents
    if cfg.selection:
        # barrier: every agent has reached the selection step before anyone continues
        assert all(tr.step == cfg.selection_step for tr in trainers)
        if evaluator is None:
            evaluator = _recorded_return(cfg.selection_step)
        selection_returns = [float(evaluator(i, trainers[i])) for i in ids]
        retained = select_top(ids, cfg.keep_count, lambda i: selection_returns[i])
        phase_log.append({"phase": "select", "step": cfg.selection_step, "retained": retained,
                          "returns": selection_returns})
        log.info("selection at step %d kept %s", cfg.selection_step, retained)
    else:
        retained = ids

    if cfg.total_steps > first_stop:
        continued = _map(_phase_two, [(trainers[i], cfg.total_steps) for i in retained], workers)
        for i, tr in zip(retained, continued):
            trainers[i] = tr
            phase_log.append({"phase": "train", "agent": i, "start": first_stop, "end": cfg.total_steps})

    return PopulationReport(cfg, [tr.curve for tr in trainers], retained, selection_returns,
                            phase_log, hs.provenance if hs is not None else "")


def _recorded_return(step: int):
    def evaluator(i: int, trainer: Trainer) -> float:
        for rec in trainer.curve.records:
            if rec.step == step:
                return rec.mean_return
        return trainer.evaluate().mean_return
    return evaluator


def agent_means(report: PopulationReport) -> np.ndarray:
    """Matrix of mean returns, agents by evaluation step (shortest curve length)."""
    n = min(len(c.records) for c in report.curves)
    return np.array([c.means[:n] for c in report.curves])
