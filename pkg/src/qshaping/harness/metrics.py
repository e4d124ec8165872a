"""Evaluation records, learning curves and the sample-efficiency arithmetic."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..envs import make_env

FAILED = "FAILED"
EVAL_INTERVAL = 5000
EVAL_EPISODES = 10
DISPLAY_CAP = 150.0

Steps = Union[int, float, str]  # grid step, median step, or FAILED


@dataclass
class EvalRecord:
    step: int
    episode_returns: list
    mean_return: float
    std_return: float

    @classmethod
    def from_returns(cls, step: int, returns: Sequence[float]) -> "EvalRecord":
        # exact summation, so identical returns give a std of exactly 0
        r = [float(x) for x in returns]
        return cls(int(step), r, statistics.fmean(r), statistics.pstdev(r))


@dataclass
class LearningCurve:
    env_id: str
    algo_id: str
    seed: int
    records: list = field(default_factory=list)
    interval: int = EVAL_INTERVAL

    def __post_init__(self):
        for i, rec in enumerate(self.records):
            if rec.step != (i + 1) * self.interval:
                raise ValueError(
                    f"record {i} at step {rec.step}; curves are sampled every {self.interval} steps")

    def append(self, rec: EvalRecord) -> None:
        expected = (len(self.records) + 1) * self.interval
        if rec.step != expected:
            raise ValueError(f"expected a record at step {expected}, got {rec.step}")
        self.records.append(rec)

    @property
    def steps(self) -> list:
        return [r.step for r in self.records]

    @property
    def means(self) -> list:
        return [r.mean_return for r in self.records]

    def to_dict(self) -> dict:
        return {"env_id": self.env_id, "algo_id": self.algo_id, "seed": self.seed,
                "interval": self.interval,
                "records": [{"step": r.step, "episode_returns": r.episode_returns,
                             "mean_return": r.mean_return, "std_return": r.std_return}
                            for r in self.records]}

    @classmethod
    def from_dict(cls, doc: dict) -> "LearningCurve":
        return cls(doc["env_id"], doc["algo_id"], doc["seed"],
                   [EvalRecord(**r) for r in doc["records"]], doc.get("interval", EVAL_INTERVAL))


def eval_seed(seed: int, step: int, episode: int) -> int:
    """Episode seed for evaluation, independent of the training streams."""
    ss = np.random.SeedSequence([int(seed), int(step), int(episode), 0xE7A1])
    return int(ss.generate_state(1)[0])


def run_episode(agent, env, seed: int) -> float:
    obs = env.reset(seed=seed)
    total = 0.0
    while True:
        res = env.step(agent.act(obs, explore=False))
        total += res.reward
        obs = res.observation
        if res.terminated or res.truncated:
            return total


def evaluate(agent, env_config, step: int, seed: int = 0,
             episodes: int = EVAL_EPISODES) -> EvalRecord:
    """Deterministic-policy returns over ``episodes`` episodes on a fresh environment."""
    env = make_env(env_config)
    returns = [run_episode(agent, env, eval_seed(seed, step, k)) for k in range(episodes)]
    return EvalRecord.from_returns(step, returns)


def threshold(peak: float, worst: Optional[float] = None) -> float:
    """Return level that counts as converged.

    With ``worst`` given: ``worst + 0.8 * (peak - worst)``. Without it: ``0.8 * peak`` for a
    non-negative peak and ``peak - 0.2 * |peak|`` for a negative one.
    """
    if worst is not None:
        return worst + 0.8 * (peak - worst)
    return 0.8 * peak if peak >= 0 else peak - 0.2 * abs(peak)


def convergence_steps(curve: LearningCurve, peak: float, worst: Optional[float] = None) -> Steps:
    """First evaluation step whose mean return reaches :func:`threshold`, else ``FAILED``."""
    if not curve.records:
        raise ValueError("curve has no records")
    level = threshold(peak, worst)
    for rec in curve.records:
        if rec.mean_return >= level:
            return rec.step
    return FAILED


def median_steps(values: Sequence[Steps]) -> Steps:
    """Median with FAILED treated as +inf."""
    arr = np.array([math.inf if v == FAILED else float(v) for v in values])
    med = float(np.median(arr))
    if math.isinf(med) or math.isnan(med):
        return FAILED
    return int(med) if med.is_integer() else med


@dataclass(frozen=True)
class Improvement:
    raw: Optional[float]
    display: Union[float, str]


def improvement(candidate_steps: Steps, reference_steps: Steps) -> Improvement:
    """Relative step saving ``(reference - candidate) / candidate * 100``, shown capped at 150."""
    if candidate_steps == FAILED:
        return Improvement(None, "N/A")
    if reference_steps == FAILED:
        return Improvement(None, f">{DISPLAY_CAP:g} (ref failed)")
    cand, ref = float(candidate_steps), float(reference_steps)
    if cand <= 0 or ref <= 0:
        raise ValueError("step counts must be positive")
    raw = (ref - cand) / cand * 100.0
    return Improvement(raw, min(raw, DISPLAY_CAP))


@dataclass
class ArmSummary:
    algo_id: str
    baseline: bool
    per_seed: list
    convergence_steps: Steps
    improvement: Improvement

    def to_dict(self) -> dict:
        return {"algo_id": self.algo_id, "baseline": self.baseline,
                "convergence_steps": self.convergence_steps,
                "per_seed_convergence_steps": self.per_seed,
                "improvement_raw": self.improvement.raw,
                "improvement_display": self.improvement.display}


@dataclass
class ComparisonSummary:
    env_id: str
    peak: Optional[float]
    worst: Optional[float]
    arms: list

    def to_dict(self) -> dict:
        return {"env_id": self.env_id, "peak": self.peak, "worst": self.worst,
                "arms": [a.to_dict() for a in self.arms]}

    def arm(self, algo_id: str) -> ArmSummary:
        for a in self.arms:
            if a.algo_id == algo_id:
                return a
        raise KeyError(algo_id)


def mean_curve(curves: Sequence[LearningCurve]) -> np.ndarray:
    """Seed-averaged mean returns over the shared step grid."""
    n = min(len(c.records) for c in curves)
    return np.mean([c.means[:n] for c in curves], axis=0)


def summarize(env_id: str, arms: dict, baselines: Sequence[str]) -> ComparisonSummary:
    """Peak, per-seed convergence and improvement for every arm.

    ``arms`` maps algo_id to its per-seed curves. Peak is the best seed-averaged
    evaluation of any baseline arm. ``worst`` is the lowest such value, capped at 0 so that
    curves of non-negative returns get the plain ``0.8 * peak`` threshold. Improvements are
    measured against the best baseline median.
    """
    if not arms:
        return ComparisonSummary(env_id, None, None, [])
    base = [mean_curve(arms[b]) for b in baselines if b in arms and arms[b]]
    if not base:
        raise ValueError("at least one baseline arm with curves is required")
    peak = float(max(c.max() for c in base))
    worst = min(0.0, float(min(c.min() for c in base)))
    per_arm = {}
    for algo_id, curves in arms.items():
        per_seed = [convergence_steps(c, peak, worst) for c in curves]
        per_arm[algo_id] = (per_seed, median_steps(per_seed))
    base_meds = [per_arm[b][1] for b in baselines if b in per_arm]
    finite = [m for m in base_meds if m != FAILED]
    best_ref = min(finite) if finite else FAILED
    out = []
    for algo_id, (per_seed, med) in per_arm.items():
        out.append(ArmSummary(algo_id, algo_id in baselines, per_seed, med,
                              improvement(med, best_ref)))
    return ComparisonSummary(env_id, peak, worst, out)
