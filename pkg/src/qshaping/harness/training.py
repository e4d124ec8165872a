"""Single-agent training loop with interleaved evaluation and step hooks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..agents import TabularAgent, Td3Agent, Td3Config
from ..envs import EnvConfig, make_env
from .metrics import EVAL_EPISODES, EVAL_INTERVAL, LearningCurve, evaluate

log = logging.getLogger(__name__)

BACKBONES = ("tabular", "td3")


@dataclass
class AgentSpec:
    """Backbone name plus keyword overrides for its constructor or config."""

    backbone: str = "tabular"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}; expected one of {BACKBONES}")

    @classmethod
    def from_dict(cls, doc: dict) -> "AgentSpec":
        doc = dict(doc)
        backbone = doc.pop("backbone", "tabular")
        params = doc.pop("params", {})
        return cls(backbone, {**doc, **params})

    def to_dict(self) -> dict:
        return {"backbone": self.backbone, "params": dict(self.params)}


def make_agent(spec: AgentSpec, env, seed: int):
    if spec.backbone == "tabular":
        return TabularAgent.for_env(env, seed=seed, **spec.params)
    return Td3Agent.for_env(env, seed=seed, config=Td3Config.from_dict(spec.params))


def default_backbone(env_id: str) -> str:
    return "tabular" if env_id in ("ChainWalk", "GridWorld") else "td3"


def env_stream_seed(seed: int) -> int:
    """Training-environment seed, kept apart from the agent's own streams."""
    return int(np.random.SeedSequence([int(seed), 0x5EED]).generate_state(1)[0])


class Trainer:
    """Runs one agent against one environment and records its learning curve.

    ``advance(until, hooks)`` can be called repeatedly; it resumes exactly where the
    previous call stopped. A hook registered for step ``k`` runs after the ``k``-th
    environment step and before the evaluation scheduled at that step.
    """

    def __init__(self, agent, env_config: EnvConfig, seed: int, algo_id: str = "vanilla",
                 eval_interval: int = EVAL_INTERVAL, eval_episodes: int = EVAL_EPISODES,
                 evaluate_during: bool = True):
        if eval_interval < 1:
            raise ValueError("eval_interval must be positive")
        self.agent = agent
        self.env_config = env_config
        self.seed = int(seed)
        self.eval_interval = eval_interval
        self.eval_episodes = eval_episodes
        self.evaluate_during = evaluate_during
        self.env = make_env(env_config, seed=env_stream_seed(seed))
        self.obs = self.env.reset()
        self.step = 0
        self.episodes = 0
        self.curve = LearningCurve(env_config.env_id, algo_id, self.seed, [], eval_interval)
        self.events: list = []

    def advance(self, until: int, hooks: Optional[dict] = None) -> "Trainer":
        hooks = hooks or {}
        agent, env = self.agent, self.env
        while self.step < until:
            action = agent.act(self.obs, explore=True)
            res = env.step(action)
            agent.observe(self.obs, action, res.reward, res.observation, res.terminated)
            self.step += 1
            if res.terminated or res.truncated:
                self.obs = env.reset()
                self.episodes += 1
            else:
                self.obs = res.observation
            hook = hooks.get(self.step)
            if hook is not None:
                hook(self)
            if self.evaluate_during and self.step % self.eval_interval == 0:
                self.curve.append(self.evaluate())
        return self

    def evaluate(self):
        agent = self.agent.snapshot() if hasattr(self.agent, "snapshot") else self.agent
        return evaluate(agent, self.env_config, self.step, self.seed, self.eval_episodes)

    def note(self, kind: str, **info) -> None:
        event = {"kind": kind, "step": self.step, **info}
        self.events.append(event)
        log.info("seed %d step %d: %s %s", self.seed, self.step, kind, info)


def train(env_config: EnvConfig, spec: AgentSpec, total_steps: int, seed: int = 0,
          algo_id: str = "vanilla", hooks: Optional[dict] = None) -> Trainer:
    """Build agent and trainer, then run to ``total_steps``."""
    env = make_env(env_config)
    trainer = Trainer(make_agent(spec, env, seed), env_config, seed, algo_id)
    return trainer.advance(total_steps, hooks)


def shaping_hook(hs, q_shaping: bool = True, policy_shaping: bool = True) -> Callable:
    """Hook applying the shaping phases (a picklable callable)."""
    return _ShapingHook(hs, q_shaping, policy_shaping)


@dataclass
class _ShapingHook:
    hs: object
    q_shaping: bool
    policy_shaping: bool

    def __call__(self, trainer: Trainer) -> None:
        agent = trainer.agent
        if isinstance(agent, TabularAgent):
            traces = agent.shape(self.hs) if self.q_shaping else {}
        else:
            traces = agent.shape(self.hs, self.q_shaping, self.policy_shaping)
        summary = {k: {"steps": len(v), "first": v[0] if v else None, "last": v[-1] if v else None}
                   for k, v in traces.items()}
        trainer.note("shape", pairs=len(self.hs), phases=summary)
