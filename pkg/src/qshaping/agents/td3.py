from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..nn import Adam, Network, soft_update
from .buffer import ReplayBuffer
from .heuristic_set import HeuristicSet


@dataclass
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    explore_noise: float = 0.1
    target_noise: float = 0.2
    noise_clip: float = 0.5
    batch_size: int = 256
    hidden: tuple = (64, 64)
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    buffer_capacity: int = 200_000
    start_steps: int = 1000
    q_shaping_steps: int = 1000
    policy_shaping_steps: int = 500
    lambda1: float = 1.0
    lambda2: float = 0.1
    repulsion_margin: Optional[float] = None
    shaping_batch: int = 256
    dtype: str = "float32"

    @classmethod
    def from_dict(cls, doc: dict) -> "Td3Config":
        doc = dict(doc)
        if "hidden" in doc:
            doc["hidden"] = tuple(doc["hidden"])
        return cls(**doc)


class Td3Agent:
    """Twin critics, delayed tanh-bounded actor, target policy smoothing.

    Actions live in ``[act_low, act_high]``; the actor's tanh output is mapped affinely
    onto that box and noise scales are relative to its half-width.
    """

    def __init__(self, obs_dim: int, act_low, act_high, config: Optional[Td3Config] = None,
                 seed: int = 0):
        self.config = cfg = config or Td3Config()
        self.obs_dim = obs_dim
        self.act_low = np.asarray(act_low, dtype=float)
        self.act_high = np.asarray(act_high, dtype=float)
        self.act_dim = self.act_low.size
        self.mid = (self.act_high + self.act_low) / 2.0
        self.half = (self.act_high - self.act_low) / 2.0
        self.seed = seed
        init_ss, buf_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
        init_rng = np.random.default_rng(init_ss)
        self.rng = np.random.default_rng(noise_ss)
        hidden = list(cfg.hidden)
        dt = np.dtype(cfg.dtype)
        self.actor = Network.init([obs_dim, *hidden, self.act_dim], init_rng, "tanh", dt)
        self.critic1 = Network.init([obs_dim + self.act_dim, *hidden, 1], init_rng, dtype=dt)
        self.critic2 = Network.init([obs_dim + self.act_dim, *hidden, 1], init_rng, dtype=dt)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = Adam(self.actor, lr=cfg.actor_lr)
        self.critic1_opt = Adam(self.critic1, lr=cfg.critic_lr)
        self.critic2_opt = Adam(self.critic2, lr=cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, obs_dim, self.act_dim, seed=buf_ss)
        self.total_it = 0
        self.env_steps = 0

    @classmethod
    def for_env(cls, env, seed: int = 0, config: Optional[Td3Config] = None) -> "Td3Agent":
        obs_space, act_space, _ = env.spec()
        return cls(obs_space.dim, act_space.low, act_space.high, config, seed)

    def policy(self, obs) -> np.ndarray:
        """Deterministic action(s) ``mu(s)`` for a batch or a single observation."""
        y = self.actor.forward(obs)
        return self.mid + self.half * y

    def q1(self, obs, act) -> np.ndarray:
        return self.critic1.forward(np.concatenate([np.atleast_2d(obs), np.atleast_2d(act)], axis=1))[:, 0]

    def act(self, obs, explore: bool = False) -> np.ndarray:
        if explore and self.env_steps < self.config.start_steps:
            return self.rng.uniform(self.act_low, self.act_high)
        return select_action(self, obs, explore)

    def observe(self, obs, action, reward, next_obs, terminated) -> None:
        self.buffer.add(obs, action, reward, next_obs, terminated)
        self.env_steps += 1
        if len(self.buffer) >= self.config.batch_size:
            td3_train_step(self, self.buffer)

    def shape(self, hs: HeuristicSet, q_shaping: bool = True, policy_shaping: bool = True) -> dict:
        cfg = self.config
        out = {}
        if q_shaping:
            out["q_shaping"] = q_shaping_phase(self, hs, cfg.q_shaping_steps)
        if policy_shaping:
            out["policy_shaping"] = policy_shaping_phase(
                self, hs, cfg.lambda1, cfg.lambda2, cfg.policy_shaping_steps, cfg.repulsion_margin)
        return out

    def snapshot(self) -> "Td3Agent":
        """Evaluation copy with its own actor and noise generator."""
        clone = Td3Agent.__new__(Td3Agent)
        clone.__dict__.update({k: v for k, v in self.__dict__.items()
                               if k not in ("buffer", "actor_opt", "critic1_opt", "critic2_opt")})
        clone.actor = self.actor.copy()
        clone.rng = np.random.default_rng()
        clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone

    def networks(self) -> dict:
        return {"actor": self.actor, "actor_target": self.actor_target,
                "critic1": self.critic1, "critic1_target": self.critic1_target,
                "critic2": self.critic2, "critic2_target": self.critic2_target}

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, net in self.networks().items():
            net.save(d / f"{name}.json")
        meta = {"obs_dim": self.obs_dim, "act_low": self.act_low.tolist(),
                "act_high": self.act_high.tolist(), "seed": self.seed,
                "total_it": self.total_it, "env_steps": self.env_steps,
                "td3": asdict(self.config)}
        (d / "config.json").write_text(json.dumps(meta, indent=1))
        (d / "optim.json").write_text(json.dumps({
            "actor": self.actor_opt.state_dict(), "critic1": self.critic1_opt.state_dict(),
            "critic2": self.critic2_opt.state_dict()}))
        (d / "rng.json").write_text(json.dumps({
            "noise": self.rng.bit_generator.state, "buffer": self.buffer.rng.bit_generator.state}))

    @classmethod
    def load(cls, directory) -> "Td3Agent":
        """Restore networks, optimizer moments and RNG streams (the replay buffer is not saved)."""
        d = Path(directory)
        meta = json.loads((d / "config.json").read_text())
        agent = cls(meta["obs_dim"], meta["act_low"], meta["act_high"],
                    Td3Config.from_dict(meta["td3"]), meta["seed"])
        for name in agent.networks():
            setattr(agent, name, Network.load(d / f"{name}.json"))
        optim = json.loads((d / "optim.json").read_text())
        agent.actor_opt.load_state_dict(optim["actor"])
        agent.critic1_opt.load_state_dict(optim["critic1"])
        agent.critic2_opt.load_state_dict(optim["critic2"])
        rngs = json.loads((d / "rng.json").read_text())
        agent.rng.bit_generator.state = rngs["noise"]
        agent.buffer.rng.bit_generator.state = rngs["buffer"]
        agent.total_it = meta["total_it"]
        agent.env_steps = meta["env_steps"]
        return agent


def select_action(agent, obs, explore: bool = False):
    """Greedy action, plus Gaussian exploration noise for continuous agents when ``explore``."""
    if not isinstance(agent, Td3Agent):
        return agent.act(obs, explore)
    a = agent.policy(obs)[0]
    if explore:
        a = a + agent.rng.normal(0.0, agent.config.explore_noise, size=agent.act_dim) * agent.half
    return np.clip(a, agent.act_low, agent.act_high)


def _critic_step(net: Network, opt: Adam, x: np.ndarray, target: np.ndarray) -> float:
    out, cache = net.forward_cached(x)
    diff = out[:, 0] - target
    loss = float(np.mean(diff ** 2))
    grads, _ = net.backward(cache, (2.0 * diff / diff.size)[:, None], input_grad=False)
    opt.step(net, grads)
    return loss


def _actor_step(agent: Td3Agent, obs: np.ndarray) -> float:
    y, cache = agent.actor.forward_cached(obs)
    act = agent.mid + agent.half * y
    q, c_cache = agent.critic1.forward_cached(np.concatenate([obs, act], axis=1))
    n = obs.shape[0]
    _, dx = agent.critic1.backward(c_cache, np.full((n, 1), -1.0 / n))
    grads, _ = agent.actor.backward(cache, dx[:, agent.obs_dim:] * agent.half, input_grad=False)
    agent.actor_opt.step(agent.actor, grads)
    return float(-q.mean())


def td3_train_step(agent: Td3Agent, buffer: ReplayBuffer) -> dict:
    """One TD3 iteration; the actor and targets move every ``policy_delay`` iterations."""
    cfg = agent.config
    obs, act, rew, next_obs, done = buffer.sample(cfg.batch_size)
    agent.total_it += 1
    noise = np.clip(agent.rng.normal(0.0, cfg.target_noise, size=act.shape),
                    -cfg.noise_clip, cfg.noise_clip) * agent.half
    next_act = np.clip(agent.mid + agent.half * agent.actor_target.forward(next_obs) + noise,
                       agent.act_low, agent.act_high)
    x_next = np.concatenate([next_obs, next_act], axis=1)
    q_next = np.minimum(agent.critic1_target.forward(x_next), agent.critic2_target.forward(x_next))[:, 0]
    target = rew + cfg.gamma * (1.0 - done) * q_next
    x = np.concatenate([obs, act], axis=1)
    critic_loss = _critic_step(agent.critic1, agent.critic1_opt, x, target) + \
        _critic_step(agent.critic2, agent.critic2_opt, x, target)
    out = {"critic_loss": critic_loss}
    if agent.total_it % cfg.policy_delay == 0:
        out["actor_loss"] = _actor_step(agent, obs)
        soft_update(agent.critic1_target, agent.critic1, cfg.tau)
        soft_update(agent.critic2_target, agent.critic2, cfg.tau)
        soft_update(agent.actor_target, agent.actor, cfg.tau)
    return out


def _shaping_batches(agent: Td3Agent, n: int, steps: int):
    """Full batch when it fits, otherwise seeded minibatches."""
    size = agent.config.shaping_batch
    for _ in range(steps):
        yield np.arange(n) if n <= size else agent.rng.integers(0, n, size=size)


def q_shaping_loss(net: Network, states, actions, q_values):
    """Squared error between heuristic Q-values and the critic; returns (loss, grads)."""
    x = np.concatenate([states, actions], axis=1)
    out, cache = net.forward_cached(x)
    diff = out[:, 0] - q_values
    grads, _ = net.backward(cache, (2.0 * diff / diff.size)[:, None], input_grad=False)
    return float(np.mean(diff ** 2)), grads


def q_shaping_phase(agent: Td3Agent, hs: HeuristicSet, steps: int) -> list:
    """Regress both critics onto the heuristic Q-values.

    The recorded loss per step is the mean over the two critics, measured before the
    update. Target critics are soft-updated after every step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    data = hs.arrays("all")
    if data is None:
        return []
    states, actions, q_values = data
    trace = []
    for idx in _shaping_batches(agent, len(q_values), steps):
        losses = []
        for net, opt, target in ((agent.critic1, agent.critic1_opt, agent.critic1_target),
                                 (agent.critic2, agent.critic2_opt, agent.critic2_target)):
            loss, grads = q_shaping_loss(net, states[idx], actions[idx], q_values[idx])
            opt.step(net, grads)
            soft_update(target, net, agent.config.tau)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return trace


def policy_shaping_loss(agent: Td3Agent, actor: Network, good, bad, lambda1: float,
                        lambda2: float, margin: Optional[float] = None):
    """Attract ``mu(s)`` to good actions and repel it from bad ones; returns (loss, grads).

    ``good``/``bad`` are ``(states, actions)`` tuples or ``None``. With ``margin`` set the
    repulsion becomes ``max(0, margin - ||mu(s) - a||^2)``.
    """
    parts = [(p, w) for p, w in ((good, lambda1), (bad, -lambda2)) if p is not None and w != 0]
    states = np.concatenate([p[0] for p, _ in parts])
    y, cache = actor.forward_cached(states)
    mu = agent.mid + agent.half * y
    d_mu = np.zeros_like(mu)
    loss = 0.0
    start = 0
    for (s, a), weight in parts:
        sl = slice(start, start + len(s))
        start += len(s)
        diff = mu[sl] - a
        sq = np.sum(diff ** 2, axis=1)
        n = len(s)
        if weight < 0 and margin is not None:
            active = sq < margin
            loss += -weight * float(np.mean(np.where(active, margin - sq, 0.0)))
            d_mu[sl] = weight * 2.0 * diff * active[:, None] / n
        else:
            loss += weight * float(np.mean(sq))
            d_mu[sl] = weight * 2.0 * diff / n
    grads, _ = actor.backward(cache, d_mu * agent.half, input_grad=False)
    return loss, grads


def policy_shaping_phase(agent: Td3Agent, hs: HeuristicSet, lambda1: float, lambda2: float,
                         steps: int, margin: Optional[float] = None) -> list:
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("lambda1 and lambda2 must be non-negative")
    good = hs.arrays("good")
    bad = hs.arrays("bad")
    if (lambda1 == 0 or good is None) and (lambda2 == 0 or bad is None):
        return []
    trace = []
    n_good = 0 if good is None else len(good[2])
    n_bad = 0 if bad is None else len(bad[2])
    for idx in _shaping_batches(agent, n_good + n_bad, steps):
        g_idx = idx[idx < n_good]
        b_idx = idx[idx >= n_good] - n_good
        g = (good[0][g_idx], good[1][g_idx]) if len(g_idx) else None
        b = (bad[0][b_idx], bad[1][b_idx]) if len(b_idx) else None
        if (g is None or lambda1 == 0) and (b is None or lambda2 == 0):
            continue
        loss, grads = policy_shaping_loss(agent, agent.actor, g, b, lambda1, lambda2, margin)
        agent.actor_opt.step(agent.actor, grads)
        soft_update(agent.actor_target, agent.actor, agent.config.tau)
        trace.append(loss)
    return trace
