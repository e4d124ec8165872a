from .base import Env, EnvConfig, ProtocolError, SpaceSpec, StepResult, env_spec, load_description
from .continuous import PointMassReach, ReacherLite
from .discrete import ChainWalk, GridWorld, MdpEnv

REGISTRY = {cls.env_id: cls for cls in (ChainWalk, GridWorld, PointMassReach, ReacherLite)}


def make_env(config, seed=None) -> Env:
    """Build an environment from an :class:`EnvConfig`, a dict, or a bare env id."""
    if isinstance(config, str):
        config = EnvConfig(config)
    elif isinstance(config, dict):
        config = EnvConfig.from_dict(config)
    if config.env_id not in REGISTRY:
        raise KeyError(f"unknown env_id {config.env_id!r}; known: {sorted(REGISTRY)}")
    if seed is not None:
        config = EnvConfig(config.env_id, config.horizon, dict(config.params), int(seed))
    return REGISTRY[config.env_id](config)


__all__ = [
    "Env", "EnvConfig", "ProtocolError", "SpaceSpec", "StepResult", "env_spec",
    "load_description", "ChainWalk", "GridWorld", "MdpEnv", "PointMassReach",
    "ReacherLite", "REGISTRY", "make_env",
]
