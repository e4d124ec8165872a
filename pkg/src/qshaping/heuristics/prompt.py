"""Prompt assembly: code template + environment introduction + configuration."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

TEMPLATE_HEADER = "### TEMPLATE"
ENVIRONMENT_HEADER = "### ENVIRONMENT"
CONFIG_HEADER = "### CONFIG"


@dataclass(frozen=True)
class PromptBundle:
    code_template: str
    env_introduction: str
    env_config_text: str
    assembled: str


def default_template_path() -> Path:
    return Path(str(resources.files("qshaping.heuristics") / "templates" / "rule_template.md"))


def config_text(env) -> str:
    """Space summaries followed by the environment configuration as JSON."""
    obs_space, act_space, config = env.spec()
    return (f"observation: {obs_space.describe()}\n"
            f"action: {act_space.describe()}\n"
            f"config:\n{config.to_json()}")


def build_prompt(template_path=None, env=None, description: Optional[str] = None) -> PromptBundle:
    """Concatenate template, env description and env config under fixed headers.

    ``description`` overrides the environment's shipped description document.
    """
    if env is None:
        raise ValueError("build_prompt needs an environment")
    path = Path(template_path) if template_path is not None else default_template_path()
    if not path.is_file():
        raise FileNotFoundError(f"prompt template not found: {path}")
    template = path.read_text(encoding="utf-8")
    intro = env.description if description is None else description
    cfg = config_text(env)
    assembled = (f"{TEMPLATE_HEADER}\n{template}\n\n"
                 f"{ENVIRONMENT_HEADER}\n{intro}\n\n"
                 f"{CONFIG_HEADER}\n{cfg}\n")
    return PromptBundle(template, intro, cfg, assembled)
