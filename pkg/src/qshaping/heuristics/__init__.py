"""Heuristic providers: rule sets, oracles, prompt assembly, remote fetch, validation."""

from .errors import ConfigurationError, HeuristicValidationError, ProviderError, RuleValidationError
from .oracle import continuous_oracle, oracle_heuristics, parse_mode, reference_rules
from .prompt import PromptBundle, build_prompt, default_template_path
from .providers import fetch_raw, provide
from .remote import RemoteConfig, extract_content, fetch_remote, fetch_subprocess
from .rules import (ActionExpr, Condition, HeuristicRule, RuleSet, first_match, materialize,
                    sample_states)
from .validate import METRICS, ValidationReport, validate_response

__all__ = [
    "ConfigurationError", "HeuristicValidationError", "ProviderError", "RuleValidationError",
    "continuous_oracle", "oracle_heuristics", "parse_mode", "reference_rules",
    "PromptBundle", "build_prompt", "default_template_path", "fetch_raw", "provide",
    "RemoteConfig", "extract_content", "fetch_remote", "fetch_subprocess",
    "ActionExpr", "Condition", "HeuristicRule", "RuleSet", "first_match", "materialize",
    "sample_states", "METRICS", "ValidationReport", "validate_response",
]
