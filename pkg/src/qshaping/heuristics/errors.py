from __future__ import annotations

from typing import Optional


class ConfigurationError(RuntimeError):
    """Missing or malformed provider configuration (for example an absent API key)."""


class ProviderError(RuntimeError):
    """A heuristic provider could not deliver a response."""

    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class HeuristicValidationError(ProviderError):
    """A provider answered, but the answer failed validation."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class RuleValidationError(ValueError):
    """A rule set does not fit the environment it is applied to."""
