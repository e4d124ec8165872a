"""Heuristic providers that talk to something outside the process.

``fetch_remote`` posts the assembled prompt to an OpenAI-compatible chat-completion
endpoint; ``fetch_subprocess`` pipes it through a local program instead.
"""

from __future__ import annotations

import json
import logging
import os
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import httpx

from .errors import ConfigurationError, ProviderError
from .prompt import PromptBundle

log = logging.getLogger(__name__)

ENV_BASE_URL = "QSHAPE_LLM_BASE_URL"
ENV_API_KEY = "QSHAPE_LLM_API_KEY"
ENV_MODEL = "QSHAPE_LLM_MODEL"
DEFAULT_MODEL = "gpt-4o"

SYSTEM_MESSAGE = "You write heuristic rule sets as JSON for reinforcement-learning agents."
TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass
class RemoteConfig:
    base_url: str
    api_key: str
    model: str = DEFAULT_MODEL
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0  # seconds before the first retry, doubled after each
    max_concurrency: int = 4
    temperature: float = 0.0

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None, **overrides) -> "RemoteConfig":
        environ = os.environ if environ is None else environ
        base_url = overrides.pop("base_url", None) or environ.get(ENV_BASE_URL)
        api_key = overrides.pop("api_key", None) or environ.get(ENV_API_KEY)
        model = overrides.pop("model", None) or environ.get(ENV_MODEL) or DEFAULT_MODEL
        if not base_url:
            raise ConfigurationError(f"{ENV_BASE_URL} is not set")
        if not api_key:
            raise ConfigurationError(f"{ENV_API_KEY} is not set")
        if overrides.get("max_attempts", 1) < 1:
            raise ConfigurationError("max_attempts must be at least 1")
        return cls(base_url.rstrip("/"), api_key, model, **overrides)


_limiters: dict = {}
_limiters_lock = threading.Lock()


def _limiter(n: int) -> threading.BoundedSemaphore:
    with _limiters_lock:
        if n not in _limiters:
            _limiters[n] = threading.BoundedSemaphore(n)
        return _limiters[n]


def _request_body(config: RemoteConfig, prompt: PromptBundle) -> dict:
    return {
        "model": config.model,
        "temperature": config.temperature,
        "messages": [
            {"role": "system", "content": SYSTEM_MESSAGE},
            {"role": "user", "content": prompt.assembled},
        ],
    }


def extract_content(body: str) -> str:
    """Message text of a chat-completion response; any other body is returned as is."""
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        return body
    if isinstance(doc, dict) and isinstance(doc.get("choices"), list) and doc["choices"]:
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"unexpected chat-completion payload: {exc!r}") from exc
    return body


def fetch_remote(config: RemoteConfig, prompt: PromptBundle,
                 client: Optional[httpx.Client] = None,
                 sleep: Callable[[float], None] = time.sleep) -> str:
    """POST the prompt and return the raw response text.

    Transport errors and transient statuses are retried with exponential backoff up to
    ``config.max_attempts`` times; other HTTP errors fail immediately.
    """
    if not config.api_key:
        raise ConfigurationError(f"{ENV_API_KEY} is not set")
    url = f"{config.base_url}/chat/completions"
    headers = {"Authorization": f"Bearer {config.api_key}"}
    body = _request_body(config, prompt)
    owned = client is None
    client = client or httpx.Client(timeout=config.timeout)
    status = None
    try:
        with _limiter(config.max_concurrency):
            for attempt in range(1, config.max_attempts + 1):
                try:
                    resp = client.post(url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    status, reason = None, repr(exc)
                else:
                    status = resp.status_code
                    if status < 400:
                        return extract_content(resp.text)
                    reason = f"HTTP {status}"
                    if status not in TRANSIENT_STATUS:
                        raise ProviderError(f"{url} answered {reason}: {resp.text[:200]}", status)
                if attempt == config.max_attempts:
                    break
                delay = config.backoff * 2 ** (attempt - 1)
                log.warning("attempt %d/%d failed (%s); retrying in %.2fs",
                            attempt, config.max_attempts, reason, delay)
                sleep(delay)
    finally:
        if owned:
            client.close()
    raise ProviderError(f"{url} failed after {config.max_attempts} attempts ({reason})", status)


def fetch_subprocess(command: Sequence[str], prompt: PromptBundle, timeout: float = 300.0) -> str:
    """Run ``command`` with the assembled prompt on stdin and return its stdout."""
    try:
        proc = subprocess.run(list(command), input=prompt.assembled, capture_output=True,
                              text=True, timeout=timeout, check=False)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"provider command not found: {command[0]}") from exc
    except subprocess.TimeoutExpired as exc:
        raise ProviderError(f"provider command timed out after {timeout}s") from exc
    if proc.returncode != 0:
        raise ProviderError(f"provider command exited with {proc.returncode}: {proc.stderr.strip()[:200]}",
                            proc.returncode)
    return proc.stdout
