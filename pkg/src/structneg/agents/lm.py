"""Chat-completion backend.

Requests are OpenAI-style JSON: ``{"model", "messages": [{"role", "content"}],
"max_tokens", "temperature"}``; the completion is read from
``choices[0].message.content``. Credentials come from the environment.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import httpx

logger = logging.getLogger(__name__)

ROLE_SCHEMES = ("two_role_transcript", "three_role_dialogue")
RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}


class ConfigurationError(ValueError):
    pass


class LmError(RuntimeError):
    """Retries exhausted or the provider answered with something unusable."""


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 5
    backoff: float = 1.0
    multiplier: float = 2.0
    max_backoff: float = 60.0

    def delay(self, attempt: int) -> float:
        return min(self.backoff * self.multiplier**attempt, self.max_backoff)


@dataclass
class LmBackend:
    """Connection settings for one model.

    ``provider_roles`` lists the roles the provider accepts, as
    (orchestration, agent[, system-style]) names; the dialogue scheme needs the
    third.
    """

    model_id: str
    endpoint: str = ""
    temperature: float | None = None
    max_tokens: int = 512
    role_scheme: str = "two_role_transcript"
    provider_roles: tuple[str, ...] = ("user", "assistant", "system")
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    api_key_env: str = "NEGOTIATE_API_KEY"
    max_concurrency: int = 4
    timeout: float = 60.0
    transport: httpx.BaseTransport | None = None
    sleep: object = time.sleep

    def __post_init__(self):
        if self.role_scheme not in ROLE_SCHEMES:
            raise ConfigurationError(f"unknown role scheme {self.role_scheme!r}")
        if self.role_scheme == "three_role_dialogue" and len(self.provider_roles) < 3:
            raise ConfigurationError(
                f"{self.model_id}: dialogue format needs a system-style third role; "
                f"provider offers only {list(self.provider_roles)}"
            )
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if not self.endpoint:
            self.endpoint = os.environ.get("NEGOTIATE_API_BASE", "https://api.openai.com/v1/chat/completions")
        self._slots = threading.BoundedSemaphore(self.max_concurrency)
        self._client = httpx.Client(transport=self.transport, timeout=self.timeout)
        self.response_ids: list[str] = []

    @property
    def human_role(self) -> str:
        return self.provider_roles[0]

    @property
    def ai_role(self) -> str:
        return self.provider_roles[1]

    @property
    def system_role(self) -> str:
        return self.provider_roles[2]

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, messages: Sequence[dict]) -> str:
        """POST ``messages`` and return the completion text, retrying on
        transport errors, rate limits and server errors."""
        payload = {"model": self.model_id, "messages": list(messages), "max_tokens": self.max_tokens}
        if self.temperature is not None:
            payload["temperature"] = self.temperature
        last = None
        with self._slots:
            for attempt in range(self.retry.attempts):
                logger.debug("request %s attempt %d: %s", self.endpoint, attempt + 1, payload)
                try:
                    resp = self._client.post(self.endpoint, json=payload, headers=self._headers())
                except httpx.TransportError as exc:
                    last = exc
                    logger.warning("transport error from %s: %r", self.endpoint, exc)
                else:
                    if resp.status_code in RETRY_STATUS:
                        last = LmError(f"HTTP {resp.status_code}")
                        retry_after = resp.headers.get("retry-after")
                        logger.warning("HTTP %d from %s", resp.status_code, self.endpoint)
                        if attempt + 1 < self.retry.attempts:
                            wait = float(retry_after) if retry_after and retry_after.isdigit() else self.retry.delay(attempt)
                            self.sleep(wait)
                        continue
                    if resp.status_code >= 400:
                        raise LmError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                    return self._parse(resp)
                if attempt + 1 < self.retry.attempts:
                    self.sleep(self.retry.delay(attempt))
        raise LmError(f"retries exhausted after {self.retry.attempts} attempts: {last!r}")

    def _parse(self, resp: httpx.Response) -> str:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LmError(f"malformed provider response: {resp.text[:200]}") from exc
        if not isinstance(text, str):
            raise LmError("malformed provider response: content is not text")
        if body.get("id"):
            self.response_ids.append(body["id"])
        logger.debug("response: %s", text)
        return text

    def describe(self) -> dict:
        return {"type": "lm", "model_id": self.model_id, "endpoint": self.endpoint,
                "temperature": self.temperature, "max_tokens": self.max_tokens,
                "role_scheme": self.role_scheme}


def build_messages(backend: LmBackend, context) -> list[dict]:
    """Pack a :class:`~structneg.protocol.Context` into role-tagged messages."""
    if isinstance(context, str):
        return [{"role": backend.human_role, "content": context}]
    if isinstance(context, (list, tuple)):
        return list(context)
    if backend.role_scheme == "two_role_transcript":
        # agent replies in the AI role; everything it reads comes from orchestration roles
        if len(backend.provider_roles) < 3:
            return [{"role": backend.human_role, "content": context.text}]
        body = context.text[len(context.initialization):].lstrip("\n")
        return [{"role": backend.system_role, "content": context.initialization},
                {"role": backend.human_role, "content": body}]
    system, human, ai = backend.system_role, backend.human_role, backend.ai_role
    out = [{"role": system, "content": context.initialization}]
    for ev in context.history:
        if ev.kind == "message":
            out.append({"role": ai if ev.agent == context.agent else human, "content": ev.text})
        else:
            out.append({"role": system, "content": f"Your private note from round {ev.round}:\n{ev.text}"})
    tail = context.instruction if not context.banner else f"{context.banner}\n\n{context.instruction}"
    out.append({"role": system, "content": tail})
    return out


def lm_generate(backend: LmBackend, context) -> str:
    return backend.complete(build_messages(backend, context))


class LmAgent:
    """Negotiation backend that asks a language model for each step."""

    def __init__(self, backend: LmBackend):
        self.backend = backend

    def generate(self, kind: str, view) -> str:
        return lm_generate(self.backend, view.context)

    def describe(self) -> dict:
        return self.backend.describe()
