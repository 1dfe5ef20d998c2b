"""Pluggable chat-completion backend over HTTP.

Wire contract: POST a JSON body ``{model, messages: [{role, content}]}``
to a configurable URL and read the first choice's message content.
Configuration comes from CODEVET_MODEL_URL / CODEVET_MODEL_KEY /
CODEVET_MODEL_NAME unless given explicitly.
"""

from __future__ import annotations

import os
from typing import Protocol, Sequence

import requests

from .errors import BackendMalformedReply, BackendUnreachable

Message = dict


class ModelBackend(Protocol):
    """Anything that can answer a chat-style message list with text."""

    def complete(self, messages: Sequence[Message]) -> str: ...


class HttpModelBackend:
    def __init__(
        self,
        url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
    ):
        self.url = url or os.environ.get("CODEVET_MODEL_URL", "")
        self.model = model or os.environ.get("CODEVET_MODEL_NAME", "")
        self.api_key = api_key if api_key is not None else os.environ.get("CODEVET_MODEL_KEY", "")
        self.timeout = timeout
        if not self.url:
            raise ValueError("model backend URL not configured (CODEVET_MODEL_URL)")

    def complete(self, messages: Sequence[Message]) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model, "messages": list(messages)}
        try:
            response = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendUnreachable(f"backend request failed: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnreachable(
                f"backend returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendMalformedReply(response.text) from exc
        if not isinstance(content, str):
            raise BackendMalformedReply(response.text)
        return content


class StaticBackend:
    """Always replies with the same text; handy for tests and dry runs."""

    def __init__(self, reply: str):
        self.reply = reply

    def complete(self, messages: Sequence[Message]) -> str:
        return self.reply


class ReplayBackend:
    """Replays recorded replies keyed by a caller-chosen key function.

    Default keying is the last message content, which matches how the
    prompts are built (one user message per request).
    """

    def __init__(self, recorded: dict[str, str]):
        self.recorded = dict(recorded)

    def complete(self, messages: Sequence[Message]) -> str:
        key = messages[-1]["content"]
        try:
            return self.recorded[key]
        except KeyError:
            raise BackendUnreachable("no recorded reply for prompt") from None
