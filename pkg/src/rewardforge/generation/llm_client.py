"""LLM client abstraction: HTTP chat endpoint, scripted replay, recording.

All clients implement `complete(messages, **params) -> str` where messages
are role-tagged dicts ({"role": ..., "content": ...}). Clients hold no
conversation state; callers resend full message lists.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Protocol

import httpx


class LLMTransportError(Exception):
    """Connection/HTTP-level failure talking to the model endpoint."""


class LLMClient(Protocol):
    def complete(self, messages: list[dict], **params) -> str: ...


class HttpLLMClient:
    """OpenAI-style chat-completions endpoint.

    Base URL and key come from arguments or the RF_LLM_URL / RF_LLM_KEY
    environment variables.
    """

    def __init__(
        self,
        base_url: str | None = None,
        model: str = "default",
        api_key: str | None = None,
        timeout: float = 120.0,
    ):
        self.base_url = (base_url or os.environ.get("RF_LLM_URL", "")).rstrip("/")
        if not self.base_url:
            raise ValueError("no endpoint: pass base_url or set RF_LLM_URL")
        self.model = model
        self.api_key = api_key or os.environ.get("RF_LLM_KEY", "")
        self.timeout = timeout

    def complete(self, messages: list[dict], **params) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model, "messages": messages, **params}
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            doc = resp.json()
            return doc["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise LLMTransportError(str(exc)) from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise LLMTransportError(f"malformed completion response: {exc}") from exc


class ScriptedLLMClient:
    """Replays a fixed list of responses; raises when exhausted."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self._cursor = 0
        self.calls: list[list[dict]] = []

    def complete(self, messages: list[dict], **params) -> str:
        self.calls.append(messages)
        if self._cursor >= len(self._responses):
            raise LLMTransportError("scripted client exhausted its responses")
        text = self._responses[self._cursor]
        self._cursor += 1
        return text


class RecordingClient:
    """Wraps a client and records every exchange (for golden fixtures)."""

    def __init__(self, inner: LLMClient):
        self.inner = inner
        self.exchanges: list[dict] = []

    def complete(self, messages: list[dict], **params) -> str:
        response = self.inner.complete(messages, **params)
        self.exchanges.append({"messages": messages, "response": response})
        return response

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.exchanges, indent=2))

    @staticmethod
    def replay_client(path: Path) -> ScriptedLLMClient:
        exchanges = json.loads(Path(path).read_text())
        return ScriptedLLMClient([e["response"] for e in exchanges])
