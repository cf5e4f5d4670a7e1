"""Uniform chat-completion interface with deterministic record/replay.

Four modes: ``live`` talks to an OpenAI-style chat-completions endpoint,
``record`` does a live call and appends the verbatim response to the cache,
``replay`` answers from the cache only, and ``mock`` answers with a
deterministic function of the request fingerprint. Replay and mock runs are
pure functions of their inputs, byte-stable across machines.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import ConstraintViolated, GatewayTimeout, ProviderError, ReplayMiss

logger = logging.getLogger(__name__)

ENV_API_KEY = "RELRAE_API_KEY"
ENV_BASE_URL = "RELRAE_BASE_URL"

MODES = ("live", "record", "replay", "mock")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    prompt: str
    temperature: float
    constrained_choices: tuple[str, ...] | None = None
    max_output_tokens: int = 256

    def __post_init__(self):
        if self.constrained_choices is not None:
            if not self.constrained_choices:
                raise ValueError("constrained_choices must be non-empty when present")
            if len(set(self.constrained_choices)) != len(self.constrained_choices):
                raise ValueError("constrained_choices must be duplicate-free")


def fingerprint(req: ChatRequest) -> str:
    """Stable cross-platform request fingerprint.

    Canonical JSON over (model_id, prompt, temperature, constrained_choices);
    max_output_tokens deliberately excluded so truncation limits never split
    the cache.
    """
    payload = {
        "model_id": req.model_id,
        "prompt": req.prompt,
        "temperature": req.temperature,
        "constrained_choices": list(req.constrained_choices) if req.constrained_choices else None,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ReplayCache:
    """JSON Lines cache: one {fingerprint, model_id, response} object per line.

    Reads are lock-free on an immutable snapshot dict; appends are serialized.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    self.entries.setdefault(obj["fingerprint"], obj["response"])

    def get(self, fp: str) -> str | None:
        return self.entries.get(fp)

    def add(self, fp: str, model_id: str, response: str) -> None:
        with self._lock:
            if fp in self.entries:
                return
            self.entries[fp] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(
                    {"fingerprint": fp, "model_id": model_id, "response": response},
                    ensure_ascii=False,
                ) + "\n")


@dataclass
class GatewayConfig:
    mode: str = "mock"
    cache_path: str | None = None
    base_url: str | None = None
    api_key: str | None = None
    chat_path: str = "/v1/chat/completions"
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    timeout: float = 60.0
    max_in_flight: int = 8

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"llm mode must be one of {MODES}, got {self.mode!r}")
        if self.base_url is None:
            self.base_url = os.environ.get(ENV_BASE_URL)
        if self.api_key is None:
            self.api_key = os.environ.get(ENV_API_KEY)


class LiveTransport:
    """Single supported wire shape: OpenAI-style chat completions over HTTPS."""

    def __init__(self, config: GatewayConfig):
        if not config.base_url:
            raise ProviderError(None, f"no base URL configured (set {ENV_BASE_URL})")
        self.config = config
        self._session = requests.Session()

    def send(self, req: ChatRequest, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + self.config.chat_path
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            scheme = f"{self.config.auth_scheme} " if self.config.auth_scheme else ""
            headers[self.config.auth_header] = scheme + self.config.api_key
        body = {
            "model": req.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        last_exc: Exception | None = None
        for attempt in range(2):
            if attempt:
                time.sleep(0.5 + random.random())
            try:
                response = self._session.post(url, json=body, headers=headers,
                                              timeout=self.config.timeout)
            except requests.Timeout as exc:
                last_exc = exc
                continue
            except requests.RequestException as exc:
                raise ProviderError(None, str(exc)) from exc
            if response.status_code != 200:
                raise ProviderError(response.status_code, response.text[:500])
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(response.status_code,
                                    f"unexpected response shape: {response.text[:200]}") from exc
        raise GatewayTimeout(f"request to {url} timed out twice") from last_exc


def _mock_response(req: ChatRequest) -> str:
    fp = fingerprint(req)
    if req.constrained_choices:
        index = int(fp[:8], 16) % len(req.constrained_choices)
        return req.constrained_choices[index]
    return json.dumps({"label": "hasMock" + fp[:6].upper()})


class LlmGateway:
    """Shareable across threads; concurrent requests bounded by max_in_flight."""

    def __init__(self, config: GatewayConfig, transport: LiveTransport | None = None):
        self.config = config
        self.cache: ReplayCache | None = None
        if config.mode in ("record", "replay"):
            if not config.cache_path:
                raise ValueError(f"{config.mode} mode requires a cache path")
            self.cache = ReplayCache(config.cache_path)
        self._transport = transport
        if transport is None and config.mode in ("live", "record"):
            # fail fast on missing endpoint config instead of per request
            self._transport = LiveTransport(config)
        self._slots = threading.Semaphore(max(1, config.max_in_flight))

    def _live(self) -> LiveTransport:
        if self._transport is None:
            self._transport = LiveTransport(self.config)
        return self._transport

    def complete(self, req: ChatRequest) -> str:
        """Raw response text for the request, per the configured mode."""
        fp = fingerprint(req)
        mode = self.config.mode
        if mode == "mock":
            return _mock_response(req)
        if mode == "replay":
            cached = self.cache.get(fp)
            if cached is None:
                raise ReplayMiss(fp)
            return cached
        if mode == "record":
            cached = self.cache.get(fp)
            if cached is not None:
                return cached
        prompt = req.prompt
        if req.constrained_choices:
            # no native constrained decoding on the wire; instruct and validate
            prompt = prompt + "\n\nAnswer with exactly one of: " + ", ".join(req.constrained_choices)
        with self._slots:
            response = self._live().send(req, prompt)
        if mode == "record":
            self.cache.add(fp, req.model_id, response)
        return response

    def complete_constrained(self, req: ChatRequest) -> str:
        """A member of req.constrained_choices, or ConstraintViolated."""
        if not req.constrained_choices:
            raise ValueError("complete_constrained requires constrained_choices")
        raw = self.complete(req)
        normalized = raw.strip().rstrip(".!?,;:").strip().casefold()
        for choice in req.constrained_choices:
            if normalized == choice.casefold():
                return choice
        raise ConstraintViolated(raw, req.constrained_choices)
