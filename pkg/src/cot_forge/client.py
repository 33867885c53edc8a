"""Chat-completions client with retries, bounded concurrency and request pacing."""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence
from urllib.parse import urlparse

import httpx

from .core import GenerationConfig
from .errors import EndpointError, MalformedResponse

log = logging.getLogger(__name__)

API_KEY_ENV = "COT_FORGE_API_KEY"
RETRYABLE_STATUS = frozenset({429}) | frozenset(range(500, 600))


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    min_request_interval: float = 0.0  # milliseconds between request starts
    backoff_base: float = 500.0  # milliseconds
    backoff_cap: float = 30_000.0

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"base_url must be an absolute http(s) URL, got {self.base_url!r}")
        if not self.timeout > 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.min_request_interval < 0:
            raise ValueError("min_request_interval must be >= 0")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def resolved_api_key(self) -> str | None:
        return self.api_key or os.environ.get(API_KEY_ENV) or None

    def __repr__(self) -> str:
        key = "***" if self.api_key else None
        return f"EndpointConfig(base_url={self.base_url!r}, model_name={self.model_name!r}, api_key={key})"

    @property
    def name(self) -> str:
        return f"{self.model_name}@{self.base_url}"


class _Pacer:
    """Spaces consecutive request starts at least ``interval`` seconds apart."""

    def __init__(self, interval: float, clock: Callable[[], float] = time.monotonic):
        self.interval = interval
        self._clock = clock
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if self.interval <= 0:
            return
        with self._lock:
            now = self._clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            time.sleep(start - now)


def build_request(prompt: str, gen: GenerationConfig, model: str) -> dict:
    return {
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": gen.temperature,
        "max_tokens": gen.max_tokens,
    }


def read_completion(payload: object) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]  # type: ignore[index]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponse("reply has no choices[0].message.content") from None
    if not isinstance(content, str):
        raise MalformedResponse("choices[0].message.content is not a string")
    return content


class ModelClient:
    """Shareable client for one endpoint.

    ``max_concurrency`` bounds in-flight requests across every caller of this
    instance, and ``min_request_interval`` paces request starts (retries
    included).
    """

    def __init__(self, ep: EndpointConfig, *, sleep: Callable[[float], None] = time.sleep, rng: random.Random | None = None):
        self.ep = ep
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._rng_lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(ep.max_concurrency)
        self._pacer = _Pacer(ep.min_request_interval / 1000.0)
        headers = {"Content-Type": "application/json"}
        key = ep.resolved_api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(timeout=ep.timeout, headers=headers, trust_env=False)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ModelClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _backoff(self, attempt: int) -> float:
        ceiling = min(self.ep.backoff_cap, self.ep.backoff_base * (2**attempt)) / 1000.0
        with self._rng_lock:
            return self._rng.uniform(0.0, ceiling)

    def _post(self, body: dict) -> httpx.Response:
        with self._slots:
            self._pacer.wait()
            return self._http.post(self.ep.url, json=body)

    def complete(self, prompt: str, gen: GenerationConfig) -> str:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        body = build_request(prompt, gen, self.ep.model_name)
        attempts = self.ep.max_retries + 1
        last: EndpointError | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self._backoff(attempt - 1))
            try:
                resp = self._post(body)
            except httpx.TimeoutException as exc:
                last = EndpointError(f"request timed out: {exc}", attempts=attempt + 1)
                continue
            except httpx.TransportError as exc:
                last = EndpointError(f"transport error: {exc}", attempts=attempt + 1)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = EndpointError(f"HTTP {resp.status_code}", status=resp.status_code, attempts=attempt + 1)
                log.debug("retryable HTTP %s from %s (attempt %d)", resp.status_code, self.ep.url, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"HTTP {resp.status_code}: {resp.text[:200]}", status=resp.status_code, attempts=attempt + 1)
            try:
                payload = resp.json()
            except ValueError:
                raise MalformedResponse("reply is not JSON", status=resp.status_code, attempts=attempt + 1) from None
            return read_completion(payload)
        assert last is not None
        raise EndpointError(f"giving up after {attempts} attempt(s): {last}", status=last.status, attempts=attempts)

    def complete_batch(self, prompts: Sequence[str], gen: GenerationConfig) -> list[tuple[int, str | Exception]]:
        """Complete every prompt; item ``i`` of the result always belongs to ``prompts[i]``."""
        if not prompts:
            return []

        def one(i: int) -> tuple[int, str | Exception]:
            try:
                return i, self.complete(prompts[i], gen)
            except (EndpointError, ValueError) as exc:
                return i, exc

        workers = min(self.ep.max_concurrency, len(prompts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(len(prompts))))


def complete(prompt: str, gen: GenerationConfig, ep: EndpointConfig) -> str:
    with ModelClient(ep) as client:
        return client.complete(prompt, gen)


def complete_batch(prompts: Sequence[str], gen: GenerationConfig, ep: EndpointConfig) -> list[tuple[int, str | Exception]]:
    with ModelClient(ep) as client:
        return client.complete_batch(prompts, gen)


def with_overrides(ep: EndpointConfig, **changes) -> EndpointConfig:
    return replace(ep, **{k: v for k, v in changes.items() if v is not None})
