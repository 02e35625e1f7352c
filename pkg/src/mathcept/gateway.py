"""Client for OpenAI-compatible chat-completions endpoints.

Supports live calls, record mode (live with an append-only cassette), and
replay mode (cassette only, no network). Replay keyed by the sha256 of the
full rendered prompt, so any template change misses stale entries.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests

log = logging.getLogger(__name__)

_BACKOFF_BASE_SECONDS = 1.0
_BACKOFF_FACTOR = 2.0
_CHECKPOINT_EVERY = 10


class GatewayError(RuntimeError):
    pass


class CacheMissError(GatewayError):
    def __init__(self, prompt_hash: str):
        super().__init__(f"replay cache miss for prompt hash {prompt_hash}")
        self.prompt_hash = prompt_hash


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Exchange:
    prompt_hash: str
    prompt_text: str
    response_text: str
    model_id: str
    timestamp: str

    def as_dict(self) -> dict:
        return {
            "prompt_hash": self.prompt_hash,
            "prompt_text": self.prompt_text,
            "response_text": self.response_text,
            "model_id": self.model_id,
            "timestamp": self.timestamp,
        }


@dataclass
class GatewayConfig:
    endpoint_url: str = ""
    model_id: str = ""
    temperature: float = 0.0
    max_retries: int = 3
    requests_per_minute: int = 60
    mode: str = "replay"  # live | replay | record

    @classmethod
    def from_env(cls, mode: str = "live", **overrides) -> "GatewayConfig":
        values = dict(
            endpoint_url=os.environ.get("MATHCEPT_LLM_URL", ""),
            model_id=os.environ.get("MATHCEPT_LLM_MODEL", ""),
            mode=mode,
        )
        values.update(overrides)
        return cls(**values)


class Cassette:
    """Append-only jsonl store of Exchanges, indexed by prompt hash.

    Later lines win on duplicate hashes. Appends are serialized and
    flushed so an interrupted run loses at most the line in flight.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._by_hash: dict[str, Exchange] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with self.path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError:
                    log.warning("%s:%d: skipping unparseable cassette line", self.path, line_no)
                    continue
                exchange = Exchange(
                    prompt_hash=raw["prompt_hash"],
                    prompt_text=raw.get("prompt_text", ""),
                    response_text=raw["response_text"],
                    model_id=raw.get("model_id", ""),
                    timestamp=raw.get("timestamp", ""),
                )
                self._by_hash[exchange.prompt_hash] = exchange

    def get(self, digest: str) -> Exchange | None:
        return self._by_hash.get(digest)

    def __contains__(self, digest: str) -> bool:
        return digest in self._by_hash

    def __len__(self) -> int:
        return len(self._by_hash)

    def append(self, exchange: Exchange) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(exchange.as_dict(), ensure_ascii=False) + "\n")
                fh.flush()
            self._by_hash[exchange.prompt_hash] = exchange

    @staticmethod
    def record(path: str | Path, prompt: str, response: str, model_id: str = "") -> "Cassette":
        """Convenience for tests and fixtures: append one exchange."""
        cassette = Cassette(path)
        cassette.append(
            Exchange(
                prompt_hash=prompt_hash(prompt),
                prompt_text=prompt,
                response_text=response,
                model_id=model_id,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
        )
        return cassette


class _RateLimiter:
    """Token-bucket limiter enforcing a minimum gap between requests."""

    def __init__(self, requests_per_minute: int, sleep=time.sleep, clock=time.monotonic):
        self.interval = 60.0 / requests_per_minute if requests_per_minute > 0 else 0.0
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def acquire(self) -> None:
        if self.interval <= 0:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self.interval
        if wait > 0:
            self._sleep(wait)


class Gateway:
    """complete() and complete_batch() against one configured endpoint."""

    def __init__(
        self,
        config: GatewayConfig,
        cassette: Cassette | None = None,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        if config.mode not in ("live", "replay", "record"):
            raise GatewayError(f"unknown gateway mode {config.mode!r}")
        if config.mode in ("replay", "record") and cassette is None:
            raise GatewayError(f"{config.mode} mode requires a cassette")
        self.config = config
        self.cassette = cassette
        self._session = session or requests.Session()
        self._sleep = sleep
        self._limiter = _RateLimiter(config.requests_per_minute, sleep=sleep)

    def complete(self, prompt: str) -> str:
        digest = prompt_hash(prompt)
        mode = self.config.mode
        if mode in ("replay", "record"):
            hit = self.cassette.get(digest)
            if hit is not None:
                return hit.response_text
            if mode == "replay":
                raise CacheMissError(digest)
        response = self._request(prompt)
        if mode == "record":
            self.cassette.append(
                Exchange(
                    prompt_hash=digest,
                    prompt_text=prompt,
                    response_text=response,
                    model_id=self.config.model_id,
                    timestamp=datetime.now(timezone.utc).isoformat(),
                )
            )
        return response

    def _request(self, prompt: str) -> str:
        api_key = os.environ.get("MATHCEPT_LLM_KEY", "")
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(_BACKOFF_BASE_SECONDS * _BACKOFF_FACTOR ** (attempt - 1))
            self._limiter.acquire()
            try:
                resp = self._session.post(
                    self.config.endpoint_url, json=body, headers=headers, timeout=120
                )
            except requests.RequestException as exc:
                last_error = exc
                log.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code // 100 == 2:
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (KeyError, IndexError, ValueError) as exc:
                    raise GatewayError(f"malformed completion payload: {exc}") from exc
            excerpt = resp.text[:200]
            last_error = GatewayError(f"HTTP {resp.status_code}: {excerpt}")
            if resp.status_code < 500 and resp.status_code != 429:
                break
            log.warning("HTTP %d (attempt %d)", resp.status_code, attempt + 1)
        raise GatewayError(
            f"request failed after {self.config.max_retries + 1} attempts: {last_error}"
        )

    def complete_batch(
        self,
        prompts: list[str],
        concurrency: int = 1,
        checkpoint_path: str | Path | None = None,
    ) -> tuple[list[str | None], dict[int, str]]:
        """Run prompts with bounded concurrency.

        Returns (responses aligned with prompts, {index: error} for
        failures). A checkpoint file makes reruns skip completed items.
        """
        if concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        results: list[str | None] = [None] * len(prompts)
        failures: dict[int, str] = {}
        done: dict[str, str] = {}
        checkpoint_file = None
        pending_since_flush = 0
        ck_lock = threading.Lock()
        if checkpoint_path is not None:
            checkpoint_path = Path(checkpoint_path)
            if checkpoint_path.exists():
                for line in checkpoint_path.read_text(encoding="utf-8").splitlines():
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        continue
                    done[entry["prompt_hash"]] = entry["response_text"]
            checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
            checkpoint_file = checkpoint_path.open("a", encoding="utf-8")

        def run_one(index: int) -> None:
            nonlocal pending_since_flush
            digest = prompt_hash(prompts[index])
            if digest in done:
                results[index] = done[digest]
                return
            try:
                text = self.complete(prompts[index])
            except Exception as exc:
                failures[index] = str(exc)
                return
            results[index] = text
            if checkpoint_file is not None:
                with ck_lock:
                    checkpoint_file.write(
                        json.dumps({"prompt_hash": digest, "response_text": text}) + "\n"
                    )
                    pending_since_flush += 1
                    if pending_since_flush >= _CHECKPOINT_EVERY:
                        checkpoint_file.flush()
                        os.fsync(checkpoint_file.fileno())
                        pending_since_flush = 0

        try:
            if concurrency == 1:
                for i in range(len(prompts)):
                    run_one(i)
            else:
                with ThreadPoolExecutor(max_workers=concurrency) as pool:
                    list(pool.map(run_one, range(len(prompts))))
        finally:
            if checkpoint_file is not None:
                checkpoint_file.flush()
                os.fsync(checkpoint_file.fileno())
                checkpoint_file.close()
        return results, failures
