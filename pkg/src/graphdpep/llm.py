"""Backend-agnostic text generation and embedding.

Two generation backends share one request shape: a live HTTP chat-completion
endpoint and an offline replay store. Every response that passes through the
client is appended to a JSON-lines cache keyed by a content hash of the
request, which is what makes replay runs and resumption deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import requests

from .errors import BackendUnavailable, ReplayMiss

log = logging.getLogger(__name__)

API_KEY_ENV = "GRAPHDPEP_API_KEY"

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_NEW_TOKENS = 1024
DEFAULT_MAX_NEW_TOKENS_ENSEMBLE = 256
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_S = 1.0
DEFAULT_CONCURRENCY = 8

HASHMOCK_DIM = 64


@dataclass(frozen=True)
class GenerationRequest:
    model: str
    prompt_text: str
    temperature: float = DEFAULT_TEMPERATURE
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    stop: tuple[str, ...] = ()
    seed: Optional[int] = None


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    model: str
    usage: dict
    cached: bool = False


def cache_key(req: GenerationRequest) -> str:
    """Stable 64-hex content hash of everything that shapes a completion."""
    payload = {
        "model": req.model,
        "prompt_text": req.prompt_text,
        "temperature": req.temperature,
        "max_new_tokens": req.max_new_tokens,
        "stop": list(req.stop),
        "seed": req.seed,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class HttpBackend:
    """Chat-completion endpoint speaking the standard wire shape.

    Retries transient failures (network errors, HTTP >= 500) with exponential
    backoff; a 4xx means misconfiguration and fails immediately.
    """

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        retries: int = DEFAULT_RETRIES,
        backoff_s: float = DEFAULT_BACKOFF_S,
        timeout_s: float = 120.0,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.retries = retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self.session = session or requests.Session()
        self._sleep = sleep

    @property
    def backend_id(self) -> str:
        return f"http:{self.base_url}"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, url: str, body: dict) -> dict:
        last_err: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self.session.post(
                    url, json=body, headers=self._headers(), timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_err = exc
                self._sleep(self.backoff_s * (2**attempt))
                continue
            if 400 <= resp.status_code < 500:
                raise BackendUnavailable(
                    f"endpoint rejected request with HTTP {resp.status_code}: {resp.text[:200]}"
                )
            if resp.status_code >= 500:
                last_err = BackendUnavailable(f"HTTP {resp.status_code} from {url}")
                self._sleep(self.backoff_s * (2**attempt))
                continue
            return resp.json()
        raise BackendUnavailable(f"{url} unreachable after {self.retries} attempts: {last_err}")

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        body = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt_text}],
            "temperature": req.temperature,
            "max_tokens": req.max_new_tokens,
        }
        if req.seed is not None:
            body["seed"] = req.seed
        if req.stop:
            body["stop"] = list(req.stop)
        data = self._post(f"{self.base_url}/chat/completions", body)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed completion payload: {exc}") from exc
        return GenerationResponse(
            text=text, model=req.model, usage=data.get("usage", {}), cached=False
        )

    def embed(self, texts: Sequence[str], model: str) -> np.ndarray:
        body = {"model": model, "input": list(texts)}
        data = self._post(f"{self.base_url}/embeddings", body)
        try:
            vecs = [item["embedding"] for item in data["data"]]
        except (KeyError, TypeError) as exc:
            raise BackendUnavailable(f"malformed embeddings payload: {exc}") from exc
        return np.asarray(vecs, dtype=np.float64)


class ReplayBackend:
    """Offline backend that serves canned responses keyed by cache_key."""

    def __init__(self, fixture_path: str | Path):
        self.fixture_path = str(fixture_path)
        self._responses: dict[str, dict] = {}
        with open(fixture_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                self._responses[row["key"]] = row

    @property
    def backend_id(self) -> str:
        return f"replay:{self.fixture_path}"

    def __len__(self) -> int:
        return len(self._responses)

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        key = cache_key(req)
        row = self._responses.get(key)
        if row is None:
            raise ReplayMiss(key)
        return GenerationResponse(
            text=row["response_text"],
            model=row.get("model", req.model),
            usage=row.get("usage", {}),
            cached=True,
        )


class GenerationClient:
    """Cache-through wrapper around a generation backend.

    Thread-safe: concurrent generate() calls are allowed, cache appends go
    through one lock so the JSONL file never interleaves.
    """

    def __init__(self, backend, cache_path: Optional[str | Path] = None):
        self.backend = backend
        self.cache_path = str(cache_path) if cache_path is not None else None
        self._lock = threading.Lock()
        self._cache: dict[str, dict] = {}
        self.backend_calls = 0
        if self.cache_path and os.path.exists(self.cache_path):
            with open(self.cache_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        row = json.loads(line)
                        self._cache[row["key"]] = row

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        key = cache_key(req)
        with self._lock:
            row = self._cache.get(key)
        if row is not None:
            return GenerationResponse(
                text=row["response_text"],
                model=row.get("model", req.model),
                usage=row.get("usage", {}),
                cached=True,
            )
        with self._lock:
            self.backend_calls += 1
        resp = self.backend.generate(req)
        row = {
            "key": key,
            "model": resp.model,
            "response_text": resp.text,
            "usage": resp.usage,
            "created_unix": int(time.time()),
        }
        with self._lock:
            self._cache[key] = row
            if self.cache_path:
                with open(self.cache_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
        return resp


def _expand_digest(seed_material: bytes, n_words: int) -> np.ndarray:
    """Counter-mode SHA-256 expansion into uint64 words."""
    words: list[int] = []
    counter = 0
    while len(words) < n_words:
        block = hashlib.sha256(seed_material + counter.to_bytes(4, "big")).digest()
        for off in range(0, 32, 8):
            words.append(int.from_bytes(block[off : off + 8], "big"))
        counter += 1
    return np.array(words[:n_words], dtype=np.float64)


class HashMockEmbedder:
    """Deterministic stand-in embedder used for offline runs and tests.

    Construction, bit-exactly: let m = sha256(seed_be64 || 0x00 || utf8(text))
    where seed_be64 is the 64-bit big-endian seed. Expand m in counter mode,
    h_i = sha256(m || i_be32) for i = 0, 1, ..., and read consecutive 8-byte
    big-endian unsigned words from the h_i. Each word u becomes the component
    u / 2**64 * 2 - 1 in [-1, 1). The first 64 components, L2-normalized,
    are the embedding.
    """

    def __init__(self, seed: int = 0, dim: int = HASHMOCK_DIM):
        self.seed = seed
        self.dim = dim

    @property
    def backend_id(self) -> str:
        return f"hashmock-{self.dim}-seed{self.seed}"

    def _one(self, text: str) -> np.ndarray:
        material = hashlib.sha256(
            self.seed.to_bytes(8, "big", signed=False) + b"\x00" + text.encode("utf-8")
        ).digest()
        words = _expand_digest(material, self.dim)
        vec = words / float(2**64) * 2.0 - 1.0
        norm = np.linalg.norm(vec)
        if norm == 0.0:  # unreachable in practice, but keep the contract total
            vec = np.ones(self.dim)
            norm = np.linalg.norm(vec)
        return vec / norm

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self._one(t) for t in texts])


@dataclass
class HttpEmbedder:
    """Embedding provider backed by the HTTP /embeddings route."""

    backend: HttpBackend
    model: str
    dim: Optional[int] = field(default=None)

    @property
    def backend_id(self) -> str:
        return f"http-embed:{self.model}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim or 0), dtype=np.float64)
        vecs = self.backend.embed(texts, self.model)
        if self.dim is None:
            self.dim = int(vecs.shape[1])
        elif vecs.shape[1] != self.dim:
            raise BackendUnavailable(
                f"embedding dim changed mid-run: {vecs.shape[1]} != {self.dim}"
            )
        return vecs


def make_embedder(kind: str, base_url: str = "", model: str = "", seed: int = 0):
    if kind == "hashmock":
        return HashMockEmbedder(seed=seed)
    if kind == "http":
        return HttpEmbedder(HttpBackend(base_url), model)
    raise ValueError(f"unknown embedder kind {kind!r}")
