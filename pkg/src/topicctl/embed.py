"""Dense vectors for chunks and keyword candidates.

Three interchangeable backends sit behind :class:`Embedder`:

* ``stub``   deterministic hash-seeded vectors, no network (tests, acceptance)
* ``file``   read-only lookup in a precomputed cache file
* ``remote`` JSON-over-HTTP service, ``{"model", "inputs"} -> {"embeddings"}``

Every backend goes through the same content-addressed cache, keyed by
``sha256(model_name NUL text)``. Truncation of over-long inputs is left to the
remote server.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from topicctl.errors import BackendError, ConfigError

log = logging.getLogger(__name__)

BACKENDS = ("stub", "file", "remote")
CACHE_MAGIC = "EMB1"


@dataclass
class EmbedderConfig:
    backend: str = "stub"
    dimension: int = 768
    model_name: str = "all-mpnet-base-v2"
    endpoint_url: str | None = None
    cache_path: str | None = None
    max_in_flight: int = 4
    batch_size: int = 32
    max_retries: int = 3
    retry_base_s: float = 1.0
    timeout_s: float = 60.0

    def validate(self) -> None:
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown embedder backend {self.backend!r}")
        if self.dimension <= 0:
            raise ConfigError("embedding dimension must be positive")
        if self.max_in_flight < 1 or self.batch_size < 1:
            raise ConfigError("max_in_flight and batch_size must be >= 1")
        if self.backend == "remote" and not self.endpoint_url:
            raise ConfigError("remote embedder requires endpoint_url")
        if self.backend == "file" and not self.cache_path:
            raise ConfigError("file embedder requires cache_path")


@dataclass(frozen=True)
class EmbeddingMatrix:
    values: np.ndarray  # (n_rows, dimension) float32
    row_keys: tuple

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.row_keys):
            raise ValueError("values must be 2-D with one row per key")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("embedding matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# stub backend


def _hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


@lru_cache(maxsize=65536)
def _seeded_vector(seed: int, dimension: int) -> np.ndarray:
    vec = np.random.Generator(np.random.PCG64(seed)).standard_normal(dimension)
    vec.setflags(write=False)
    return vec


def _stub_tokens(text: str) -> list[str]:
    toks = (t.strip(".,;:!?\"'()[]{}‘’“”-") for t in text.lower().split())
    return [t for t in toks if t]


def stub_embedding(text: str, dimension: int) -> np.ndarray:
    """Unit vector seeded by the text hash, averaged with one vector per token.

    Shared vocabulary between two texts therefore yields positive cosine
    similarity. Independent of any global RNG state.
    """
    if dimension <= 0:
        raise ConfigError("dimension must be positive")
    lowered = text.lower()
    seed = _hash64("text\x00" + lowered) if lowered else 0
    acc = np.array(_seeded_vector(seed, dimension))
    tokens = _stub_tokens(lowered)
    for tok in tokens:
        acc += _seeded_vector(_hash64("token\x00" + tok), dimension)
    acc /= 1 + len(tokens)
    norm = np.linalg.norm(acc)
    return (acc / norm).astype(np.float32)


# ---------------------------------------------------------------------------
# cache


def cache_key(model_name: str, text: str) -> str:
    return hashlib.sha256(f"{model_name}\x00{text}".encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Content-addressed float32 vector store backed by one text file.

    File layout: a header line ``EMB1 <dimension>`` followed by JSON lines
    ``{"key": <hex>, "vec": [...]}``.
    """

    def __init__(self, dimension: int, path: str | Path | None = None):
        self.dimension = dimension
        self.path = Path(path) if path else None
        self._store: dict[str, np.ndarray] = {}
        self.dirty = False
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2 or header[0] != CACHE_MAGIC:
                raise ConfigError(f"{self.path}: not an {CACHE_MAGIC} embedding cache")
            if int(header[1]) != self.dimension:
                raise ConfigError(
                    f"{self.path}: cache dimension {header[1]} != configured {self.dimension}"
                )
            for lineno, line in enumerate(fh, 2):
                if not line.strip():
                    continue
                rec = json.loads(line)
                vec = np.asarray(rec["vec"], dtype=np.float32)
                if vec.shape != (self.dimension,):
                    raise ConfigError(f"{self.path}:{lineno}: vector has wrong dimension")
                self._store[rec["key"]] = vec

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: str) -> bool:
        return key in self._store

    def get(self, key: str) -> np.ndarray | None:
        return self._store.get(key)

    def put(self, key: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (self.dimension,):
            raise ConfigError(f"vector dimension {vec.shape} != configured {self.dimension}")
        self._store[key] = vec
        self.dirty = True

    def save(self, path: str | Path | None = None) -> None:
        path = Path(path) if path else self.path
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".emb-", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{CACHE_MAGIC} {self.dimension}\n")
            for key in sorted(self._store):
                vec = [float(v) for v in self._store[key]]
                fh.write(json.dumps({"key": key, "vec": vec}) + "\n")
        os.replace(tmp, path)
        self.dirty = False


# ---------------------------------------------------------------------------
# remote backend


class RemoteEmbeddingClient:
    """Batches texts and posts them with bounded concurrency.

    Results are reassembled in input order whatever order responses arrive in.
    """

    def __init__(self, config: EmbedderConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()
        self.calls = 0
        self._lock = threading.Lock()

    def _post(self, batch_no: int, texts: list[str]) -> np.ndarray:
        cfg = self.config
        body = {"model": cfg.model_name, "inputs": texts}
        last_err: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                time.sleep(cfg.retry_base_s * 2 ** (attempt - 1))
            try:
                with self._lock:
                    self.calls += 1
                resp = self.session.post(cfg.endpoint_url, json=body, timeout=cfg.timeout_s)
                resp.raise_for_status()
                rows = resp.json()["embeddings"]
                arr = np.asarray(rows, dtype=np.float32)
                if arr.shape != (len(texts), cfg.dimension):
                    raise ConfigError(
                        f"embedding batch {batch_no}: got shape {arr.shape}, "
                        f"expected ({len(texts)}, {cfg.dimension})"
                    )
                return arr
            except ConfigError:
                raise
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_err = exc
                log.warning("embedding batch %d attempt %d failed: %s", batch_no, attempt + 1, exc)
        raise BackendError(
            f"embedding batch {batch_no} ({len(texts)} inputs) failed after "
            f"{cfg.max_retries} retries: {last_err}"
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        size = self.config.batch_size
        batches = [list(texts[i:i + size]) for i in range(0, len(texts), size)]
        with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
            parts = list(pool.map(self._post, range(len(batches)), batches))
        if not parts:
            return np.zeros((0, self.config.dimension), dtype=np.float32)
        return np.vstack(parts)


# ---------------------------------------------------------------------------


class Embedder:
    """Cache-first embedding of arbitrary strings for one configuration."""

    def __init__(self, config: EmbedderConfig, session: requests.Session | None = None):
        config.validate()
        self.config = config
        cache_path = config.cache_path
        if config.backend == "file" and not Path(cache_path).exists():
            raise ConfigError(f"embedding file not found: {cache_path}")
        self.cache = EmbeddingCache(config.dimension, cache_path)
        self.remote = RemoteEmbeddingClient(config, session) if config.backend == "remote" else None

    @property
    def remote_calls(self) -> int:
        return self.remote.calls if self.remote else 0

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        cfg = self.config
        keys = [cache_key(cfg.model_name, t) for t in texts]
        out = np.zeros((len(texts), cfg.dimension), dtype=np.float32)
        missing: dict[str, list[int]] = {}
        for i, key in enumerate(keys):
            vec = self.cache.get(key)
            if vec is None:
                missing.setdefault(key, []).append(i)
            else:
                out[i] = vec
        if missing:
            todo = [texts[rows[0]] for rows in missing.values()]
            if cfg.backend == "file":
                raise ConfigError(
                    f"{len(todo)} texts missing from embedding file {cfg.cache_path}, "
                    f"first: {todo[0][:60]!r}"
                )
            if cfg.backend == "stub":
                fresh = np.vstack([stub_embedding(t, cfg.dimension) for t in todo])
            else:
                fresh = self.remote.embed(todo)
            for (key, rows), vec in zip(missing.items(), fresh):
                self.cache.put(key, vec)
                out[rows] = vec
        return out

    def save_cache(self) -> None:
        if self.cache.path is not None and self.cache.dirty:
            self.cache.save()


def embed_chunks(chunks, config: EmbedderConfig, embedder: Embedder | None = None) -> EmbeddingMatrix:
    if not chunks:
        raise ConfigError("cannot embed an empty chunk list")
    embedder = embedder or Embedder(config)
    ordered = sorted(chunks, key=lambda c: c.chunk_id)
    values = embedder.embed_texts([c.text for c in ordered])
    embedder.save_cache()
    return EmbeddingMatrix(values, tuple(c.chunk_id for c in ordered))


def embed_terms(terms: Sequence[str], config: EmbedderConfig, embedder: Embedder | None = None) -> EmbeddingMatrix:
    if len(set(terms)) != len(terms):
        raise ValueError("term list must be deduplicated")
    if not terms:
        return EmbeddingMatrix(np.zeros((0, config.dimension), dtype=np.float32), ())
    embedder = embedder or Embedder(config)
    values = embedder.embed_texts(list(terms))
    embedder.save_cache()
    return EmbeddingMatrix(values, tuple(terms))
