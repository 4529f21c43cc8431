"""From cluster labels to topics: keyword weighting, representatives, model assembly."""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from topicctl.errors import ConfigError
from topicctl.ingest import Chunk, english_stopwords, load_stoplist

_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass
class VectorizerConfig:
    ngram_range: tuple[int, int] = (1, 2)
    min_df: int = 1
    # "english" selects the bundled list; any other string is a path; None disables
    standard_stopwords: str | None = "english"
    # None selects the bundled custom list used by ingest
    extra_stopwords_path: str | None = None
    lowercase: bool = True

    def validate(self) -> None:
        low, high = self.ngram_range
        if not 1 <= low <= high:
            raise ConfigError(f"invalid ngram_range {self.ngram_range}")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")

    def stopwords(self) -> frozenset[str]:
        words: set[str] = set(load_stoplist(self.extra_stopwords_path))
        if self.standard_stopwords == "english":
            words |= english_stopwords()
        elif self.standard_stopwords:
            words |= load_stoplist(self.standard_stopwords)
        return frozenset(words)


@dataclass(frozen=True)
class TopicKeywords:
    topic_id: int
    terms: tuple[tuple[str, float], ...]
    requested: int = 15

    @property
    def words(self) -> list[str]:
        return [t for t, _ in self.terms]

    @property
    def short(self) -> bool:
        return len(self.terms) < self.requested


@dataclass(frozen=True)
class Topic:
    topic_id: int
    size: int
    keywords: TopicKeywords
    centroid: np.ndarray
    representative_chunk_ids: tuple[int, ...]
    members: tuple[int, ...]
    label: str | None = None

    def __eq__(self, other):
        if not isinstance(other, Topic):
            return NotImplemented
        return (
            self.topic_id == other.topic_id
            and self.size == other.size
            and self.keywords == other.keywords
            and np.array_equal(self.centroid, other.centroid)
            and self.representative_chunk_ids == other.representative_chunk_ids
            and self.members == other.members
            and self.label == other.label
        )


@dataclass(frozen=True)
class TopicModel:
    topics: tuple[Topic, ...]
    noise_count: int
    config: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def n_chunks(self) -> int:
        return sum(t.size for t in self.topics) + self.noise_count

    def chunk_labels(self) -> dict[int, int]:
        return {cid: t.topic_id for t in self.topics for cid in t.members}

    def with_labels(self, labels: Mapping[int, str | None], warnings: Sequence[str] = ()) -> "TopicModel":
        topics = tuple(replace(t, label=labels.get(t.topic_id, t.label)) for t in self.topics)
        return replace(self, topics=topics, warnings=self.warnings + tuple(warnings))

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "topics": [
                {
                    "id": t.topic_id,
                    "size": t.size,
                    "keywords": [[term, w] for term, w in t.keywords.terms],
                    "representatives": list(t.representative_chunk_ids),
                    "label": t.label,
                    "members": list(t.members),
                    "centroid": [float(v) for v in t.centroid],
                }
                for t in self.topics
            ],
            "noise_count": self.noise_count,
            "keywords_requested": self.topics[0].keywords.requested if self.topics else None,
            "warnings": list(self.warnings),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "TopicModel":
        k = obj.get("keywords_requested") or 15
        topics = tuple(
            Topic(
                topic_id=int(t["id"]),
                size=int(t["size"]),
                keywords=TopicKeywords(int(t["id"]), tuple((str(a), float(b)) for a, b in t["keywords"]), k),
                centroid=np.asarray(t.get("centroid", []), dtype=np.float64),
                representative_chunk_ids=tuple(int(i) for i in t["representatives"]),
                members=tuple(int(i) for i in t.get("members", [])),
                label=t.get("label"),
            )
            for t in obj["topics"]
        )
        return cls(topics, int(obj["noise_count"]), obj.get("config", {}), tuple(obj.get("warnings", [])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# counting and weighting


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    return _TOKEN_RE.findall(text.lower() if lowercase else text)


def _ngrams(tokens: list[str], low: int, high: int):
    for n in range(low, high + 1):
        for i in range(len(tokens) - n + 1):
            yield tuple(tokens[i:i + n])


def _keep(gram: tuple[str, ...], stop: frozenset[str]) -> bool:
    # a unigram must not be a stopword; longer n-grams need one content token
    return not all(tok in stop for tok in gram)


def vectorize(
    chunks: Sequence[Chunk],
    labels: Sequence[int],
    config: VectorizerConfig | None = None,
    stopwords: frozenset[str] | None = None,
) -> dict[int, Counter]:
    """Per-cluster n-gram counts. Noise chunks (label -1) are ignored.

    Every cluster id present in ``labels`` gets a row, possibly empty.
    """
    config = config or VectorizerConfig()
    config.validate()
    stop = config.stopwords() if stopwords is None else stopwords
    low, high = config.ngram_range
    counts: dict[int, Counter] = {}
    df: Counter = Counter()
    for chunk, lab in zip(chunks, labels):
        if lab == -1:
            continue
        toks = tokenize(chunk.text, config.lowercase)
        grams = [" ".join(g) for g in _ngrams(toks, low, high) if _keep(g, stop)]
        counts.setdefault(int(lab), Counter()).update(grams)
        df.update(set(grams))
    if config.min_df > 1:
        rare = {t for t, d in df.items() if d < config.min_df}
        for row in counts.values():
            for t in rare & row.keys():
                del row[t]
    return dict(sorted(counts.items()))


def ctfidf(counts: Mapping[int, Mapping[str, int]]) -> dict[int, dict[str, float]]:
    """Class-based TF-IDF: ``tf(t, c) * log(1 + A / f(t))``.

    ``f(t)`` is the total count of ``t`` over all clusters and ``A`` the mean
    number of counted tokens per cluster.
    """
    if not counts:
        raise ConfigError("ctfidf needs at least one cluster")
    totals: Counter = Counter()
    for row in counts.values():
        totals.update(row)
    avg = math.fsum(math.fsum(row.values()) for row in counts.values()) / len(counts)
    return {
        c: {t: tf * math.log(1.0 + avg / totals[t]) for t, tf in row.items() if tf > 0}
        for c, row in counts.items()
    }


def top_keywords(
    weights: Mapping[str, float],
    k: int = 15,
    *,
    topic_id: int = 0,
    dedup: bool = False,
) -> TopicKeywords:
    """Highest-weighted ``k`` terms, ties broken alphabetically.

    With ``dedup`` a unigram is dropped whenever a selected bigram contains it,
    and the freed slot goes to the next candidate.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    ranked = sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))
    if not dedup:
        return TopicKeywords(topic_id, tuple(ranked[:k]), k)
    chosen: list[tuple[str, float]] = []
    covered: set[str] = set()
    for term, w in ranked:
        if len(chosen) == k:
            break
        parts = term.split(" ")
        if len(parts) == 1:
            if term in covered:
                continue
            chosen.append((term, w))
        else:
            covered.update(parts)
            chosen = [(t, v) for t, v in chosen if t not in covered]
            chosen.append((term, w))
    return TopicKeywords(topic_id, tuple(chosen), k)


# ---------------------------------------------------------------------------
# embedding-based pieces


def _unit_rows(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=-1, keepdims=True)
    return np.divide(M, norms, out=np.zeros_like(M), where=norms > 0)


def topic_centroid(member_embeddings: np.ndarray) -> np.ndarray:
    return np.asarray(member_embeddings, dtype=np.float64).mean(axis=0)


def candidate_vocabulary(chunks: Sequence[Chunk], labels: Sequence[int], stopwords: frozenset[str]) -> list[str]:
    """Unigram vocabulary of the clustered chunks minus stopwords, sorted."""
    vocab = set()
    for chunk, lab in zip(chunks, labels):
        if lab != -1:
            vocab.update(t for t in tokenize(chunk.text) if t not in stopwords)
    return sorted(vocab)


def centroid_keywords(
    centroid: np.ndarray,
    candidate_terms: Sequence[str],
    term_embeddings: np.ndarray,
    k: int = 15,
    *,
    topic_id: int = 0,
) -> TopicKeywords:
    """Rank candidate terms by cosine similarity to the topic centroid."""
    if len(candidate_terms) == 0:
        return TopicKeywords(topic_id, (), k)
    sims = _unit_rows(term_embeddings) @ _unit_rows(centroid[None, :])[0]
    order = sorted(range(len(candidate_terms)), key=lambda i: (-sims[i], candidate_terms[i]))
    return TopicKeywords(topic_id, tuple((candidate_terms[i], float(sims[i])) for i in order[:k]), k)


def representative_chunks(
    member_ids: Sequence[int],
    member_embeddings: np.ndarray,
    centroid: np.ndarray,
    m: int = 3,
) -> list[int]:
    """The ``m`` members closest (cosine) to the centroid, ties by lower chunk id."""
    if len(member_ids) == 0:
        raise ConfigError("topic has no members")
    sims = _unit_rows(member_embeddings) @ _unit_rows(centroid[None, :])[0]
    order = sorted(range(len(member_ids)), key=lambda i: (-sims[i], member_ids[i]))
    return [int(member_ids[i]) for i in order[:m]]


# ---------------------------------------------------------------------------


def assemble_topic_model(
    chunks: Sequence[Chunk],
    labels: Sequence[int],
    keywords: Mapping[int, TopicKeywords],
    representatives: Mapping[int, Sequence[int]],
    centroids: Mapping[int, np.ndarray],
    config: dict | None = None,
    warnings: Sequence[str] = (),
) -> TopicModel:
    labels = [int(x) for x in labels]
    if len(labels) != len(chunks):
        raise ConfigError("one label per chunk required")
    members: dict[int, list[int]] = {}
    for chunk, lab in zip(chunks, labels):
        if lab != -1:
            members.setdefault(lab, []).append(chunk.chunk_id)
    ids = sorted(members)
    if ids != list(range(len(ids))):
        raise ConfigError(f"topic ids must be dense 0..T-1, got {ids}")
    topics = []
    for tid in ids:
        if tid not in keywords:
            raise ConfigError(f"topic {tid} has no keyword entry")
        if tid not in representatives or tid not in centroids:
            raise ConfigError(f"topic {tid} is missing representatives or centroid")
        rep = tuple(int(r) for r in representatives[tid])
        if not set(rep) <= set(members[tid]):
            raise ConfigError(f"representatives of topic {tid} are not members")
        topics.append(
            Topic(
                topic_id=tid,
                size=len(members[tid]),
                keywords=keywords[tid],
                centroid=np.asarray(centroids[tid], dtype=np.float64),
                representative_chunk_ids=rep,
                members=tuple(sorted(members[tid])),
            )
        )
    return TopicModel(tuple(topics), labels.count(-1), dict(config or {}), tuple(warnings))


def config_snapshot(**parts) -> dict:
    """JSON-friendly dict of dataclass configs."""
    out = {}
    for name, value in parts.items():
        if hasattr(value, "__dataclass_fields__"):
            value = asdict(value)
        out[name] = value
    return json.loads(json.dumps(out))
