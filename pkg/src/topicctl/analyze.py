"""Soft topic distributions, per-interview averages, global ranking, rating summaries."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from topicctl.errors import ConfigError

log = logging.getLogger(__name__)

QUESTIONS = ("Q1", "Q2", "Q3")
RATING_FIELDS = ("rater", "system", "question", "topic_id", "score")


@dataclass(frozen=True)
class InterviewDistribution:
    interview_id: str
    avg_probabilities: tuple[float, ...]


@dataclass(frozen=True)
class RankedTopic:
    topic_id: int
    mean_avg_probability: float
    label: str | None = None


@dataclass(frozen=True)
class RatingRecord:
    rater: str
    system: str
    question: str
    topic_id: int
    score: int

    def __post_init__(self):
        if self.question not in QUESTIONS:
            raise ValueError(f"question must be one of {QUESTIONS}, got {self.question!r}")
        if not 1 <= self.score <= 5:
            raise ValueError(f"score {self.score} outside [1, 5]")


# ---------------------------------------------------------------------------
# distributions


def chunk_topic_distribution(chunk_embedding: np.ndarray, topic_centroids: np.ndarray) -> np.ndarray:
    """ReLU'd cosine to each centroid, normalised to sum to one.

    Falls back to the uniform row if no similarity is positive or the chunk
    vector is zero.
    """
    C = np.atleast_2d(np.asarray(topic_centroids, dtype=np.float64))
    T = C.shape[0]
    if T == 0:
        raise ConfigError("need at least one topic centroid")
    x = np.asarray(chunk_embedding, dtype=np.float64)
    xn = np.linalg.norm(x)
    if xn == 0:
        log.warning("zero chunk vector; uniform topic distribution used")
        return np.full(T, 1.0 / T)
    cn = np.linalg.norm(C, axis=1)
    sims = np.zeros(T)
    ok = cn > 0
    sims[ok] = (C[ok] @ x) / (cn[ok] * xn)
    s = np.maximum(sims, 0.0)
    total = math.fsum(s)
    if total == 0:
        return np.full(T, 1.0 / T)
    return s / total


def distribution_matrix(embeddings: np.ndarray, topic_centroids: np.ndarray) -> np.ndarray:
    return np.vstack([chunk_topic_distribution(e, topic_centroids) for e in np.asarray(embeddings)])


def interview_distribution(interview_id: str, rows: Sequence[Sequence[float]]) -> InterviewDistribution:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] == 0:
        raise ConfigError(f"interview {interview_id} has no chunks")
    n = rows.shape[0]
    return InterviewDistribution(interview_id, tuple(math.fsum(col) / n for col in rows.T))


def interview_distributions(
    interview_ids: Sequence[str],
    rows: np.ndarray,
) -> list[InterviewDistribution]:
    """Group distribution rows by interview, preserving first-seen interview order."""
    groups: dict[str, list[int]] = {}
    for i, iid in enumerate(interview_ids):
        groups.setdefault(iid, []).append(i)
    return [interview_distribution(iid, rows[idx]) for iid, idx in groups.items()]


def global_ranking(
    distributions: Iterable[InterviewDistribution],
    labels: Mapping[int, str | None] | None = None,
) -> list[RankedTopic]:
    """Mean over interviews per topic, descending; ties go to the lower topic id."""
    dists = list(distributions)
    if not dists:
        raise ConfigError("global ranking needs at least one interview")
    T = len(dists[0].avg_probabilities)
    labels = labels or {}
    means = [math.fsum(d.avg_probabilities[t] for d in dists) / len(dists) for t in range(T)]
    order = sorted(range(T), key=lambda t: (-means[t], t))
    return [RankedTopic(t, means[t], labels.get(t)) for t in order]


# ---------------------------------------------------------------------------
# ratings


def load_ratings(path: str | Path) -> list[RatingRecord]:
    """Read ``rater,system,question,topic_id,score`` CSV; bad rows raise naming the line."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != RATING_FIELDS:
            raise ConfigError(f"{path}: header must be {','.join(RATING_FIELDS)}")
        for lineno, row in enumerate(reader, 2):
            try:
                records.append(
                    RatingRecord(
                        rater=row["rater"].strip(),
                        system=row["system"].strip(),
                        question=row["question"].strip(),
                        topic_id=int(row["topic_id"]),
                        score=int(row["score"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return records


def five_number_summary(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64)
    # numpy's default "linear" percentile is the inclusive quartile method
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(x) for x in q)))


def aggregate_ratings(records: Iterable[RatingRecord]):
    """Per-topic means over raters and per-(system, question) summaries of those means.

    Returns ``(topic_means, summaries)`` where ``topic_means`` maps
    ``(system, question, topic_id)`` to the mean score and ``summaries`` maps
    ``(system, question)`` to the five-number summary plus ``mean``,
    ``n_topics`` and ``count_ge_4``.
    """
    scores: dict[tuple[str, str, int], list[int]] = {}
    for r in records:
        scores.setdefault((r.system, r.question, r.topic_id), []).append(r.score)
    topic_means = {k: math.fsum(v) / len(v) for k, v in sorted(scores.items())}
    per_group: dict[tuple[str, str], list[float]] = {}
    for (system, question, _), m in topic_means.items():
        per_group.setdefault((system, question), []).append(m)
    summaries = {}
    for key, means in sorted(per_group.items()):
        summary = five_number_summary(means)
        summary["mean"] = math.fsum(means) / len(means)
        summary["n_topics"] = len(means)
        summary["count_ge_4"] = sum(m >= 4.0 for m in means)
        summaries[key] = summary
    return topic_means, summaries


def summaries_csv(summaries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", "question", "n_topics", "min", "q1", "median", "q3", "max", "mean", "count_ge_4"])
    for (system, question), s in summaries.items():
        w.writerow([system, question, s["n_topics"]] + [f"{s[k]:.4f}" for k in ("min", "q1", "median", "q3", "max", "mean")] + [s["count_ge_4"]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# output files


def distribution_csv(dists: Sequence[InterviewDistribution]) -> str:
    T = len(dists[0].avg_probabilities) if dists else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["interview_id"] + [str(t) for t in range(T)])
    for d in dists:
        w.writerow([d.interview_id] + [f"{p:.6f}" for p in d.avg_probabilities])
    return buf.getvalue()


def ranking_csv(ranking: Sequence[RankedTopic]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topic_id", "mean_avg_probability", "label"])
    for r in ranking:
        w.writerow([r.topic_id, f"{r.mean_avg_probability:.6f}", r.label or ""])
    return buf.getvalue()


def read_ranking_csv(path: str | Path) -> list[RankedTopic]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            RankedTopic(int(r["topic_id"]), float(r["mean_avg_probability"]), r["label"] or None)
            for r in csv.DictReader(fh)
        ]


_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
    "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)


def stacked_bar_svg(
    dists: Sequence[InterviewDistribution],
    labels: Mapping[int, str | None] | None = None,
) -> str:
    """One bar per interview, one band per topic, legend on the right."""
    labels = labels or {}
    T = len(dists[0].avg_probabilities) if dists else 0
    bar_w, gap, plot_h, left, top = 36, 14, 320, 50, 20
    plot_w = len(dists) * (bar_w + gap)
    legend_x = left + plot_w + 30
    height = max(plot_h + top + 60, top + 18 * T + 20)
    width = legend_x + 420
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h * (1 - tick)
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{tick:.2f}</text>')
    for i, d in enumerate(dists):
        x = left + gap / 2 + i * (bar_w + gap)
        y = top + plot_h
        for t, p in enumerate(d.avg_probabilities):
            h = plot_h * p
            y -= h
            out.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w}" height="{h:.2f}" '
                f'fill="{_PALETTE[t % len(_PALETTE)]}"><title>{escape(d.interview_id)} topic {t}: {p:.3f}</title></rect>'
            )
        out.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{top + plot_h + 16}" text-anchor="middle">{escape(d.interview_id)}</text>'
        )
    for t in range(T):
        y = top + 18 * t
        name = labels.get(t) or f"Topic {t}"
        out.append(f'<rect x="{legend_x}" y="{y}" width="12" height="12" fill="{_PALETTE[t % len(_PALETTE)]}"/>')
        out.append(f'<text x="{legend_x + 18}" y="{y + 10}">{t}: {escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
