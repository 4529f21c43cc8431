"""Stage functions shared by the CLI and the experiment scripts."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from topicctl import analyze, cluster as clustering, ingest, label, reduce, topics
from topicctl.config import PipelineConfig
from topicctl.embed import Embedder, embed_chunks, embed_terms
from topicctl.errors import ConfigError
from topicctl.ingest import Chunk

log = logging.getLogger(__name__)

CHUNKS_FILE = "chunks.jsonl"
TOPICS_FILE = "topics.json"
LABELED_FILE = "topics.json"
REPORT_FILE = "topics.md"
DISTRIBUTION_CSV = "distribution.csv"
DISTRIBUTION_SVG = "distribution.svg"
RANKING_CSV = "ranking.csv"
MANIFEST_FILE = "manifest.json"


@dataclass
class RunLog:
    """Collects per-stage timings and warnings for the manifest."""

    timings: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    input_hashes: dict[str, str] = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 4)


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: PipelineConfig, run: RunLog, command: str) -> Path:
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "input_hashes": run.input_hashes,
        "timings_s": run.timings,
        "warnings": run.warnings,
    }
    path = Path(cfg.output_dir) / MANIFEST_FILE
    atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------


def run_ingest(cfg: PipelineConfig, run: RunLog | None = None) -> list[Chunk]:
    run = run or RunLog()
    if not cfg.input_dir:
        raise ConfigError("input_dir is required for ingestion")
    with run.stage("ingest"):
        transcripts = ingest.load_transcripts(cfg.input_dir)
        for p in sorted(Path(cfg.input_dir).glob("*.txt")):
            run.input_hashes[p.name] = file_sha256(p)
        stoplist = ingest.load_stoplist(cfg.stoplist_path)
        chunks = ingest.chunk_corpus(transcripts, cfg.chunk_sentences, stoplist, speakers=cfg.speakers)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        ingest.write_chunks(chunks, Path(cfg.output_dir) / CHUNKS_FILE)
    if not chunks:
        raise ConfigError(f"no sentences found in {cfg.input_dir}")
    return chunks


def load_chunks(cfg: PipelineConfig) -> list[Chunk]:
    path = Path(cfg.output_dir) / CHUNKS_FILE
    if not path.exists():
        raise ConfigError(f"missing {path}; run ingest first or pass --input-dir")
    return ingest.read_chunks(path)


@dataclass
class FitResult:
    model: topics.TopicModel
    embeddings: np.ndarray
    reduced: np.ndarray
    labels: np.ndarray
    tree: clustering.CondensedTree


def fit_topic_model(
    chunks: Sequence[Chunk],
    cfg: PipelineConfig,
    embedder: Embedder | None = None,
    run: RunLog | None = None,
) -> FitResult:
    """embed -> reduce -> cluster -> keywords -> assembled model."""
    run = run or RunLog()
    embedder = embedder or Embedder(cfg.embedder)
    chunks = sorted(chunks, key=lambda c: c.chunk_id)
    with run.stage("embed"):
        E = embed_chunks(chunks, cfg.embedder, embedder).values
    with run.stage("reduce"):
        layout = cfg.layout
        layout.seed = cfg.seed
        Y = reduce.reduce(E, layout)
    with run.stage("cluster"):
        labels, tree = clustering.cluster(Y, cfg.cluster, return_tree=True)
    if len(chunks) < cfg.cluster.min_cluster_size:
        run.warnings.append(f"{len(chunks)} chunks < min_cluster_size; all noise")

    with run.stage("keywords"):
        stop = cfg.vectorizer.stopwords()
        ids = sorted(set(int(x) for x in labels) - {-1})
        centroids, reps, kw = {}, {}, {}
        for tid in ids:
            idx = np.flatnonzero(labels == tid)
            centroids[tid] = topics.topic_centroid(E[idx])
            member_ids = [chunks[i].chunk_id for i in idx]
            reps[tid] = topics.representative_chunks(member_ids, E[idx], centroids[tid], cfg.representatives)
        if cfg.keyword_method == "ctfidf" and ids:
            weights = topics.ctfidf(topics.vectorize(chunks, labels, cfg.vectorizer, stop))
            for tid in ids:
                kw[tid] = topics.top_keywords(
                    weights.get(tid, {}), cfg.top_k_keywords, topic_id=tid, dedup=cfg.dedup_keywords
                )
        elif ids:
            vocab = topics.candidate_vocabulary(chunks, labels, stop)
            term_vecs = embed_terms(vocab, cfg.embedder, embedder).values
            for tid in ids:
                kw[tid] = topics.centroid_keywords(
                    centroids[tid], vocab, term_vecs, cfg.top_k_keywords, topic_id=tid
                )
        for tid in ids:
            if kw[tid].short:
                run.warnings.append(f"topic {tid}: only {len(kw[tid].terms)} keywords")

    snapshot = {
        "pipeline": cfg.to_dict(),
        "seed": cfg.seed,
        "model_name": cfg.embedder.model_name,
        "keyword_capabilities": {
            "custom_ngrams": cfg.keyword_method == "ctfidf",
            "custom_stopwords": cfg.keyword_method == "ctfidf",
        },
    }
    for volatile in ("input_dir", "output_dir"):
        snapshot["pipeline"].pop(volatile, None)
    model = topics.assemble_topic_model(chunks, labels, kw, reps, centroids, snapshot)
    return FitResult(model, E, Y, labels, tree)


def run_label(cfg: PipelineConfig, model: topics.TopicModel, chunks: Sequence[Chunk]) -> topics.TopicModel:
    texts = {c.chunk_id: c.text for c in chunks}
    return label.label_topics(model, cfg.labeler, mode=cfg.label_mode, chunk_texts=texts)


def compute_distributions(
    model: topics.TopicModel,
    chunks: Sequence[Chunk],
    embeddings: np.ndarray,
) -> tuple[list[analyze.InterviewDistribution], list[analyze.RankedTopic], np.ndarray]:
    if not model.topics:
        raise ConfigError("model has no topics; nothing to distribute")
    chunks = sorted(chunks, key=lambda c: c.chunk_id)
    centroids = np.vstack([t.centroid for t in model.topics])
    rows = analyze.distribution_matrix(embeddings, centroids)
    dists = analyze.interview_distributions([c.interview_id for c in chunks], rows)
    ranking = analyze.global_ranking(dists, {t.topic_id: t.label for t in model.topics})
    return dists, ranking, rows


# ---------------------------------------------------------------------------
# report


def _md_cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def render_report(model: topics.TopicModel, ranking: Sequence[analyze.RankedTopic] | None = None) -> str:
    k = model.topics[0].keywords.requested if model.topics else 15
    lines = [f"| Topic ID | Topic Label | Top {k} Keywords |", "|---|---|---|"]
    for t in model.topics:
        lines.append(f"| {t.topic_id} | {_md_cell(t.label or '')} | {_md_cell(', '.join(t.keywords.words))} |")
    lines.append("")
    lines.append(f"{len(model.topics)} topics, {model.noise_count} of {model.n_chunks} chunks unassigned.")
    if ranking:
        lines += ["", "| Topic ID | Mean Avg. Probability | Topic Label |", "|---|---|---|"]
        by_id = {t.topic_id: t.label for t in model.topics}
        for r in ranking:
            name = by_id.get(r.topic_id) or r.label or ""
            lines.append(f"| {r.topic_id} | {r.mean_avg_probability:.3f} | {_md_cell(name)} |")
    notes = [f"topic {t.topic_id} has only {len(t.keywords.terms)} keywords" for t in model.topics if t.keywords.short]
    caps = model.config.get("keyword_capabilities")
    if caps:
        notes.append(
            "keyword settings: custom n-grams "
            + ("yes" if caps.get("custom_ngrams") else "no")
            + ", custom stopwords "
            + ("yes" if caps.get("custom_stopwords") else "no")
        )
    notes += list(model.warnings)
    if notes:
        lines += ["", "Notes:", ""] + [f"- {n}" for n in notes]
    return "\n".join(lines) + "\n"
