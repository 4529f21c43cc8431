"""Topic labels from a chat-completion service, with an offline stub.

Two prompt templates ship as package data. ``individual`` prompts carry the
keyword list plus representative chunk texts; ``global`` prompts carry
keywords only. The remote client sends no sampling parameters, so labels are
not reproducible across providers; use the stub for deterministic runs.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import requests

from topicctl.errors import BackendError, ConfigError
from topicctl.topics import Topic, TopicModel

log = logging.getLogger(__name__)

MODES = ("individual", "global")
API_KEY_ENV = "LABELER_API_KEY"
PROMPT_KEYWORDS = 15


def prompt_template(mode: str) -> str:
    if mode not in MODES:
        raise ConfigError(f"prompt mode must be one of {MODES}")
    return resources.files("topicctl").joinpath("data", f"prompt_{mode}.txt").read_text(encoding="utf-8")


@dataclass
class LabelerConfig:
    backend: str = "stub"
    endpoint_url: str | None = None
    model_name: str = "gpt-4o-mini"
    max_retries: int = 3
    timeout_s: float = 30.0
    retry_base_s: float = 1.0
    max_in_flight: int = 2

    def validate(self) -> None:
        if self.backend not in ("stub", "remote"):
            raise ConfigError(f"unknown labeler backend {self.backend!r}")
        if self.backend == "remote" and not self.endpoint_url:
            raise ConfigError("remote labeler requires endpoint_url")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")


def build_prompt(topic: Topic, mode: str, documents: Sequence[str] = ()) -> str:
    """Template, then a ``Keywords:`` line, then numbered documents (individual mode)."""
    words = topic.keywords.words[:PROMPT_KEYWORDS]
    if not words:
        raise ConfigError(f"topic {topic.topic_id} has no keywords to label")
    if mode == "individual" and not documents:
        raise ConfigError("individual prompts require representative documents")
    if mode == "global" and documents:
        raise ConfigError("global prompts take keywords only")
    text = prompt_template(mode) + "\nKeywords: " + ", ".join(words)
    for i, doc in enumerate(documents, 1):
        text += f"\nDocument {i}: {doc}"
    return text


def stub_label(topic: Topic) -> str:
    return f"Topic {topic.topic_id}: " + " / ".join(topic.keywords.words[:3])


def clean_response(text: str) -> str:
    """First non-empty line, without surrounding whitespace or quotes."""
    for line in text.strip().splitlines():
        line = line.strip().strip("\"'“”‘’`").strip()
        if line:
            return line
    return ""


class ChatClient:
    def __init__(self, config: LabelerConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": cfg.model_name, "messages": [{"role": "user", "content": prompt}]}
        last_err = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                time.sleep(cfg.retry_base_s * 2 ** (attempt - 1))
            try:
                resp = self.session.post(cfg.endpoint_url, json=body, headers=headers, timeout=cfg.timeout_s)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, ValueError, KeyError, IndexError, TypeError) as exc:
                last_err = exc
                log.warning("label request attempt %d failed: %s", attempt + 1, exc)
        raise BackendError(f"labeler failed after {cfg.max_retries} retries: {last_err}")


def label_topics(
    model: TopicModel,
    config: LabelerConfig,
    *,
    mode: str = "individual",
    chunk_texts: Mapping[int, str] | None = None,
    session: requests.Session | None = None,
) -> TopicModel:
    """Return a copy of ``model`` with labels filled in.

    Remote failures and empty answers fall back to the stub label and add a
    warning to the model. Topics without keywords stay unlabeled.
    """
    config.validate()
    chunk_texts = chunk_texts or {}
    labels: dict[int, str | None] = {}
    warnings: list[str] = []
    prompts: dict[int, str] = {}
    for topic in model.topics:
        if not topic.keywords.terms:
            labels[topic.topic_id] = None
            warnings.append(f"topic {topic.topic_id}: no keywords, left unlabeled")
            continue
        if config.backend == "stub":
            labels[topic.topic_id] = stub_label(topic)
            continue
        docs = [chunk_texts[c] for c in topic.representative_chunk_ids] if mode == "individual" else []
        prompts[topic.topic_id] = build_prompt(topic, mode, docs)

    if prompts:
        client = ChatClient(config, session)
        by_id = {t.topic_id: t for t in model.topics}

        def ask(tid: int) -> tuple[int, str | None, str | None]:
            try:
                answer = clean_response(client.complete(prompts[tid]))
            except BackendError as exc:
                return tid, None, f"topic {tid}: {exc}; stub label used"
            if not answer:
                return tid, None, f"topic {tid}: empty label response; stub label used"
            return tid, answer, None

        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            results = list(pool.map(ask, sorted(prompts)))
        for tid, answer, warn in results:
            if warn:
                log.warning(warn)
                warnings.append(warn)
                answer = stub_label(by_id[tid])
            labels[tid] = answer
    return model.with_labels(labels, warnings)
