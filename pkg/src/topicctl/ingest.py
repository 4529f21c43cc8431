"""Transcript loading, cleanup, sentence splitting and chunking.

Input transcripts are plain UTF-8 files named ``<interview_id>.txt``. Each line
may carry a speaker marker (``P:``, ``N:``, ``O:``) and structural header lines
such as ``I0-1`` appear between sections.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from topicctl.errors import ConfigError

log = logging.getLogger(__name__)

SPEAKER_TAGS = ("P", "N", "O")

_SPEAKER_RE = re.compile(r"^\s*(?:[PNO]:[ \t]?)+")
_SPEAKER_LINE_RE = re.compile(r"^\s*([PNO]):")
_HEADER_RE = re.compile(r"^\s*I\d+-\d+\s*$")
# terminator (optionally inside a closing bracket), whitespace, then
# uppercase / digit / opening quote or bracket
_SENTENCE_BOUNDARY_RE = re.compile(r"(?:(?<=[.!?])|(?<=[.!?][)\]]))\s+(?=[A-Z0-9\"'“‘(\[])")
_APOSTROPHES = "'’"
# a period after one of these does not end a sentence
ABBREVIATIONS = frozenset(
    "dr mr mrs ms prof st vs etc approx e.g i.e no fig ca dept".split()
)


@dataclass(frozen=True)
class RawTranscript:
    interview_id: str
    lines: tuple[str, ...]

    def __post_init__(self):
        if not self.interview_id:
            raise ValueError("interview_id must be non-empty")


@dataclass(frozen=True)
class CleanTranscript:
    interview_id: str
    text: str


@dataclass(frozen=True)
class Chunk:
    chunk_id: int
    interview_id: str
    index_in_interview: int
    text: str
    sentence_count: int

    def to_json(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "interview_id": self.interview_id,
            "index": self.index_in_interview,
            "sentence_count": self.sentence_count,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Chunk":
        return cls(
            chunk_id=int(obj["chunk_id"]),
            interview_id=str(obj["interview_id"]),
            index_in_interview=int(obj["index"]),
            text=str(obj["text"]),
            sentence_count=int(obj["sentence_count"]),
        )


# ---------------------------------------------------------------------------
# bundled resources


def _data_text(name: str) -> str:
    return resources.files("topicctl").joinpath("data", name).read_text(encoding="utf-8")


def load_contraction_table(path: str | Path | None = None) -> dict[str, str]:
    """Two-column TSV: contraction, expansion. Keys are lowercased, apostrophe U+0027."""
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("contractions.tsv")
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"contraction table line {lineno}: expected 2 tab-separated columns")
        table[parts[0].strip().lower().replace("’", "'")] = parts[1].strip()
    return table


def load_stoplist(path: str | Path | None = None) -> frozenset[str]:
    """One word per line. ``None`` loads the bundled custom list."""
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("custom_stopwords.txt")
    words = frozenset(w.strip().lower() for w in text.splitlines() if w.strip())
    if not words:
        log.warning("stoplist %s is empty; stopword removal is a no-op", path)
    return words


def english_stopwords() -> frozenset[str]:
    return frozenset(w.strip() for w in _data_text("english_stopwords.txt").splitlines() if w.strip())


_CONTRACTIONS = load_contraction_table()


def _contraction_regex(table: dict[str, str]) -> re.Pattern:
    # longest first so "can't've" wins over "can't"
    keys = sorted(table, key=len, reverse=True)
    alts = [re.escape(k).replace("'", f"[{_APOSTROPHES}]") for k in keys]
    return re.compile(r"(?<![\w'’])(" + "|".join(alts) + r")(?![\w'’])", re.IGNORECASE)


_CONTRACTION_RE = _contraction_regex(_CONTRACTIONS)


# ---------------------------------------------------------------------------
# preprocessing steps


def strip_speaker_labels(line: str) -> str:
    """Remove a leading ``P:``/``N:``/``O:`` marker (repeated markers too)."""
    return _SPEAKER_RE.sub("", line, count=1)


def speaker_of(line: str) -> str | None:
    m = _SPEAKER_LINE_RE.match(line)
    return m.group(1) if m else None


def is_section_header(line: str) -> bool:
    return bool(_HEADER_RE.match(line))


def strip_section_headers(lines: Iterable[str]) -> list[str]:
    return [ln for ln in lines if not is_section_header(ln)]


def expand_contractions(text: str, table: dict[str, str] | None = None) -> str:
    if table is None:
        table, pattern = _CONTRACTIONS, _CONTRACTION_RE
    else:
        table = {k.lower().replace("’", "'"): v for k, v in table.items()}
        pattern = _contraction_regex(table)

    def repl(m: re.Match) -> str:
        found = m.group(0)
        expansion = table[found.lower().replace("’", "'")]
        if found[0].isupper():
            expansion = expansion[0].upper() + expansion[1:]
        return expansion

    return pattern.sub(repl, text)


def _token_key(token: str) -> str:
    return token.strip(".,;:!?\"'()[]{}‘’“”-").lower()


def remove_custom_stopwords(text: str, stoplist: frozenset[str] | set[str]) -> str:
    """Drop whitespace tokens whose bare lowercase form is in ``stoplist``.

    Punctuation attached to a dropped token goes with it.
    """
    if not stoplist:
        return text
    return " ".join(tok for tok in text.split() if _token_key(tok) not in stoplist)


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def clean_transcript(
    raw: RawTranscript,
    stoplist: frozenset[str] | set[str] = frozenset(),
    *,
    speakers: Sequence[str] | None = None,
) -> CleanTranscript:
    """Apply the full preprocessing chain to one transcript.

    ``speakers`` restricts the kept turns by their tag (e.g. ``("P",)``); lines
    without a tag are kept. Steps run per line so the result is idempotent.
    """
    kept = []
    for line in raw.lines:
        if speakers is not None:
            tag = speaker_of(line)
            if tag is not None and tag not in speakers:
                continue
        line = expand_contractions(line)
        line = remove_custom_stopwords(line, stoplist)
        line = strip_speaker_labels(line)
        if is_section_header(line):
            continue
        line = normalize_whitespace(line)
        if line:
            kept.append(line)
    return CleanTranscript(raw.interview_id, " ".join(kept))


def _ends_with_abbreviation(part: str) -> bool:
    if not part.endswith("."):
        return False
    last = part.rsplit(None, 1)[-1].lstrip("(\"'“‘[").lower()
    return last[:-1] in ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    out: list[str] = []
    for part in _SENTENCE_BOUNDARY_RE.split(text):
        part = part.strip()
        if not part:
            continue
        if out and _ends_with_abbreviation(out[-1]):
            out[-1] = out[-1] + " " + part
        else:
            out.append(part)
    return out


def chunk_sentences(
    sentences: Sequence[str],
    n: int,
    *,
    interview_id: str = "",
    first_chunk_id: int = 0,
) -> list[Chunk]:
    if n < 1:
        raise ConfigError(f"sentences per chunk must be >= 1, got {n}")
    chunks = []
    for idx, start in enumerate(range(0, len(sentences), n)):
        group = sentences[start:start + n]
        chunks.append(
            Chunk(
                chunk_id=first_chunk_id + idx,
                interview_id=interview_id,
                index_in_interview=idx,
                text=" ".join(group),
                sentence_count=len(group),
            )
        )
    return chunks


# ---------------------------------------------------------------------------
# files


def _natural_key(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def read_transcript(path: str | Path) -> RawTranscript:
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    return RawTranscript(path.stem, tuple(text.splitlines()))


def load_transcripts(input_dir: str | Path) -> list[RawTranscript]:
    """All ``*.txt`` files in ``input_dir``, in natural order of interview id."""
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(str(input_dir))
    files = sorted(input_dir.glob("*.txt"), key=lambda p: _natural_key(p.stem))
    if not files:
        raise FileNotFoundError(f"no .txt transcripts in {input_dir}")
    return [read_transcript(p) for p in files]


def chunk_corpus(
    transcripts: Sequence[RawTranscript],
    n: int,
    stoplist: frozenset[str] | set[str] = frozenset(),
    *,
    speakers: Sequence[str] | None = None,
) -> list[Chunk]:
    """Clean, split and chunk every transcript; chunk ids are dense across the corpus."""
    chunks: list[Chunk] = []
    for raw in transcripts:
        clean = clean_transcript(raw, stoplist, speakers=speakers)
        chunks.extend(
            chunk_sentences(
                split_sentences(clean.text),
                n,
                interview_id=raw.interview_id,
                first_chunk_id=len(chunks),
            )
        )
    return chunks


def write_chunks(chunks: Iterable[Chunk], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in chunks:
            fh.write(json.dumps(c.to_json(), ensure_ascii=False) + "\n")


def read_chunks(path: str | Path) -> list[Chunk]:
    with open(path, encoding="utf-8") as fh:
        return [Chunk.from_json(json.loads(line)) for line in fh if line.strip()]
