import math
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from topicctl.errors import ConfigError
from topicctl.ingest import (
    Chunk,
    RawTranscript,
    chunk_corpus,
    chunk_sentences,
    clean_transcript,
    expand_contractions,
    load_stoplist,
    load_transcripts,
    read_chunks,
    remove_custom_stopwords,
    split_sentences,
    strip_section_headers,
    strip_speaker_labels,
    write_chunks,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.mark.parametrize(
    "line, expected",
    [
        ("P: I felt tired.", "I felt tired."),
        ("O:How did it start?", "How did it start?"),
        ("Peter said hello", "Peter said hello"),
        ("N: P: nested", "nested"),
        ("X: not a speaker", "X: not a speaker"),
    ],
)
def test_strip_speaker_labels(line, expected):
    assert strip_speaker_labels(line) == expected


@pytest.mark.parametrize(
    "lines, expected",
    [
        (["I0-1", "Hello there."], ["Hello there."]),
        (["I went home I0-1 today"], ["I went home I0-1 today"]),
        ([], []),
        (["  I12-3  ", "x"], ["x"]),
    ],
)
def test_strip_section_headers(lines, expected):
    assert strip_section_headers(lines) == expected


@pytest.mark.parametrize(
    "text, expected",
    [
        ("wasn't", "was not"),
        ("Wasn't", "Was not"),
        ("it's what it's", "it is what it is"),
        ("I didn’t go", "I did not go"),
        ("Let's see", "Let us see"),
        ("nothing to expand", "nothing to expand"),
    ],
)
def test_expand_contractions(text, expected):
    assert expand_contractions(text) == expected


@pytest.mark.parametrize(
    "text, stop, expected",
    [
        ("uh yeah I went", {"uh", "yeah"}, "I went"),
        ("I went", set(), "I went"),
        ("Yeah, well", {"yeah"}, "well"),
        ("UH, okay. fine", {"uh", "okay"}, "fine"),
    ],
)
def test_remove_custom_stopwords(text, stop, expected):
    assert remove_custom_stopwords(text, frozenset(stop)) == expected


def test_bundled_stoplist_has_fillers():
    stop = load_stoplist()
    assert {"uh", "yeah", "says"} <= stop


def test_empty_stoplist_warns(tmp_path, caplog):
    p = tmp_path / "empty.txt"
    p.write_text("\n")
    assert load_stoplist(p) == frozenset()
    assert "empty" in caplog.text.lower()


@pytest.mark.parametrize(
    "text, n",
    [
        ("I was ill. Then I called.", 2),
        ("Was it bad? Yes! Very.", 3),
        ("approx. 34,000 characters total", 1),
        ("", 0),
        ("no terminator at all", 1),
    ],
)
def test_split_sentences_counts(text, n):
    assert len(split_sentences(text)) == n


def test_split_sentences_hand_segmented_fixture():
    expected = (FIXTURES / "sentences_50.txt").read_text(encoding="utf-8").splitlines()
    assert len(expected) == 50
    assert split_sentences(" ".join(expected)) == expected


def test_chunk_ten_by_three():
    chunks = chunk_sentences([f"S{i}." for i in range(10)], 3)
    assert [c.sentence_count for c in chunks] == [3, 3, 3, 1]
    assert [c.index_in_interview for c in chunks] == [0, 1, 2, 3]


def test_chunk_identity():
    sents = ["A.", "B.", "C."]
    assert [c.text for c in chunk_sentences(sents, 1)] == sents


@pytest.mark.parametrize("n", [0, -2])
def test_chunk_rejects_nonpositive(n):
    with pytest.raises(ConfigError):
        chunk_sentences(["A."], n)


def test_chunk_empty_interview():
    assert chunk_sentences([], 5) == []


def test_clean_transcript_chain():
    raw = RawTranscript("I0", ("I0-1", "O: How did it start?", "P: Uh, it wasn't easy.", "N: Yeah I know"))
    clean = clean_transcript(raw, load_stoplist())
    assert clean.text == "How did it start? it was not easy. I"


def test_clean_transcript_speaker_filter():
    raw = RawTranscript("I0", ("O: Question?", "P: Answer.", "N: Aside.", "untagged line."))
    clean = clean_transcript(raw, speakers=("P",))
    assert clean.text == "Answer. untagged line."


def test_load_transcripts_natural_order(tmp_path):
    for name in ("I10", "I2", "I1"):
        (tmp_path / f"{name}.txt").write_text("P: Hello.\n", encoding="utf-8")
    assert [t.interview_id for t in load_transcripts(tmp_path)] == ["I1", "I2", "I10"]


def test_load_transcripts_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_transcripts(tmp_path / "nope")
    with pytest.raises(FileNotFoundError):
        load_transcripts(tmp_path)


def test_chunk_ids_dense_across_corpus():
    ts = [RawTranscript("A", ("One. Two. Three.",)), RawTranscript("B", ("Four. Five.",))]
    chunks = chunk_corpus(ts, 2)
    assert [c.chunk_id for c in chunks] == [0, 1, 2]
    assert [c.interview_id for c in chunks] == ["A", "A", "B"]


def test_chunks_jsonl_round_trip(tmp_path):
    chunks = [Chunk(0, "I0", 0, "Hé \"quoted\".", 1), Chunk(1, "I0", 1, "B.", 1)]
    write_chunks(chunks, tmp_path / "c.jsonl")
    assert read_chunks(tmp_path / "c.jsonl") == chunks


def test_ingest_deterministic():
    ts = [RawTranscript("I0", ("P: It wasn't easy. Uh I went home.", "I0-2", "O: And then?"))]
    assert chunk_corpus(ts, 2, load_stoplist()) == chunk_corpus(ts, 2, load_stoplist())


# -- properties --------------------------------------------------------------

_words = st.sampled_from("we went home it was a long day doctor nurse scan Chemo".split())
_sentence = st.builds(
    lambda ws, end: " ".join(ws).capitalize() + end,
    st.lists(_words, min_size=1, max_size=8),
    st.sampled_from([".", "!", "?"]),
)
_line = st.builds(
    lambda tag, s: tag + s,
    st.sampled_from(["", "P: ", "N: ", "O: ", "O:"]),
    st.lists(_sentence, min_size=1, max_size=3).map(" ".join),
)
_transcript = st.lists(
    st.one_of(_line, st.sampled_from(["I0-1", "I3-2", "uh yeah", "It wasn't bad."])),
    max_size=25,
)


@settings(max_examples=60, deadline=None)
@given(_transcript)
def test_clean_is_idempotent(lines):
    stop = load_stoplist()
    once = clean_transcript(RawTranscript("x", tuple(lines)), stop).text
    twice = clean_transcript(RawTranscript("x", (once,)), stop).text
    assert once == twice


@settings(max_examples=60, deadline=None)
@given(st.lists(_sentence, max_size=80), st.integers(1, 12))
def test_chunk_count_law(sentences, n):
    chunks = chunk_sentences(sentences, n)
    assert len(chunks) == math.ceil(len(sentences) / n)
    assert sum(c.sentence_count for c in chunks) == len(sentences)
    assert all(c.sentence_count == n for c in chunks[:-1])


@settings(max_examples=40, deadline=None)
@given(_transcript)
def test_chunk_count_nonincreasing(lines):
    raw = [RawTranscript("x", tuple(lines))]
    counts = [len(chunk_corpus(raw, n)) for n in (5, 6, 7, 8)]
    assert counts == sorted(counts, reverse=True)
