import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from topicctl import synth
from topicctl.cli import main
from topicctl.config import PRESETS, load_config
from topicctl.errors import ConfigError

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    synth.write_corpus(d, n_themes=5, n_interviews=13, seed=0)
    return d


def _run(*argv):
    return main([str(a) for a in argv])


# -- config ------------------------------------------------------------------


def test_presets_ship():
    assert set(PRESETS) == {"individual", "global"}
    g = load_config("global")
    assert (g.chunk_sentences, g.layout.n_neighbors, g.layout.min_dist, g.layout.n_components) == (7, 16, 0.2, 4)
    assert (g.cluster.min_cluster_size, g.cluster.selection) == (11, "eom")
    i = load_config("individual")
    assert (i.chunk_sentences, i.cluster.min_cluster_size) == (6, 10)


def test_precedence_preset_file_flags(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"chunk_sentences": 9, "layout": {"n_neighbors": 20}, "seed": 3}))
    cfg = load_config("global", cfg_file, {"chunk_sentences": 4})
    assert cfg.chunk_sentences == 4
    assert cfg.layout.n_neighbors == 20
    assert cfg.layout.min_dist == 0.2
    assert cfg.seed == cfg.layout.seed == 3


@pytest.mark.parametrize(
    "data",
    [{"bogus": 1}, {"layout": {"neighbours": 3}}, {"chunk_sentences": 0}, {"min_topic_size": 4}],
)
def test_bad_config_rejected(tmp_path, data):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(None, p)


def test_min_topic_size_alias_agrees():
    cfg = load_config("global", overrides={"min_topic_size": 11})
    assert cfg.cluster.min_cluster_size == 11


# -- commands ----------------------------------------------------------------


def test_full_chain(corpus, tmp_path, capsys):
    out = tmp_path / "out"
    common = ["--preset", "global", "--embedder", "stub", "--output-dir", out]
    assert _run("ingest", "--input-dir", corpus, *common) == 0
    assert (out / "chunks.jsonl").exists()
    assert _run("model", *common, "--dump-reduced", tmp_path / "y.csv", "--dump-tree", tmp_path / "t.csv") == 0
    model = json.loads((out / "topics.json").read_text())
    assert len(model["topics"]) >= 2
    assert all(len(t["keywords"]) == 15 for t in model["topics"])
    assert (tmp_path / "t.csv").read_text().startswith("parent,child,lambda,size\n")
    assert (tmp_path / "y.csv").read_text().startswith("chunk_id,label,x0,x1,x2,x3\n")
    assert _run("label", *common) == 0
    assert _run("distribution", *common) == 0
    for name in ("distribution.csv", "distribution.svg", "ranking.csv", "manifest.json"):
        assert (out / name).exists()
    capsys.readouterr()
    assert _run("report", *common) == 0
    text = capsys.readouterr().out
    assert text.startswith("| Topic ID | Topic Label | Top 15 Keywords |\n")
    assert "| Topic ID | Mean Avg. Probability | Topic Label |" in text
    assert (out / "topics.md").read_text() == text
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest) >= {"config", "input_hashes", "timings_s", "warnings"}


def test_model_byte_identical(corpus, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _run("model", "--preset", "global", "--embedder", "stub", "--input-dir", corpus, "--output-dir", d) == 0
    assert (a / "topics.json").read_bytes() == (b / "topics.json").read_bytes()


def test_stage_rerunnable_from_outputs(corpus, tmp_path):
    out = tmp_path / "out"
    _run("ingest", "--preset", "global", "--input-dir", corpus, "--output-dir", out)
    moved = tmp_path / "moved"
    shutil.copytree(out, moved)
    assert _run("model", "--preset", "global", "--output-dir", moved) == 0


def test_missing_input_exit_1(tmp_path, capsys):
    missing = tmp_path / "nowhere"
    assert _run("model", "--input-dir", missing, "--output-dir", tmp_path / "o") == 1
    assert str(missing) in capsys.readouterr().err


def test_missing_chunks_exit_1(tmp_path, capsys):
    assert _run("model", "--output-dir", tmp_path) == 1
    assert "chunks.jsonl" in capsys.readouterr().err


def test_bad_config_file_exit_1(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert _run("ingest", "--config", p, "--input-dir", tmp_path) == 1
    assert str(p) in capsys.readouterr().err


def test_backend_failure_exit_2(corpus, tmp_path):
    cfg = tmp_path / "c.json"
    # nothing listens on port 9; the remote embedder gives up after its retries
    cfg.write_text(json.dumps({"embedder": {"endpoint_url": "http://127.0.0.1:9/embed", "max_retries": 0}}))
    rc = _run("model", "--config", cfg, "--embedder", "remote", "--input-dir", corpus, "--output-dir", tmp_path / "o")
    assert rc == 2


def test_eval_ratings(tmp_path, capsys):
    assert _run("eval-ratings", FIXTURES / "ratings.csv") == 0
    out = capsys.readouterr().out
    row = next(line for line in out.splitlines() if line.startswith("bertopic,Q1,"))
    assert row.endswith(",12")
    assert _run("eval-ratings", tmp_path / "none.csv") == 1


def test_synth_command(tmp_path):
    assert _run("synth", "--themes", "3", "--interviews", "4", "--seed", "2", "--output-dir", tmp_path) == 0
    assert sorted(p.name for p in tmp_path.glob("*.txt")) == ["I0.txt", "I1.txt", "I2.txt", "I3.txt"]
    assert len(json.loads((tmp_path / "themes.json").read_text())["themes"]) == 3


def test_console_script_installed():
    out = subprocess.run([sys.executable, "-m", "topicctl.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == "0.1.0"
