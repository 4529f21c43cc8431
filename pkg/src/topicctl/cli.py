"""``topicctl`` command line.

Exit codes: 0 success, 1 configuration error or missing input, 2 backend failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from topicctl import __version__, analyze, pipeline, synth
from topicctl.config import PRESETS, load_config
from topicctl.embed import Embedder, embed_chunks
from topicctl.errors import BackendError, ConfigError
from topicctl.topics import TopicModel

log = logging.getLogger("topicctl")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--input-dir", default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--embedder", choices=("stub", "file", "remote"), default=None)
    p.add_argument("--labeler", choices=("stub", "remote"), default=None)
    p.add_argument("--chunk-sentences", type=int, default=None, metavar="N")
    p.add_argument("--dedup-keywords", action="store_true", default=None)
    p.add_argument("--speakers", default=None, help="comma-separated speaker tags to keep, e.g. P")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topicctl", description="Topic models for interview transcripts.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write the synthetic planted-theme corpus")
    p.add_argument("--themes", type=int, default=5)
    p.add_argument("--interviews", type=int, default=13)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default="corpus")

    p = sub.add_parser("ingest", help="clean and chunk transcripts into chunks.jsonl")
    _common(p)

    p = sub.add_parser("model", help="fit topics.json (re-ingests when --input-dir is given)")
    _common(p)
    p.add_argument("--dump-reduced", default=None, metavar="CSV", help="debug: write reduced coordinates")
    p.add_argument("--dump-tree", default=None, metavar="CSV", help="debug: write the condensed tree")

    p = sub.add_parser("label", help="label topics.json in place")
    _common(p)

    p = sub.add_parser("distribution", help="per-interview distributions and global ranking")
    _common(p)

    p = sub.add_parser("report", help="write topics.md and print it")
    _common(p)

    p = sub.add_parser("eval-ratings", help="summarise a ratings CSV")
    p.add_argument("ratings")
    p.add_argument("--output", default=None, help="summary CSV path (default: stdout)")
    return parser


def _config_from_args(args):
    o: dict = {}
    for attr, key in (("input_dir", "input_dir"), ("output_dir", "output_dir"),
                      ("seed", "seed"), ("chunk_sentences", "chunk_sentences"),
                      ("dedup_keywords", "dedup_keywords")):
        value = getattr(args, attr, None)
        if value is not None:
            o[key] = value
    if args.embedder is not None:
        o["embedder"] = {"backend": args.embedder}
    if args.labeler is not None:
        o["labeler"] = {"backend": args.labeler}
    if args.speakers is not None:
        o["speakers"] = [s.strip() for s in args.speakers.split(",") if s.strip()]
    return load_config(args.preset, args.config, o)


def _load_model(cfg) -> TopicModel:
    path = Path(cfg.output_dir) / pipeline.TOPICS_FILE
    if not path.exists():
        raise ConfigError(f"missing {path}; run `topicctl model` first")
    return TopicModel.load(path)


def cmd_ingest(args) -> None:
    cfg = _config_from_args(args)
    run = pipeline.RunLog()
    chunks = pipeline.run_ingest(cfg, run)
    pipeline.write_manifest(cfg, run, "ingest")
    print(f"{len(chunks)} chunks -> {Path(cfg.output_dir) / pipeline.CHUNKS_FILE}")


def cmd_model(args) -> None:
    cfg = _config_from_args(args)
    run = pipeline.RunLog()
    chunks = pipeline.run_ingest(cfg, run) if cfg.input_dir else pipeline.load_chunks(cfg)
    embedder = Embedder(cfg.embedder)
    fit = pipeline.fit_topic_model(chunks, cfg, embedder, run)
    embedder.save_cache()
    out = Path(cfg.output_dir) / pipeline.TOPICS_FILE
    pipeline.atomic_write(out, fit.model.dumps())
    if args.dump_reduced:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["chunk_id", "label"] + [f"x{i}" for i in range(fit.reduced.shape[1])])
        for c, lab, row in zip(sorted(chunks, key=lambda c: c.chunk_id), fit.labels, fit.reduced):
            w.writerow([c.chunk_id, int(lab)] + [repr(float(v)) for v in row])
        pipeline.atomic_write(args.dump_reduced, buf.getvalue())
    if args.dump_tree:
        pipeline.atomic_write(args.dump_tree, fit.tree.to_csv())
    run.warnings.extend(fit.model.warnings)
    pipeline.write_manifest(cfg, run, "model")
    print(f"{len(fit.model.topics)} topics, {fit.model.noise_count} noise chunks -> {out}")


def cmd_label(args) -> None:
    cfg = _config_from_args(args)
    run = pipeline.RunLog()
    model = _load_model(cfg)
    chunks = pipeline.load_chunks(cfg)
    with run.stage("label"):
        labeled = pipeline.run_label(cfg, model, chunks)
    pipeline.atomic_write(Path(cfg.output_dir) / pipeline.TOPICS_FILE, labeled.dumps())
    run.warnings.extend(labeled.warnings)
    pipeline.write_manifest(cfg, run, "label")
    for t in labeled.topics:
        print(f"{t.topic_id}\t{t.label}")


def cmd_distribution(args) -> None:
    cfg = _config_from_args(args)
    run = pipeline.RunLog()
    model = _load_model(cfg)
    chunks = sorted(pipeline.load_chunks(cfg), key=lambda c: c.chunk_id)
    embedder = Embedder(cfg.embedder)
    with run.stage("embed"):
        E = embed_chunks(chunks, cfg.embedder, embedder).values
    embedder.save_cache()
    with run.stage("distribution"):
        dists, ranking, _ = pipeline.compute_distributions(model, chunks, E)
    out = Path(cfg.output_dir)
    labels = {t.topic_id: t.label for t in model.topics}
    pipeline.atomic_write(out / pipeline.DISTRIBUTION_CSV, analyze.distribution_csv(dists))
    pipeline.atomic_write(out / pipeline.DISTRIBUTION_SVG, analyze.stacked_bar_svg(dists, labels))
    pipeline.atomic_write(out / pipeline.RANKING_CSV, analyze.ranking_csv(ranking))
    pipeline.write_manifest(cfg, run, "distribution")
    print(f"{len(dists)} interviews x {len(model.topics)} topics -> {out / pipeline.DISTRIBUTION_CSV}")


def cmd_report(args) -> None:
    cfg = _config_from_args(args)
    model = _load_model(cfg)
    ranking_path = Path(cfg.output_dir) / pipeline.RANKING_CSV
    ranking = analyze.read_ranking_csv(ranking_path) if ranking_path.exists() else None
    text = pipeline.render_report(model, ranking)
    pipeline.atomic_write(Path(cfg.output_dir) / pipeline.REPORT_FILE, text)
    sys.stdout.write(text)


def cmd_eval_ratings(args) -> None:
    if not Path(args.ratings).exists():
        raise ConfigError(f"ratings file not found: {args.ratings}")
    _, summaries = analyze.aggregate_ratings(analyze.load_ratings(args.ratings))
    text = analyze.summaries_csv(summaries)
    if args.output:
        pipeline.atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> None:
    synth.write_corpus(args.output_dir, args.themes, args.interviews, args.seed)
    print(f"{args.interviews} interviews, {args.themes} themes -> {args.output_dir}")


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "model": cmd_model,
    "label": cmd_label,
    "distribution": cmd_distribution,
    "report": cmd_report,
    "eval-ratings": cmd_eval_ratings,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"topicctl: error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"topicctl: backend error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
