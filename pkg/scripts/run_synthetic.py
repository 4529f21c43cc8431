#!/usr/bin/env python3
"""Generate the planted-theme corpus and run every stage with offline backends.

    python3 scripts/run_synthetic.py --out runs/synthetic --preset global
"""
import argparse
import json
from pathlib import Path

from topicctl import analyze, pipeline, synth
from topicctl.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/synthetic")
    ap.add_argument("--preset", default="global", choices=("global", "individual"))
    ap.add_argument("--themes", type=int, default=5)
    ap.add_argument("--interviews", type=int, default=13)
    ap.add_argument("--corpus-seed", type=int, default=0)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    out = Path(args.out)
    vocabs = synth.write_corpus(out / "corpus", args.themes, args.interviews, args.corpus_seed)
    cfg = load_config(args.preset, overrides={
        "input_dir": str(out / "corpus"), "output_dir": str(out / "model"), "seed": args.seed,
    })
    run = pipeline.RunLog()
    chunks = pipeline.run_ingest(cfg, run)
    fit = pipeline.fit_topic_model(chunks, cfg, run=run)
    model = pipeline.run_label(cfg, fit.model, chunks)
    dists, ranking, _ = pipeline.compute_distributions(model, chunks, fit.embeddings)

    model_dir = Path(cfg.output_dir)
    pipeline.atomic_write(model_dir / pipeline.TOPICS_FILE, model.dumps())
    pipeline.atomic_write(model_dir / pipeline.DISTRIBUTION_CSV, analyze.distribution_csv(dists))
    pipeline.atomic_write(model_dir / pipeline.DISTRIBUTION_SVG,
                          analyze.stacked_bar_svg(dists, {t.topic_id: t.label for t in model.topics}))
    pipeline.atomic_write(model_dir / pipeline.RANKING_CSV, analyze.ranking_csv(ranking))
    report = pipeline.render_report(model, ranking)
    pipeline.atomic_write(model_dir / pipeline.REPORT_FILE, report)
    pipeline.write_manifest(cfg, run, f"run_synthetic --preset {args.preset}")

    recovered = {}
    for i, vocab in enumerate(vocabs):
        hits = [len(set(t.keywords.words) & set(vocab)) for t in model.topics]
        recovered[i] = max(hits, default=0)
    print(report)
    print("best planted-word overlap per theme:", json.dumps(recovered))
    print(f"{sum(v >= 3 for v in recovered.values())}/{len(vocabs)} themes recovered")


if __name__ == "__main__":
    main()
