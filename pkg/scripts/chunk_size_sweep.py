#!/usr/bin/env python3
"""Chunk counts per interview for several sentences-per-chunk settings.

    python3 scripts/chunk_size_sweep.py CORPUS_DIR [--sizes 5 6 7 8] [--speakers P]
"""
import argparse

from topicctl.ingest import chunk_corpus, load_stoplist, load_transcripts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("corpus")
    ap.add_argument("--sizes", type=int, nargs="+", default=[5, 6, 7, 8])
    ap.add_argument("--speakers", nargs="*", default=None)
    args = ap.parse_args()

    stop = load_stoplist()
    transcripts = load_transcripts(args.corpus)
    print("interview," + ",".join(f"n={n}" for n in args.sizes))
    totals = [0] * len(args.sizes)
    for raw in transcripts:
        counts = [len(chunk_corpus([raw], n, stop, speakers=args.speakers)) for n in args.sizes]
        totals = [a + b for a, b in zip(totals, counts)]
        print(raw.interview_id + "," + ",".join(map(str, counts)))
    print("total," + ",".join(map(str, totals)))


if __name__ == "__main__":
    main()
