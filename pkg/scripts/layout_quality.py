#!/usr/bin/env python3
"""Trustworthiness of the layout on two Gaussian blobs across layout seeds.

Useful when changing the optimiser: prints one line per seed and the mean.
"""
import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from oracles import trustworthiness  # noqa: E402

from topicctl.reduce import LayoutConfig, reduce  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n-neighbors", type=int, default=10)
    ap.add_argument("--min-dist", type=float, default=0.0)
    ap.add_argument("--epochs", type=int, default=500)
    ap.add_argument("--metric", default="euclidean")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 10))
    X[100:] += 10.0 / math.sqrt(10)
    scores = []
    for seed in range(args.seeds):
        cfg = LayoutConfig(n_neighbors=args.n_neighbors, min_dist=args.min_dist, n_epochs=args.epochs,
                           metric=args.metric, seed=seed)
        t0 = time.perf_counter()
        Y = reduce(X, cfg)
        scores.append(trustworthiness(X, Y, 15))
        print(f"seed {seed}: trustworthiness {scores[-1]:.4f} ({time.perf_counter() - t0:.2f}s)")
    print(f"mean {np.mean(scores):.4f} min {np.min(scores):.4f}")


if __name__ == "__main__":
    main()
