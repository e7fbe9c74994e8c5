#!/usr/bin/env python3
"""Beam-size study at toy scale: final objective and cost per k.

Runs the search over a family of seeded random instances for each beam size
and prints mean final objective, mean iterations, and mean wall time. Larger
beams help up to a point and then mostly cost time, so this is the tool for
picking k before a long run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from hubtext.embedding import Measure, SimilarityConfig, TuningSet  # noqa: E402
from hubtext.encoders import ToyTextEncoder, Vocabulary  # noqa: E402
from hubtext.search import beam_local_search  # noqa: E402

COS = SimilarityConfig(measure=Measure.COSINE)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k-values", default="1,5,10,20,50")
    parser.add_argument("--instances", type=int, default=10)
    parser.add_argument("--vocab-size", type=int, default=32)
    parser.add_argument("--length", type=int, default=8)
    parser.add_argument("--dim", type=int, default=12)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    k_values = [int(k) for k in args.k_values.split(",")]
    vocab = Vocabulary(tuple(f"t{i:03d}" for i in range(args.vocab_size)))

    print(f"{'k':>4} {'mean_final':>12} {'mean_iters':>11} {'mean_seconds':>13}")
    for k in k_values:
        finals, iters, times = [], [], []
        for seed in range(args.instances):
            enc = ToyTextEncoder(vocab, dim=args.dim, seed=seed)
            rng = np.random.default_rng(5000 + seed)
            tuning = TuningSet.from_rows(
                [(f"img{i}", rng.standard_normal(args.dim)) for i in range(8)]
            )
            init = tuple(int(x) for x in rng.integers(0, args.vocab_size, size=args.length))
            report = beam_local_search(
                init, tuning, enc, COS, k=k, seed=seed, n_workers=args.workers
            )
            finals.append(report.best.score)
            iters.append(report.iterations)
            times.append(report.wall_time)
        print(
            f"{k:>4} {np.mean(finals):>12.6f} {np.mean(iters):>11.1f} {np.mean(times):>13.3f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
