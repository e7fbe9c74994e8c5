#!/usr/bin/env python3
"""Drive the whole pipeline on the shipped fixtures and print a summary.

Steps: closed-form hub embedding, corpus-fallback init, beam local search,
caption evaluation, and the retrieval contamination table, all through the
CLI so the run doubles as an integration smoke test.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from hubtext.cli import main as cli  # noqa: E402

FIXTURES = REPO / "fixtures"


def run(out: Path, k_list: str, seed: int, workers: int) -> int:
    enc_flags = [
        "--vocab", str(FIXTURES / "vocab.txt"),
        "--encoder-dim", "24",
        "--encoder-seed", "7",
    ]
    steps = [
        ["hub-embed", "--tuning", str(FIXTURES / "images.tsv"), "--out", str(out / "hub")],
        [
            "init", *enc_flags,
            "--tuning", str(FIXTURES / "images.tsv"),
            "--corpus", str(FIXTURES / "corpus.txt"),
            "--out", str(out / "init"),
        ],
        [
            "search", *enc_flags,
            "--tuning", str(FIXTURES / "images.tsv"),
            "--init-json", str(out / "init" / "init.json"),
            "--k", k_list,
            "--seed", str(seed),
            "--workers", str(workers),
            "--out", str(out / "search"),
        ],
        [
            "eval-caption", *enc_flags,
            "--pairs", str(FIXTURES / "pairs.jsonl"),
            "--images", str(FIXTURES / "eval_images.tsv"),
            "--hub-json", str(out / "search" / "search.json"),
            "--out", str(out / "caption"),
        ],
        [
            "eval-retrieval", *enc_flags,
            "--docs", str(FIXTURES / "docs.tsv"),
            "--queries", str(FIXTURES / "eval_images.tsv"),
            "--qrels", str(FIXTURES / "qrels.tsv"),
            "--hub-json", str(out / "search" / "search.json"),
            "--counts", "0,1,1000",
            "--out", str(out / "retrieval"),
        ],
    ]
    for argv in steps:
        code = cli(argv)
        if code != 0:
            print(f"step {argv[0]} failed with exit code {code}", file=sys.stderr)
            return code

    caption = json.loads((out / "caption" / "caption_eval.json").read_text())
    search = json.loads((out / "search" / "search.json").read_text())
    print()
    print("=== toy pipeline summary ===")
    print(f"hub text: {search['best']['text']!r} (objective {search['best']['score']:.4f})")
    for system, score in sorted(caption["corpus_clipscore"].items()):
        print(f"corpus CLIPScore[{system}] = {score:.4f}")
    print(f"win rate hub > human: {caption['win_rate']['hub']['human']:.3f}")
    print(f"outputs under {out}")
    return 0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(REPO / "artifacts" / "toy_pipeline"))
    parser.add_argument("--k", default="5", help="comma-separated beam sizes")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return run(out, args.k, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
