#!/usr/bin/env python3
"""Regenerate the shipped toy fixtures deterministically.

The geometry is chosen so the full pipeline is demonstrable at desk scale:
images cluster around a "magnet" direction that short token sequences can
reach, human captions are good but not optimal for their own image, and a
searched hub text lands near the cluster center and outscores them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from hubtext.embedding import TuningSet  # noqa: E402
from hubtext.encoders import ToyTextEncoder, Vocabulary, write_image_fixtures  # noqa: E402

TOKENS = (
    "amber basalt copper dune ember flint garnet harbor indigo jade krill lumen "
    "marble nectar onyx pearl quartz reef slate topaz umber violet willow zephyr"
).split()

ENCODER_DIM = 24
ENCODER_SEED = 7
MAGNET_TEXT = "lumen quartz ember slate"
N_TUNING = 16
N_EVAL = 12
CAPTION_LEN = 4


def random_caption(rng, vocab, magnet_tokens, n_magnet):
    """A caption sharing n_magnet tokens with the magnet text."""
    fillers = [t for t in vocab.tokens if t not in magnet_tokens]
    picks = list(rng.choice(magnet_tokens, size=n_magnet, replace=False))
    picks += list(rng.choice(fillers, size=CAPTION_LEN - n_magnet, replace=False))
    rng.shuffle(picks)
    return " ".join(picks)


def make_image(rng, enc, caption, magnet_vec, lean):
    vec = 0.55 * enc.encode_text(caption) + lean * magnet_vec + 0.06 * rng.standard_normal(ENCODER_DIM)
    return vec / np.linalg.norm(vec)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(REPO / "fixtures"), help="output directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    vocab = Vocabulary(tuple(TOKENS))
    enc = ToyTextEncoder(vocab, dim=ENCODER_DIM, seed=ENCODER_SEED)
    magnet_vec = enc.encode_text(MAGNET_TEXT)
    magnet_tokens = MAGNET_TEXT.split()
    rng = np.random.default_rng(2718)

    (out / "vocab.txt").write_text("\n".join(TOKENS) + "\n", encoding="utf-8")

    # tuning images: captions with mild magnet overlap, images leaning magnet-ward
    tuning_rows = []
    for i in range(N_TUNING):
        caption = random_caption(rng, vocab, magnet_tokens, n_magnet=int(rng.integers(1, 3)))
        lean = float(rng.uniform(0.65, 0.9))
        tuning_rows.append((f"tune{i:02d}", make_image(rng, enc, caption, magnet_vec, lean)))
    write_image_fixtures(out / "images.tsv", TuningSet.from_rows(tuning_rows), header="tuning images")

    # eval images: most lean hard enough that a centered hub outscores the
    # human caption, a minority stay caption-faithful
    eval_rows = []
    pairs = []
    doc_lines = []
    qrel_lines = []
    for i in range(N_EVAL):
        human = random_caption(rng, vocab, magnet_tokens, n_magnet=int(rng.integers(1, 3)))
        lean = 0.9 if i % 3 else 0.45
        image = make_image(rng, enc, human, magnet_vec, lean)
        image_id = f"img{i:02d}"
        eval_rows.append((image_id, image))
        # the model caption degrades the human one by one filler swap
        tokens = human.split()
        swap = int(rng.integers(0, CAPTION_LEN))
        fillers = [t for t in vocab.tokens if t not in tokens]
        tokens[swap] = str(rng.choice(fillers))
        model = " ".join(tokens)
        pairs.append(
            {"image_id": image_id, "image_vec_ref": image_id, "captions": {"human": human, "model": model}}
        )
        doc_lines.append(f"d{i:02d}\t{human}")
        qrel_lines.append(f"{image_id}\td{i:02d}")
    write_image_fixtures(out / "eval_images.tsv", TuningSet.from_rows(eval_rows), header="eval images")
    (out / "pairs.jsonl").write_text("\n".join(json.dumps(p) for p in pairs) + "\n", encoding="utf-8")
    (out / "docs.tsv").write_text("\n".join(doc_lines) + "\n", encoding="utf-8")
    (out / "qrels.tsv").write_text("\n".join(qrel_lines) + "\n", encoding="utf-8")

    # fallback corpus: mostly random captions, a few magnet-adjacent ones
    corpus = [random_caption(rng, vocab, magnet_tokens, n_magnet=int(rng.integers(0, 3))) for _ in range(40)]
    (out / "corpus.txt").write_text("\n".join(corpus) + "\n", encoding="utf-8")

    (out / "pipeline.toml").write_text(
        "\n".join(
            [
                "# resolved defaults for the toy pipeline; flags override any key",
                'vocab = "fixtures/vocab.txt"',
                'tuning = "fixtures/images.tsv"',
                'corpus = "fixtures/corpus.txt"',
                f"encoder_dim = {ENCODER_DIM}",
                f"encoder_seed = {ENCODER_SEED}",
                'measure = "cosine"',
                "scale = 2.5",
                "k = [5]",
                "seed = 0",
                "workers = 1",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote fixtures to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
