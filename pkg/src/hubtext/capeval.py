"""Corpus- and instance-level caption scoring, win rates, and significance.

Pairs carry one image embedding and one caption per system; a hub "system" is
a single text broadcast to every pair. Ties count against the challenger in
both the win rate and the bootstrap, keeping superiority claims conservative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embedding import SimilarityConfig, clip_score
from .encoders import TextEncoder
from .errors import LengthMismatchError, ParseError

HUB_SYSTEM = "hub"


@dataclass(frozen=True)
class EvalPair:
    """One image with the caption each system produced for it."""

    image_id: str
    image_vec: np.ndarray
    captions: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "image_vec", np.asarray(self.image_vec, dtype=np.float64))
        object.__setattr__(self, "captions", dict(self.captions))


def _require_system(pairs: Sequence[EvalPair], system: str) -> None:
    for pair in pairs:
        if system not in pair.captions:
            raise ValueError(f"pair {pair.image_id!r} lacks a caption for system {system!r}")


def with_hub_system(pairs: Sequence[EvalPair], hub_text: str, name: str = HUB_SYSTEM) -> list[EvalPair]:
    """Broadcast one hub text to every pair under a new system name."""
    return [
        EvalPair(p.image_id, p.image_vec, {**p.captions, name: hub_text}) for p in pairs
    ]


def instance_scores(
    pairs: Sequence[EvalPair],
    system: str,
    encoder: TextEncoder,
    cfg: SimilarityConfig,
) -> np.ndarray:
    """Per-pair CLIPScore of one system's captions, in pair order."""
    if not pairs:
        raise ValueError("no pairs to score")
    _require_system(pairs, system)
    # one encode per distinct caption; a broadcast hub text encodes once
    distinct = {p.captions[system] for p in pairs}
    encoded = {text: encoder.encode_text(text) for text in distinct}
    return np.array(
        [clip_score(encoded[p.captions[system]], p.image_vec, cfg) for p in pairs]
    )


def corpus_clipscore(
    pairs: Sequence[EvalPair],
    system: str,
    encoder: TextEncoder,
    cfg: SimilarityConfig,
) -> float:
    """Mean CLIPScore of a system over all pairs (order-independent)."""
    return math.fsum(instance_scores(pairs, system, encoder, cfg)) / len(pairs)


def win_rate(
    pairs: Sequence[EvalPair],
    system_a: str,
    system_b: str,
    encoder: TextEncoder,
    cfg: SimilarityConfig,
) -> float:
    """Fraction of pairs where a's score strictly exceeds b's; ties lose."""
    scores_a = instance_scores(pairs, system_a, encoder, cfg)
    scores_b = instance_scores(pairs, system_b, encoder, cfg)
    return float(np.count_nonzero(scores_a > scores_b)) / len(pairs)


def paired_bootstrap(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    resamples: int = 1000,
    seed: int = 0,
) -> float:
    """One-sided paired bootstrap p-value for "a beats b on the mean".

    Resamples pair indices with replacement (resample size = dataset size)
    and reports the fraction of resamples in which a's mean fails to exceed
    b's; ties count against a. Deterministic for a fixed seed. Values below
    0.05 mark conventional significance.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatchError(f"paired scores must align, got {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise ValueError("need at least two pairs to resample")
    if resamples < 1:
        raise ValueError(f"resamples must be >= 1, got {resamples}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(a), size=(resamples, len(a)))
    losses = np.count_nonzero(a[idx].mean(axis=1) <= b[idx].mean(axis=1))
    return losses / resamples


def evaluation_report(
    pairs: Sequence[EvalPair],
    systems: Sequence[str],
    encoder: TextEncoder,
    cfg: SimilarityConfig,
    resamples: int = 1000,
    seed: int = 0,
) -> dict:
    """Corpus scores, pairwise win rates, and bootstrap p-values as one dict."""
    scores = {s: instance_scores(pairs, s, encoder, cfg) for s in systems}
    corpus = {s: math.fsum(scores[s]) / len(pairs) for s in systems}
    wins = {
        a: {
            b: float(np.count_nonzero(scores[a] > scores[b])) / len(pairs)
            for b in systems
            if b != a
        }
        for a in systems
    }
    p_values = {
        a: {
            b: paired_bootstrap(scores[a], scores[b], resamples=resamples, seed=seed)
            for b in systems
            if b != a
        }
        for a in systems
    }
    return {
        "pairs": len(pairs),
        "corpus_clipscore": corpus,
        "win_rate": wins,
        "bootstrap_p": p_values,
        "resamples": resamples,
        "seed": seed,
    }


def load_eval_pairs(
    path: str | Path, image_vectors: Mapping[str, np.ndarray]
) -> list[EvalPair]:
    """Read JSON-lines eval input; each line references an image fixture id.

    Line shape: ``{"image_id": ..., "image_vec_ref": ..., "captions": {...}}``
    where ``image_vec_ref`` must be a key of ``image_vectors``.
    """
    path = Path(path)
    pairs: list[EvalPair] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        try:
            ref = obj["image_vec_ref"]
            captions = obj["captions"]
            image_id = obj["image_id"]
        except KeyError as exc:
            raise ParseError(f"{path}:{lineno}: missing field {exc}") from exc
        if ref not in image_vectors:
            raise ParseError(f"{path}:{lineno}: unknown image_vec_ref {ref!r}")
        if not isinstance(captions, dict) or not captions:
            raise ParseError(f"{path}:{lineno}: captions must be a non-empty object")
        pairs.append(EvalPair(str(image_id), image_vectors[ref], captions))
    if not pairs:
        raise ParseError(f"{path}: no pairs")
    systems = set(pairs[0].captions)
    for pair in pairs:
        if set(pair.captions) != systems:
            raise ParseError(f"{path}: pair {pair.image_id!r} has mismatched systems")
    return pairs
