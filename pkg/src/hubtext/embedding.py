"""Embedding vectors, similarity measures, CLIPScore, and the tuning-set objective.

Everything here is pure and operates on float64 numpy arrays, regardless of
the precision the vectors arrived in; score comparisons downstream care about
differences well below float32 resolution.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimMismatchError, NonFiniteError, ZeroNormError

#: L2 norms at or below this are treated as zero and rejected.
NORM_TOLERANCE = 1e-12


class Measure(enum.Enum):
    """Similarity measure between two embeddings."""

    COSINE = "cosine"
    INNER_PRODUCT = "inner_product"
    NEG_SQEUCLIDEAN = "neg_sqeuclidean"


@dataclass(frozen=True)
class SimilarityConfig:
    """How pairwise similarity is computed.

    ``clip_at_zero`` is meaningful only for ``Measure.COSINE``: when set, the
    similarity is the scaled-and-clipped score ``scale * max(cos, 0)`` (the
    CLIPScore convention); when unset, it is the raw cosine. The other two
    measures ignore both ``scale`` and ``clip_at_zero``.
    """

    measure: Measure = Measure.COSINE
    scale: float = 2.5
    clip_at_zero: bool = False

    def __post_init__(self) -> None:
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be a positive finite real, got {self.scale}")


def as_embedding(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate and convert ``values`` into a 1-D float64 vector."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"embedding must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("embedding contains NaN or infinite entries")
    return arr


def fsum_mean(matrix: np.ndarray) -> np.ndarray:
    """Column-wise mean using exactly-rounded summation.

    ``math.fsum`` returns the correctly rounded sum of its inputs, so the
    result is bit-for-bit independent of row order.
    """
    rows, _ = matrix.shape
    return np.array([math.fsum(col) for col in matrix.T], dtype=np.float64) / rows


@dataclass(frozen=True)
class TuningSet:
    """Image embeddings the hub is optimized against.

    ``vectors`` is an (n, dim) float64 matrix; ``ids`` carries one opaque
    identifier per row. Rows must be finite and none may have zero norm.
    """

    vectors: np.ndarray
    ids: tuple[str, ...]
    unit_vectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        mat = np.asarray(self.vectors, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
            raise ValueError(f"tuning set must be a non-empty (n, dim) matrix, got shape {mat.shape}")
        if len(self.ids) != mat.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for {mat.shape[0]} rows")
        if not np.all(np.isfinite(mat)):
            raise NonFiniteError("tuning set contains NaN or infinite entries")
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms <= NORM_TOLERANCE):
            bad = self.ids[int(np.argmin(norms))]
            raise ZeroNormError(f"tuning member {bad!r} has zero norm")
        object.__setattr__(self, "vectors", mat)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "unit_vectors", mat / norms[:, None])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, Sequence[float]]]) -> "TuningSet":
        pairs = list(rows)
        if not pairs:
            raise ValueError("tuning set must be non-empty")
        ids = tuple(str(i) for i, _ in pairs)
        dims = {len(v) for _, v in pairs}
        if len(dims) != 1:
            raise DimMismatchError(f"tuning rows have mixed dims {sorted(dims)}")
        return cls(np.asarray([v for _, v in pairs], dtype=np.float64), ids)


def _check_dims(a: np.ndarray, b_dim: int) -> None:
    if a.shape[0] != b_dim:
        raise DimMismatchError(f"dim {a.shape[0]} vs {b_dim}")


def normalize(e: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return ``e`` rescaled to unit L2 norm, preserving direction."""
    arr = as_embedding(e)
    norm = float(np.linalg.norm(arr))
    if norm <= NORM_TOLERANCE:
        raise ZeroNormError(f"norm {norm} is at or below tolerance {NORM_TOLERANCE}")
    return arr / norm


def cosine(e1: np.ndarray, e2: np.ndarray) -> float:
    """Cosine similarity, clamped into [-1, 1] against rounding spill."""
    a = as_embedding(e1)
    b = as_embedding(e2)
    _check_dims(a, b.shape[0])
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= NORM_TOLERANCE or nb <= NORM_TOLERANCE:
        raise ZeroNormError("cosine undefined for zero-norm vector")
    raw = float(a @ b) / (na * nb)
    return min(1.0, max(-1.0, raw))


def clip_score(e_w: np.ndarray, e_i: np.ndarray, cfg: SimilarityConfig) -> float:
    """CLIPScore between a caption embedding and an image embedding.

    ``scale * max(cos, 0)``; symmetric in its two vector arguments. Always
    clipped and scaled regardless of ``cfg.clip_at_zero`` (that flag selects
    the behaviour of :func:`similarity` / :func:`mean_similarity`, not of the
    reporting metric).
    """
    return cfg.scale * max(cosine(e_w, e_i), 0.0)


def similarity(e1: np.ndarray, e2: np.ndarray, cfg: SimilarityConfig) -> float:
    """Pairwise similarity under ``cfg.measure``."""
    if cfg.measure is Measure.COSINE:
        c = cosine(e1, e2)
        if cfg.clip_at_zero:
            return cfg.scale * max(c, 0.0)
        return c
    a = as_embedding(e1)
    b = as_embedding(e2)
    _check_dims(a, b.shape[0])
    if cfg.measure is Measure.INNER_PRODUCT:
        return float(a @ b)
    diff = a - b
    return -float(diff @ diff)


def mean_similarity(e: np.ndarray, tuning: TuningSet, cfg: SimilarityConfig) -> float:
    """Mean similarity of ``e`` to every tuning-set member under ``cfg``.

    This is the quantity the whole search maximizes. The mean uses
    exactly-rounded summation, so it does not depend on tuning-set order.
    For unclipped cosine it equals the inner product of ``e / |e|`` with the
    mean of the normalized tuning vectors.
    """
    arr = as_embedding(e)
    _check_dims(arr, tuning.dim)
    if cfg.measure is Measure.COSINE:
        norm = float(np.linalg.norm(arr))
        if norm <= NORM_TOLERANCE:
            raise ZeroNormError("cosine objective undefined for zero-norm embedding")
        sims = tuning.unit_vectors @ (arr / norm)
        np.clip(sims, -1.0, 1.0, out=sims)
        if cfg.clip_at_zero:
            sims = cfg.scale * np.maximum(sims, 0.0)
    elif cfg.measure is Measure.INNER_PRODUCT:
        sims = tuning.vectors @ arr
    else:
        diffs = tuning.vectors - arr
        sims = -np.einsum("ij,ij->i", diffs, diffs)
    return math.fsum(sims) / len(tuning)
