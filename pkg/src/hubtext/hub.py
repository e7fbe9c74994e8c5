"""Closed-form hub embeddings per similarity measure, plus a numeric oracle.

The closed forms:

* cosine:          unit vector along the mean of the normalized tuning
                     vectors (Cauchy-Schwarz equality condition),
* inner product:   same direction as the raw mean, scaled to a caller-chosen
                     norm budget (the unconstrained problem is unbounded),
* squared Euclid.: the raw mean itself (vertex of a concave quadratic).

The oracle is a seeded projected-gradient ascent used only to cross-check the
closed forms; it shares no code path with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding import (
    NORM_TOLERANCE,
    Measure,
    SimilarityConfig,
    TuningSet,
    fsum_mean,
    mean_similarity,
)
from .errors import DegenerateHubError, NonFiniteError


@dataclass(frozen=True)
class HubSolution:
    """A hub embedding together with the objective value it attains."""

    embedding: np.ndarray
    measure: Measure
    objective_value: float
    degenerate: bool = False


def optimal_hub_cosine(tuning: TuningSet) -> HubSolution:
    """Best embedding under mean cosine similarity, returned unit-norm.

    Any positive rescaling is equally optimal; the unit-norm representative
    is returned. Raises :class:`DegenerateHubError` when the normalized
    tuning vectors cancel out (e.g. an antipodal pair), in which case the
    objective is constant and no direction is preferable.
    """
    mean_unit = fsum_mean(tuning.unit_vectors)
    norm = float(np.linalg.norm(mean_unit))
    if norm <= NORM_TOLERANCE:
        raise DegenerateHubError("normalized tuning vectors sum to zero; objective is constant")
    embedding = mean_unit / norm
    cfg = SimilarityConfig(measure=Measure.COSINE, clip_at_zero=False)
    return HubSolution(embedding, Measure.COSINE, mean_similarity(embedding, tuning, cfg))


def optimal_hub_inner_product(tuning: TuningSet, norm_budget: float = 1.0) -> HubSolution:
    """Best embedding under mean inner product subject to ``|e| = norm_budget``.

    Unconstrained, the objective grows without bound along the raw-mean
    direction, hence the explicit budget.
    """
    if not (norm_budget > 0 and math.isfinite(norm_budget)):
        raise ValueError(f"norm_budget must be positive and finite, got {norm_budget}")
    raw_mean = fsum_mean(tuning.vectors)
    norm = float(np.linalg.norm(raw_mean))
    if norm <= NORM_TOLERANCE:
        raise DegenerateHubError("tuning vectors sum to zero; objective is constant on the sphere")
    embedding = raw_mean * (norm_budget / norm)
    cfg = SimilarityConfig(measure=Measure.INNER_PRODUCT)
    return HubSolution(embedding, Measure.INNER_PRODUCT, mean_similarity(embedding, tuning, cfg))


def optimal_hub_sqeuclidean(tuning: TuningSet) -> HubSolution:
    """Best embedding under negated mean squared Euclidean distance.

    The objective is a concave quadratic whose vertex is the raw mean of the
    tuning vectors; the mean is returned as-is, not re-normalized.
    """
    embedding = fsum_mean(tuning.vectors)
    cfg = SimilarityConfig(measure=Measure.NEG_SQEUCLIDEAN)
    return HubSolution(embedding, Measure.NEG_SQEUCLIDEAN, mean_similarity(embedding, tuning, cfg))


def numeric_hub_oracle(
    tuning: TuningSet,
    cfg: SimilarityConfig,
    steps: int = 2000,
    step_size: float = 0.3,
    seed: int = 0,
    norm_budget: float | None = None,
) -> HubSolution:
    """Seeded gradient-ascent solver, independent of the closed forms.

    Starts from a random unit vector and ascends the configured objective;
    for cosine the iterate is re-normalized after every step, and for inner
    product with a ``norm_budget`` it is projected back onto the ball. An
    unconstrained inner-product run is allowed but diverges by construction;
    if the final objective is not finite, :class:`NonFiniteError` is raised.
    Deterministic for a fixed seed.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(tuning.dim)
    e /= np.linalg.norm(e)

    if cfg.measure is Measure.COSINE:
        mean_unit = fsum_mean(tuning.unit_vectors)
        for _ in range(steps):
            if cfg.clip_at_zero:
                active = (tuning.unit_vectors @ e) > 0.0
                if np.any(active):
                    grad = cfg.scale * np.sum(tuning.unit_vectors[active], axis=0) / len(tuning)
                else:
                    grad = tuning.unit_vectors[0]  # kick off the zero-score plateau
            else:
                grad = mean_unit
            grad = grad - (grad @ e) * e  # tangent projection
            e = e + step_size * grad
            norm = np.linalg.norm(e)
            if norm <= NORM_TOLERANCE:
                e = rng.standard_normal(tuning.dim)
                norm = np.linalg.norm(e)
            e = e / norm
    elif cfg.measure is Measure.INNER_PRODUCT:
        grad = fsum_mean(tuning.vectors)
        with np.errstate(over="ignore"):  # unconstrained runs may diverge; caught below
            for _ in range(steps):
                e = e + step_size * grad
                if norm_budget is not None:
                    norm = float(np.linalg.norm(e))
                    if norm > norm_budget:
                        e = e * (norm_budget / norm)
    else:
        mean = fsum_mean(tuning.vectors)
        for _ in range(steps):
            e = e + step_size * (-2.0) * (e - mean)

    if not np.all(np.isfinite(e)):
        raise NonFiniteError("oracle iterate diverged to non-finite values")
    objective = mean_similarity(e, tuning, cfg)
    if not math.isfinite(objective):
        raise NonFiniteError("oracle objective diverged")
    return HubSolution(e, cfg.measure, objective)
