"""Beam local search over fixed-length token sequences.

Hill-climbing over single-token substitutions: each surviving candidate keeps
a set of positions not yet tried since it last entered the beam; per round,
each candidate picks one such position (uniformly at random by default),
proposes every vocabulary token there, and the k best of old-beam-plus-
proposals form the next beam. Whenever the beam changes, every member's
position set is reset in full, deliberately re-opening already-searched
positions. The search stops once no member has positions left to try, which
makes the winner provably stable under any single-token replacement.

Scoring is sharded across workers boss-worker style: the boss owns all beam
state and the random draws, workers score disjoint vocabulary shards and
return only their top-k, and the merged result is identical to a sequential
full-vocabulary scan no matter how many workers run.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from queue import SimpleQueue
from typing import Callable, Iterable, Sequence

import numpy as np

from .embedding import SimilarityConfig, TuningSet, mean_similarity
from .encoders import TextEncoder, TokenSeq
from .errors import (
    DimMismatchError,
    InvalidBeamSizeError,
    TimeoutAbortError,
    WorkerFailureError,
)


@dataclass(frozen=True)
class BeamEntry:
    seq: TokenSeq
    score: float
    text: str


@dataclass
class SearchState:
    """Mutable bookkeeping owned by the boss while a search runs."""

    beam: list[BeamEntry]
    remaining: dict[TokenSeq, set[int]]
    iteration: int = 0


@dataclass(frozen=True)
class SearchReport:
    best: BeamEntry
    iterations: int
    substitutions_applied: int
    trajectory: tuple[tuple[int, float], ...]
    substitution_counts: tuple[int, ...] = field(default=())
    wall_time: float = 0.0


def topk_select(candidates: Iterable[BeamEntry], k: int) -> list[BeamEntry]:
    """Keep the k best entries by (score desc, text asc), one per surface text.

    Duplicate texts collapse to their highest-scoring entry before ranking,
    so a beam never wastes slots on copies.
    """
    if k < 1:
        raise InvalidBeamSizeError(f"k must be >= 1, got {k}")
    unique: dict[str, BeamEntry] = {}
    for entry in candidates:
        kept = unique.get(entry.text)
        if kept is None or entry.score > kept.score:
            unique[entry.text] = entry
    if not unique:
        raise ValueError("no candidates to select from")
    ranked = sorted(unique.values(), key=lambda e: (-e.score, e.text))
    return ranked[:k]


def score_shard(
    base: TokenSeq,
    position: int,
    token_ids: Sequence[int],
    encoder: TextEncoder,
    tuning: TuningSet,
    cfg: SimilarityConfig,
    k: int,
    cache: dict[TokenSeq, float] | None = None,
) -> list[tuple[int, float]]:
    """Worker body: score every substitution in one vocabulary shard.

    Returns the shard's k best (token id, score) pairs sorted by the global
    order (score desc, candidate text asc), so the boss-side merge of all
    shards reproduces a sequential full-vocabulary scan exactly.
    """
    if not 0 <= position < len(base):
        raise ValueError(f"position {position} out of bounds for length {len(base)}")
    vocab = encoder.vocab
    scored: list[tuple[float, str, int]] = []
    for token_id in token_ids:
        cand = base[:position] + (int(token_id),) + base[position + 1 :]
        score = None if cache is None else cache.get(cand)
        if score is None:
            score = mean_similarity(encoder.encode_sequence(cand), tuning, cfg)
            if cache is not None:
                cache[cand] = score
        scored.append((score, vocab.decode(cand), int(token_id)))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [(token_id, score) for score, _, token_id in scored[:k]]


def shard_ranges(vocab_size: int, n_shards: int) -> list[range]:
    """Split [0, vocab_size) into up to n_shards contiguous non-empty ranges."""
    n_shards = max(1, min(n_shards, vocab_size))
    bounds = np.linspace(0, vocab_size, n_shards + 1, dtype=int)
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_sharded(tasks: Sequence[Callable[[], object]], executor: ThreadPoolExecutor | None) -> list:
    """Run shard tasks, retrying each failed shard once before aborting.

    Results come back in task order, so downstream merges never depend on
    scheduling. With no executor the tasks run inline (single-worker mode).
    """
    if executor is None:
        futures = None
        outcomes = []
        for task in tasks:
            try:
                outcomes.append((True, task()))
            except Exception as exc:  # noqa: BLE001 - retried below
                outcomes.append((False, exc))
    else:
        futures = [executor.submit(task) for task in tasks]
        outcomes = []
        for future in futures:
            try:
                outcomes.append((True, future.result()))
            except Exception as exc:  # noqa: BLE001 - retried below
                outcomes.append((False, exc))
    results = []
    for idx, (ok, value) in enumerate(outcomes):
        if ok:
            results.append(value)
            continue
        retry = executor.submit(tasks[idx]) if executor is not None else None
        try:
            results.append(retry.result() if retry is not None else tasks[idx]())
        except Exception as exc:  # noqa: BLE001
            raise WorkerFailureError(
                f"shard {idx} failed twice: {value}; retry: {exc}"
            ) from exc
    return results


class _EncoderCheckout:
    """Hands each task an encoder; remote encoders must not be shared."""

    def __init__(self, encoder: TextEncoder, factory: Callable[[], TextEncoder] | None, n: int):
        self._owned: list[TextEncoder] = []
        self._queue: SimpleQueue = SimpleQueue()
        if factory is None:
            for _ in range(n):
                self._queue.put(encoder)
        else:
            for _ in range(n):
                inst = factory()
                self._owned.append(inst)
                self._queue.put(inst)

    def run(self, fn: Callable[[TextEncoder], object]):
        enc = self._queue.get()
        try:
            return fn(enc)
        finally:
            self._queue.put(enc)

    def close(self) -> None:
        for enc in self._owned:
            close = getattr(enc, "close", None)
            if close is not None:
                close()


def score_position(
    base: TokenSeq,
    position: int,
    encoder: TextEncoder,
    tuning: TuningSet,
    cfg: SimilarityConfig,
    k: int,
    *,
    n_workers: int = 1,
    executor: ThreadPoolExecutor | None = None,
    checkout: _EncoderCheckout | None = None,
    cache: dict[TokenSeq, float] | None = None,
) -> list[tuple[int, float]]:
    """Boss side: top-k (token id, score) for all substitutions at ``position``.

    The result is bit-identical for any worker count: every shard's top-k is
    merged under the same total order a sequential scan uses.
    """
    vocab = encoder.vocab
    shards = shard_ranges(len(vocab), n_workers)
    if checkout is None:
        checkout = _EncoderCheckout(encoder, None, max(1, n_workers))

    def make_task(shard: range) -> Callable[[], list[tuple[int, float]]]:
        return lambda: checkout.run(
            lambda enc: score_shard(base, position, shard, enc, tuning, cfg, k, cache)
        )

    shard_results = run_sharded([make_task(s) for s in shards], executor)
    merged: list[tuple[float, str, int]] = []
    for result in shard_results:
        for token_id, score in result:
            cand = base[:position] + (token_id,) + base[position + 1 :]
            merged.append((score, vocab.decode(cand), token_id))
    merged.sort(key=lambda item: (-item[0], item[1]))
    return [(token_id, score) for score, _, token_id in merged[:k]]


def beam_local_search(
    init: Sequence[int],
    tuning: TuningSet,
    encoder: TextEncoder,
    cfg: SimilarityConfig,
    k: int,
    seed: int = 0,
    *,
    n_workers: int = 1,
    encoder_factory: Callable[[], TextEncoder] | None = None,
    position_order: str = "random",
    sweep_all_positions: bool = False,
    max_iterations: int | None = None,
) -> SearchReport:
    """Refine ``init`` by beam local search; deterministic for a fixed seed.

    ``position_order="sequential"`` with ``k=1`` reproduces the greedy
    left-to-right baseline. ``sweep_all_positions`` makes each candidate
    exhaust its whole remaining set every round instead of one draw (an
    extension, off by default). ``max_iterations`` guards non-termination;
    it defaults to ``10 * len(init) * k`` and overrunning it raises
    :class:`TimeoutAbortError`.
    """
    started = time.perf_counter()
    if k < 1:
        raise InvalidBeamSizeError(f"k must be >= 1, got {k}")
    if position_order not in ("random", "sequential"):
        raise ValueError(f"unknown position_order {position_order!r}")
    if encoder.dim != tuning.dim:
        raise DimMismatchError(f"encoder dim {encoder.dim} vs tuning dim {tuning.dim}")
    vocab = encoder.vocab
    ids = vocab.validate_sequence(init)
    length = len(ids)
    limit = max_iterations if max_iterations is not None else 10 * length * k
    rng = np.random.default_rng(seed)
    cache: dict[TokenSeq, float] = {}

    warm = getattr(encoder, "warm_token_cache", None)
    if warm is not None:
        warm()

    init_score = mean_similarity(encoder.encode_sequence(ids), tuning, cfg)
    cache[ids] = init_score
    state = SearchState(
        beam=[BeamEntry(ids, init_score, vocab.decode(ids))],
        remaining={ids: set(range(length))},
    )
    trajectory: list[tuple[int, float]] = []
    substitution_counts: list[int] = []
    substitutions = 0

    executor = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    checkout = _EncoderCheckout(encoder, encoder_factory, max(1, n_workers))
    try:
        while True:
            state.iteration += 1
            if state.iteration > limit:
                raise TimeoutAbortError(
                    f"no convergence within {limit} iterations (length={length}, k={k})"
                )
            candidates: dict[str, BeamEntry] = {e.text: e for e in state.beam}
            for entry in state.beam:
                remaining = state.remaining[entry.seq]
                if not remaining:
                    continue
                if sweep_all_positions:
                    positions = sorted(remaining)
                elif position_order == "sequential":
                    positions = [min(remaining)]
                else:
                    ordered = sorted(remaining)
                    positions = [ordered[int(rng.integers(len(ordered)))]]
                for position in positions:
                    top = score_position(
                        entry.seq,
                        position,
                        encoder,
                        tuning,
                        cfg,
                        k,
                        n_workers=n_workers,
                        executor=executor,
                        checkout=checkout,
                        cache=cache,
                    )
                    for token_id, score in top:
                        cand = entry.seq[:position] + (token_id,) + entry.seq[position + 1 :]
                        text = vocab.decode(cand)
                        kept = candidates.get(text)
                        if kept is None or score > kept.score:
                            candidates[text] = BeamEntry(cand, score, text)
                    remaining.discard(position)
            new_beam = topk_select(candidates.values(), k)
            old_texts = {e.text for e in state.beam}
            new_texts = {e.text for e in new_beam}
            substitutions += len(new_texts - old_texts)
            trajectory.append((state.iteration, new_beam[0].score))
            substitution_counts.append(substitutions)
            if new_texts != old_texts:
                state.remaining = {e.seq: set(range(length)) for e in new_beam}
            state.beam = new_beam
            if all(not state.remaining[e.seq] for e in state.beam):
                break
    finally:
        checkout.close()
        if executor is not None:
            executor.shutdown(wait=True)

    return SearchReport(
        best=state.beam[0],
        iterations=state.iteration,
        substitutions_applied=substitutions,
        trajectory=tuple(trajectory),
        substitution_counts=tuple(substitution_counts),
        wall_time=time.perf_counter() - started,
    )


def greedy_local_search(
    init: Sequence[int],
    tuning: TuningSet,
    encoder: TextEncoder,
    cfg: SimilarityConfig,
    seed: int = 0,
    **kwargs,
) -> SearchReport:
    """Greedy baseline: beam of one, positions visited left to right."""
    return beam_local_search(
        init, tuning, encoder, cfg, k=1, seed=seed, position_order="sequential", **kwargs
    )


def export_trajectory_csv(report: SearchReport, path: str | Path) -> None:
    """Write one row per search round: iteration, best score, substitutions so far."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "best_score", "substitutions"])
        counts = report.substitution_counts or tuple(
            report.substitutions_applied for _ in report.trajectory
        )
        for (iteration, best_score), subs in zip(report.trajectory, counts):
            writer.writerow([iteration, repr(best_score), subs])


def write_run_metadata(
    path: str | Path,
    *,
    seed: int,
    k: int,
    cfg: SimilarityConfig,
    encoder_desc: dict,
    wall_time: float,
    extra: dict | None = None,
) -> None:
    """JSON sidecar describing a search run."""
    payload = {
        "seed": seed,
        "k": k,
        "measure": cfg.measure.value,
        "scale": cfg.scale,
        "clip_at_zero": cfg.clip_at_zero,
        "encoder": encoder_desc,
        "wall_time_seconds": wall_time,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
