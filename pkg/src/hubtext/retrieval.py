"""Image-to-text retrieval harness with hub-text contamination.

An index holds caption texts with their embeddings; queries are image
embeddings. Contamination appends copies of a single hub text to the document
side, never touching relevance judgments, and the harness reports how the
standard IR metrics move as the number of injected copies grows. Retrieval is
an exact exhaustive cosine scan: at desk scale there is no reason to trade
bit-reproducibility for an ANN index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embedding import NORM_TOLERANCE, TuningSet
from .encoders import TextEncoder
from .errors import DimMismatchError, MissingRankingError, ParseError, ZeroNormError


@dataclass(frozen=True)
class RetrievalIndex:
    """Searchable documents: unique ids, embeddings, and surface texts."""

    ids: tuple[str, ...]
    vectors: np.ndarray
    texts: tuple[str, ...]

    def __post_init__(self) -> None:
        mat = np.asarray(self.vectors, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] < 1:
            raise ValueError(f"index needs a non-empty (n, dim) matrix, got {mat.shape}")
        if not (len(self.ids) == mat.shape[0] == len(self.texts)):
            raise ValueError("ids, vectors, and texts must align")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("doc ids must be unique")
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms <= NORM_TOLERANCE):
            raise ZeroNormError("index contains a zero-norm document embedding")
        object.__setattr__(self, "vectors", mat)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "texts", tuple(self.texts))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


@dataclass(frozen=True)
class ContaminationConfig:
    hub_text: str
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError(f"contamination count must be >= 0, got {self.count}")


@dataclass(frozen=True)
class QuerySet:
    """Query embeddings with binary relevance judgments."""

    ids: tuple[str, ...]
    vectors: np.ndarray
    qrels: Mapping[str, frozenset[str]]

    def __post_init__(self) -> None:
        mat = np.asarray(self.vectors, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != len(self.ids):
            raise ValueError("query ids and vectors must align")
        object.__setattr__(self, "vectors", mat)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(
            self, "qrels", {str(q): frozenset(docs) for q, docs in self.qrels.items()}
        )
        for qid in self.ids:
            if not self.qrels.get(qid):
                raise ValueError(f"query {qid!r} has no relevant documents")

    def validate_against(self, index: RetrievalIndex) -> None:
        known = set(index.ids)
        for qid, docs in self.qrels.items():
            missing = docs - known
            if missing:
                raise ValueError(f"query {qid!r} references unknown docs {sorted(missing)}")

    @classmethod
    def from_tuning(cls, tuning: TuningSet, qrels: Mapping[str, set[str]]) -> "QuerySet":
        return cls(tuning.ids, tuning.vectors, {q: frozenset(d) for q, d in qrels.items()})


@dataclass(frozen=True)
class MetricCutoffs:
    """Which rank cutoffs to report per metric."""

    ndcg: tuple[int, ...] = (1, 10)
    map: tuple[int, ...] = (1, 10)
    recall: tuple[int, ...] = (1, 1000)
    precision: tuple[int, ...] = (1, 5)
    mrr: tuple[int, ...] = (1, 10)

    def depth(self) -> int:
        return max(self.ndcg + self.map + self.recall + self.precision + self.mrr)


DEFAULT_CUTOFFS = MetricCutoffs()


def contaminate(index: RetrievalIndex, cfg: ContaminationConfig, encoder: TextEncoder) -> RetrievalIndex:
    """Append ``cfg.count`` copies of the hub text as documents ``hub#0..``.

    The copies share one embedding (the text is encoded once) and stay
    non-relevant for every query because qrels are untouched.
    """
    if cfg.count == 0:
        return index
    hub_vec = encoder.encode_text(cfg.hub_text)
    new_ids = index.ids + tuple(f"hub#{i}" for i in range(cfg.count))
    new_vecs = np.vstack([index.vectors, np.tile(hub_vec, (cfg.count, 1))])
    new_texts = index.texts + tuple(cfg.hub_text for _ in range(cfg.count))
    return RetrievalIndex(new_ids, new_vecs, new_texts)


def retrieve_topk(index: RetrievalIndex, query: np.ndarray, k: int) -> list[str]:
    """Exact top-k doc ids by cosine similarity; ties break by doc id ascending."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimMismatchError(f"query shape {q.shape} vs index dim {index.dim}")
    qnorm = float(np.linalg.norm(q))
    if qnorm <= NORM_TOLERANCE:
        raise ZeroNormError("zero-norm query")
    sims = index.vectors @ (q / qnorm)
    sims /= np.linalg.norm(index.vectors, axis=1)
    order = np.lexsort((np.asarray(index.ids), -sims))
    return [index.ids[i] for i in order[: min(k, len(index))]]


def rank_all(index: RetrievalIndex, queries: QuerySet, depth: int) -> dict[str, list[str]]:
    return {
        qid: retrieve_topk(index, queries.vectors[i], depth)
        for i, qid in enumerate(queries.ids)
    }


def _per_query_metrics(ranking: Sequence[str], relevant: frozenset[str], cutoffs: MetricCutoffs) -> dict[str, float]:
    rel_flags = [doc in relevant for doc in ranking]
    out: dict[str, float] = {}
    for c in cutoffs.ndcg:
        dcg = sum(1.0 / math.log2(rank + 2) for rank, hit in enumerate(rel_flags[:c]) if hit)
        ideal = sum(1.0 / math.log2(rank + 2) for rank in range(min(len(relevant), c)))
        out[f"ndcg@{c}"] = dcg / ideal
    for c in cutoffs.map:
        hits = 0
        precision_sum = 0.0
        for rank, hit in enumerate(rel_flags[:c]):
            if hit:
                hits += 1
                precision_sum += hits / (rank + 1)
        out[f"map@{c}"] = precision_sum / min(len(relevant), c)
    for c in cutoffs.recall:
        out[f"recall@{c}"] = sum(rel_flags[:c]) / len(relevant)
    for c in cutoffs.precision:
        out[f"precision@{c}"] = sum(rel_flags[:c]) / c
    first_hit = next((rank + 1 for rank, hit in enumerate(rel_flags) if hit), None)
    for c in cutoffs.mrr:
        out[f"mrr@{c}"] = 1.0 / first_hit if first_hit is not None and first_hit <= c else 0.0
    return out


def compute_ir_metrics(
    rankings: Mapping[str, Sequence[str]],
    qrels: Mapping[str, frozenset[str]],
    cutoffs: MetricCutoffs = DEFAULT_CUTOFFS,
) -> dict[str, float]:
    """Binary-relevance NDCG/MAP/Recall/Precision/MRR averaged over queries.

    Definitions: NDCG uses gain 1 at relevant ranks, discount 1/log2(rank+1),
    normalized by the ideal ordering truncated at the cutoff; MAP truncates
    average precision at the cutoff with denominator min(|relevant|, cutoff);
    MRR is the reciprocal rank of the first relevant hit within the cutoff,
    else zero. Every value lies in [0, 1].
    """
    if not qrels:
        raise ValueError("no queries to evaluate")
    per_query: list[dict[str, float]] = []
    for qid, relevant in qrels.items():
        if qid not in rankings:
            raise MissingRankingError(f"no ranking for query {qid!r}")
        if not relevant:
            raise ValueError(f"query {qid!r} has an empty relevant set")
        per_query.append(_per_query_metrics(rankings[qid], relevant, cutoffs))
    keys = per_query[0].keys()
    averaged = {key: math.fsum(m[key] for m in per_query) / len(per_query) for key in keys}
    for key, value in averaged.items():
        if not 0.0 <= value <= 1.0:
            raise AssertionError(f"metric {key} out of range: {value}")
    return averaged


def run_contamination_experiment(
    index: RetrievalIndex,
    queries: QuerySet,
    hub_text: str,
    counts: Sequence[int],
    encoder: TextEncoder,
    cutoffs: MetricCutoffs = DEFAULT_CUTOFFS,
) -> dict[int, dict[str, float]]:
    """Metrics per contamination level; count 0 reports the clean index."""
    if list(counts) != sorted(counts) or (counts and counts[0] < 0):
        raise ValueError("counts must be sorted ascending and non-negative")
    queries.validate_against(index)
    depth = cutoffs.depth()
    table: dict[int, dict[str, float]] = {}
    for count in counts:
        poisoned = contaminate(index, ContaminationConfig(hub_text, count), encoder)
        rankings = rank_all(poisoned, queries, depth)
        table[int(count)] = compute_ir_metrics(rankings, queries.qrels, cutoffs)
    return table


def load_qrels(path: str | Path) -> dict[str, set[str]]:
    """Read relevance pairs from a TSV of ``query_id<TAB>doc_id`` lines."""
    path = Path(path)
    qrels: dict[str, set[str]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'query_id<TAB>doc_id'")
        qrels.setdefault(parts[0], set()).add(parts[1])
    if not qrels:
        raise ParseError(f"{path}: no relevance pairs")
    return qrels


def load_documents(path: str | Path, encoder: TextEncoder) -> RetrievalIndex:
    """Read documents from a TSV of ``doc_id<TAB>text`` lines and embed them."""
    path = Path(path)
    ids: list[str] = []
    texts: list[str] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        ident, tab, text = stripped.partition("\t")
        if not tab or not text:
            raise ParseError(f"{path}:{lineno}: expected 'doc_id<TAB>text'")
        ids.append(ident)
        texts.append(text)
    if not ids:
        raise ParseError(f"{path}: no documents")
    vectors = np.stack([encoder.encode_text(t) for t in texts])
    return RetrievalIndex(tuple(ids), vectors, tuple(texts))
