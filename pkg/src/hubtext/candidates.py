"""Initial hub-text candidates: inversion-model hypothesis files or a corpus fallback.

Decoding a hub embedding back into text is an external concern (a trained
inversion model, run elsewhere); this module ingests its hypothesis files and
picks the candidate that scores best against the tuning set. When no
hypothesis file is available, a plain text corpus serves as the fallback pool
so the pipeline still runs end to end.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .embedding import SimilarityConfig, TuningSet, mean_similarity
from .encoders import TextEncoder, TokenSeq, Vocabulary
from .errors import EmptyFileError, TokenizationError

log = logging.getLogger(__name__)


class Provenance(enum.Enum):
    INVERSION_FILE = "inversion_file"
    CORPUS_FALLBACK = "corpus_fallback"


@dataclass(frozen=True)
class Hypothesis:
    text: str
    token_ids: TokenSeq


@dataclass(frozen=True)
class HypothesisSet:
    hypotheses: tuple[Hypothesis, ...]
    provenance: Provenance

    def __post_init__(self) -> None:
        if not self.hypotheses:
            raise EmptyFileError("hypothesis set is empty")

    def __len__(self) -> int:
        return len(self.hypotheses)


def load_hypotheses(path: str | Path, vocab: Vocabulary, strict: bool = True) -> HypothesisSet:
    """Read one candidate text per line and tokenize under ``vocab``.

    Unknown tokens raise :class:`TokenizationError` in strict mode (the
    default); in lenient mode the offending hypothesis is dropped and logged.
    Blank lines are skipped either way.
    """
    path = Path(path)
    kept: list[Hypothesis] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            kept.append(Hypothesis(text, vocab.encode(text)))
        except TokenizationError as exc:
            if strict:
                raise TokenizationError(f"{path}:{lineno}: {exc}") from exc
            log.warning("dropping hypothesis %s:%d: %s", path, lineno, exc)
    if not kept:
        raise EmptyFileError(f"{path}: no usable hypotheses")
    return HypothesisSet(tuple(kept), Provenance.INVERSION_FILE)


def select_best_hypothesis(
    hypotheses: HypothesisSet,
    encoder: TextEncoder,
    tuning: TuningSet,
    cfg: SimilarityConfig,
) -> tuple[Hypothesis, float]:
    """Return the hypothesis maximizing the tuning objective, with its score.

    Ties break toward the earliest entry, making selection deterministic.
    """
    best: Hypothesis | None = None
    best_score = float("-inf")
    for hyp in hypotheses.hypotheses:
        score = mean_similarity(encoder.encode_sequence(hyp.token_ids), tuning, cfg)
        if score > best_score:
            best, best_score = hyp, score
    assert best is not None
    return best, best_score


def corpus_fallback_init(
    corpus: Sequence[str],
    encoder: TextEncoder,
    tuning: TuningSet,
    cfg: SimilarityConfig,
    top_n: int = 1,
) -> HypothesisSet:
    """Rank corpus texts by the tuning objective and keep the best ``top_n``.

    ``top_n`` larger than the corpus is clamped. Order within the result is by
    score descending, original corpus order breaking ties.
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    scored: list[tuple[float, int, Hypothesis]] = []
    for idx, text in enumerate(corpus):
        ids = encoder.vocab.encode(text)
        score = mean_similarity(encoder.encode_sequence(ids), tuning, cfg)
        scored.append((score, idx, Hypothesis(text, ids)))
    scored.sort(key=lambda item: (-item[0], item[1]))
    kept = tuple(hyp for _, _, hyp in scored[: min(top_n, len(scored))])
    return HypothesisSet(kept, Provenance.CORPUS_FALLBACK)
