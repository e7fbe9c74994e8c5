"""Encoder abstraction, the built-in deterministic toy encoder, and fixture I/O.

A text encoder maps token sequences (or raw texts) into a fixed-dimension
embedding space. Two implementations exist: the in-process toy encoder below,
which is cheap, seeded, and order-sensitive, and the remote client in
:mod:`hubtext.remote`, which drives a real model behind the wire protocol.
Image "encoding" at desk scale is reading pre-computed vectors from a fixture
file; the method never needs pixels, only image embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .embedding import TuningSet, normalize
from .errors import (
    DimMismatchError,
    EmptySequenceError,
    ParseError,
    TokenizationError,
)

TokenSeq = tuple[int, ...]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, duplicate-free token inventory; index and token are bijective."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("vocabulary must contain at least one token")
        seen: dict[str, int] = {}
        for idx, tok in enumerate(self.tokens):
            if not tok or tok.split() != [tok]:
                raise ValueError(f"token {tok!r} is empty or contains whitespace")
            if tok in seen:
                raise ValueError(f"duplicate token {tok!r} at indices {seen[tok]} and {idx}")
            seen[tok] = idx
        object.__setattr__(self, "_index", seen)

    def __len__(self) -> int:
        return len(self.tokens)

    def token_id(self, token: str) -> int:
        try:
            return self._index[token]  # type: ignore[attr-defined]
        except KeyError:
            raise TokenizationError(f"token {token!r} not in vocabulary") from None

    def encode(self, text: str) -> TokenSeq:
        """Whitespace-tokenize ``text`` into token ids (strict)."""
        parts = text.split()
        if not parts:
            raise EmptySequenceError("text has no tokens")
        return tuple(self.token_id(p) for p in parts)

    def decode(self, seq: Sequence[int]) -> str:
        return " ".join(self.tokens[i] for i in seq)

    def validate_sequence(self, seq: Sequence[int]) -> TokenSeq:
        ids = tuple(int(i) for i in seq)
        if not ids:
            raise EmptySequenceError("token sequence is empty")
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise TokenizationError(f"token id {i} out of range for |V|={len(self.tokens)}")
        return ids

    @classmethod
    def from_file(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        tokens = [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]
        return cls(tuple(tokens))


class TextEncoder(Protocol):
    """What the search and evaluators need from any text encoder."""

    vocab: Vocabulary

    @property
    def dim(self) -> int: ...

    def encode_sequence(self, seq: Sequence[int]) -> np.ndarray: ...

    def encode_text(self, text: str) -> np.ndarray: ...

    def describe(self) -> dict: ...


class ToyTextEncoder:
    """Deterministic stand-in for a real text tower.

    Every token id maps to a fixed pseudo-random unit vector drawn from a
    splittable seed, and a sequence embeds as the L2-normalized sum of its
    token vectors under position-dependent sinusoidal weights, so reordering
    tokens changes the embedding. Fully determined by (sequence, dim, seed),
    including across process restarts. The centroid of any cluster of such
    embeddings is itself approachable by some token sequence, which is what
    makes the toy space exhibit genuine hub structure.
    """

    kind = "toy-hash"

    def __init__(self, vocab: Vocabulary, dim: int = 32, seed: int = 0) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if seed < 0:
            raise ValueError(f"seed must be >= 0, got {seed}")
        self.vocab = vocab
        self._dim = int(dim)
        self._seed = int(seed)
        self._token_vectors: dict[int, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def seed(self) -> int:
        return self._seed

    def token_vector(self, token_id: int) -> np.ndarray:
        """Fixed unit vector for one token id."""
        vec = self._token_vectors.get(token_id)
        if vec is None:
            rng = np.random.default_rng(np.random.SeedSequence((self._seed, token_id)))
            raw = rng.standard_normal(self._dim)
            vec = raw / np.linalg.norm(raw)
            vec.setflags(write=False)
            self._token_vectors[token_id] = vec
        return vec

    @staticmethod
    def position_weight(position: int) -> float:
        # strictly positive and position-distinct, so singletons stay on the
        # token vector and reorderings move the sum
        return 1.0 + 0.5 * float(np.sin(1.3 * (position + 1)))

    def encode_sequence(self, seq: Sequence[int]) -> np.ndarray:
        ids = self.vocab.validate_sequence(seq)
        acc = np.zeros(self._dim, dtype=np.float64)
        for pos, token_id in enumerate(ids):
            acc += self.position_weight(pos) * self.token_vector(token_id)
        return normalize(acc)

    def encode_text(self, text: str) -> np.ndarray:
        return self.encode_sequence(self.vocab.encode(text))

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self.encode_text(t) for t in texts])

    def warm_token_cache(self) -> None:
        for token_id in range(len(self.vocab)):
            self.token_vector(token_id)

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self._dim, "seed": self._seed, "vocab_size": len(self.vocab)}


def load_image_fixtures(path: str | Path) -> TuningSet:
    """Read an image-embedding fixture file into a :class:`TuningSet`.

    Format: UTF-8 text, one record per line, ``<id>\\t<v1>,<v2>,...,<vD>``
    with decimal floats. Lines starting with ``#`` and blank lines are
    ignored.
    """
    path = Path(path)
    rows: list[tuple[str, list[float]]] = []
    dim: int | None = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected '<id>\\t<values>'")
        ident, _, payload = stripped.partition("\t")
        try:
            values = [float(tok) for tok in payload.split(",")]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if not values:
            raise ParseError(f"{path}:{lineno}: empty vector")
        if not all(np.isfinite(values)):
            raise ParseError(f"{path}:{lineno}: non-finite value")
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise DimMismatchError(f"{path}:{lineno}: row has {len(values)} values, expected {dim}")
        rows.append((ident, values))
    if not rows:
        raise ParseError(f"{path}: no records")
    return TuningSet.from_rows(rows)


def write_image_fixtures(path: str | Path, tuning: TuningSet, header: str | None = None) -> None:
    """Write a :class:`TuningSet` in the fixture format read back above."""
    lines = []
    if header:
        lines.append(f"# {header}")
    for ident, row in zip(tuning.ids, tuning.vectors):
        lines.append(ident + "\t" + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
