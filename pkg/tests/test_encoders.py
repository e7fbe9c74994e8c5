import subprocess
import sys

import numpy as np
import pytest

from hubtext.embedding import cosine
from hubtext.encoders import (
    ToyTextEncoder,
    Vocabulary,
    load_image_fixtures,
    write_image_fixtures,
)
from hubtext.errors import (
    DimMismatchError,
    EmptySequenceError,
    ParseError,
    TokenizationError,
    ZeroNormError,
)

VOCAB = Vocabulary(("alpha", "beta", "gamma", "delta"))


class TestVocabulary:
    def test_roundtrip(self):
        seq = VOCAB.encode("beta alpha delta")
        assert seq == (1, 0, 3)
        assert VOCAB.decode(seq) == "beta alpha delta"

    def test_unknown_token(self):
        with pytest.raises(TokenizationError):
            VOCAB.encode("alpha omega")

    def test_empty_text(self):
        with pytest.raises(EmptySequenceError):
            VOCAB.encode("   ")

    def test_duplicate_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(("a", "b", "a"))

    def test_whitespace_token_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(("a", "b c"))

    def test_from_file(self, tmp_path):
        p = tmp_path / "vocab.txt"
        p.write_text("# comment\nalpha\nbeta\n\ngamma\n")
        v = Vocabulary.from_file(p)
        assert v.tokens == ("alpha", "beta", "gamma")

    def test_validate_sequence_range(self):
        with pytest.raises(TokenizationError):
            VOCAB.validate_sequence((0, 9))


class TestToyEncoder:
    def test_deterministic_same_call(self):
        enc = ToyTextEncoder(VOCAB, dim=16, seed=3)
        a = enc.encode_sequence((0, 1, 2))
        b = enc.encode_sequence((0, 1, 2))
        assert a.tobytes() == b.tobytes()

    def test_deterministic_fresh_instance(self):
        a = ToyTextEncoder(VOCAB, dim=16, seed=3).encode_sequence((2, 1))
        b = ToyTextEncoder(VOCAB, dim=16, seed=3).encode_sequence((2, 1))
        assert a.tobytes() == b.tobytes()

    def test_deterministic_across_processes(self):
        enc = ToyTextEncoder(VOCAB, dim=8, seed=11)
        here = enc.encode_sequence((0, 3, 1)).tobytes().hex()
        code = (
            "from hubtext.encoders import ToyTextEncoder, Vocabulary;"
            "enc = ToyTextEncoder(Vocabulary(('alpha','beta','gamma','delta')), dim=8, seed=11);"
            "print(enc.encode_sequence((0, 3, 1)).tobytes().hex())"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        )
        assert out.stdout.strip() == here

    def test_singleton_equals_token_vector(self):
        enc = ToyTextEncoder(VOCAB, dim=16, seed=0)
        single = enc.encode_sequence((2,))
        np.testing.assert_allclose(single, enc.token_vector(2), atol=1e-12)

    def test_order_sensitive(self):
        enc = ToyTextEncoder(VOCAB, dim=64, seed=0)
        ab = enc.encode_sequence((0, 1))
        ba = enc.encode_sequence((1, 0))
        assert cosine(ab, ba) < 1 - 1e-6

    def test_unit_norm_and_finite(self):
        enc = ToyTextEncoder(VOCAB, dim=12, seed=5)
        rng = np.random.default_rng(0)
        for _ in range(100):
            seq = tuple(rng.integers(0, len(VOCAB), size=rng.integers(1, 9)))
            vec = enc.encode_sequence(seq)
            assert vec.shape == (12,)
            assert np.all(np.isfinite(vec))
            assert abs(np.linalg.norm(vec) - 1.0) <= 1e-9

    def test_empty_sequence(self):
        enc = ToyTextEncoder(VOCAB, dim=8, seed=0)
        with pytest.raises(EmptySequenceError):
            enc.encode_sequence(())

    def test_encode_text(self):
        enc = ToyTextEncoder(VOCAB, dim=8, seed=0)
        np.testing.assert_array_equal(enc.encode_text("alpha beta"), enc.encode_sequence((0, 1)))


class TestImageFixtures:
    def test_roundtrip(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("# two rows\na\t1.0,0.0,0.0,0.5\nb\t0.25,1.0,-1.0,0.125\n")
        t = load_image_fixtures(p)
        assert len(t) == 2
        assert t.dim == 4
        assert t.ids == ("a", "b")
        out = tmp_path / "again.tsv"
        write_image_fixtures(out, t)
        t2 = load_image_fixtures(out)
        assert t2.vectors.tobytes() == t.vectors.tobytes()

    def test_nan_row(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("a\t1.0,nan\n")
        with pytest.raises(ParseError):
            load_image_fixtures(p)

    def test_mismatched_rows(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("a\t1.0,0.0\nb\t1.0,0.0,0.0\n")
        with pytest.raises(DimMismatchError):
            load_image_fixtures(p)

    def test_missing_tab(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("a 1.0,0.0\n")
        with pytest.raises(ParseError):
            load_image_fixtures(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("# nothing\n")
        with pytest.raises(ParseError):
            load_image_fixtures(p)

    def test_garbled_float(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("a\t1.0,zap\n")
        with pytest.raises(ParseError):
            load_image_fixtures(p)

    def test_zero_norm_member(self, tmp_path):
        p = tmp_path / "imgs.tsv"
        p.write_text("a\t1.0,0.0\nb\t0.0,0.0\n")
        with pytest.raises(ZeroNormError):
            load_image_fixtures(p)
