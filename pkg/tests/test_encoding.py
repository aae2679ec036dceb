import hashlib
import math
import random

import numpy as np
import pytest

from alertlink.encoding import (
    EncoderError,
    EncoderSpec,
    TextEncoder,
    build_encoder,
    encode_text,
    tokenize,
)


class TestTokenize:
    def test_basic(self):
        assert tokenize("Unable to provision clusters.") == [
            "unable",
            "to",
            "provision",
            "clusters",
        ]

    def test_digit_masking(self):
        assert tokenize("Failures exceed 300 times") == [
            "failures",
            "exceed",
            "<num>",
            "times",
        ]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_runs(self):
        assert tokenize("PUT <80% (rate)") == ["put", "<num>", "rate"]


class TestFeatureHash:
    def spec(self, dim=16, seed=3):
        return EncoderSpec(kind="feature_hash", dim=dim, seed=seed)

    def test_empty_text_is_zero_vector(self):
        vec = encode_text("", self.spec())
        assert not vec.any()

    def test_determinism(self):
        a = encode_text("Unable to start server", self.spec())
        b = encode_text("Unable to start server", self.spec())
        assert np.array_equal(a, b)

    def test_unit_norm(self):
        rng = random.Random(0)
        words = ["alpha", "beta", "gamma", "delta", "42"]
        for _ in range(50):
            text = " ".join(rng.choice(words) for _ in range(rng.randint(1, 8)))
            vec = encode_text(text, self.spec())
            if vec.any():
                norm = math.sqrt(sum(float(x) * float(x) for x in vec))
                assert norm == pytest.approx(1.0, abs=1e-9)

    def test_token_order_invariance(self):
        a = encode_text("disk volume attach failed", self.spec())
        b = encode_text("failed attach volume disk", self.spec())
        assert np.array_equal(a, b)

    def test_seed_changes_vector(self):
        a = encode_text("disk failed", EncoderSpec(dim=16, seed=1))
        b = encode_text("disk failed", EncoderSpec(dim=16, seed=2))
        assert not np.array_equal(a, b)

    def test_dim_must_be_positive(self):
        with pytest.raises(EncoderError):
            EncoderSpec(dim=0).validate()


class TestExternalFile:
    def _write_table(self, path, entries, dim):
        lines = []
        for text, vec in entries:
            key = hashlib.sha256(text.encode()).hexdigest()
            lines.append(key + "\t" + ",".join(str(v) for v in vec))
        path.write_text("\n".join(lines) + "\n")

    def test_exact_match_lookup(self, tmp_path):
        path = tmp_path / "vecs.tsv"
        self._write_table(path, [("hello world", [1.0, 2.0, 3.0])], dim=3)
        enc = build_encoder(EncoderSpec(kind="external_file", dim=3, path=str(path)))
        assert np.array_equal(enc.encode("hello world"), [1.0, 2.0, 3.0])

    def test_miss_falls_back_to_hash(self, tmp_path):
        path = tmp_path / "vecs.tsv"
        self._write_table(path, [("hello world", [1.0, 0.0, 0.0])], dim=3)
        enc = build_encoder(EncoderSpec(kind="external_file", dim=3, seed=5, path=str(path)))
        fallback = encode_text("something else", EncoderSpec(dim=3, seed=5))
        assert np.array_equal(enc.encode("something else"), fallback)

    def test_wrong_dim_rejected(self, tmp_path):
        path = tmp_path / "vecs.tsv"
        self._write_table(path, [("hello", [1.0, 2.0])], dim=2)
        with pytest.raises(EncoderError, match="components"):
            build_encoder(EncoderSpec(kind="external_file", dim=3, path=str(path)))

    def test_corrupt_line_rejected(self, tmp_path):
        path = tmp_path / "vecs.tsv"
        path.write_text("nonsense line\n")
        with pytest.raises(EncoderError):
            build_encoder(EncoderSpec(kind="external_file", dim=3, path=str(path)))

    def test_missing_file(self, tmp_path):
        with pytest.raises(EncoderError, match="cannot read"):
            build_encoder(
                EncoderSpec(kind="external_file", dim=3, path=str(tmp_path / "x.tsv"))
            )

    def test_path_required(self):
        with pytest.raises(EncoderError, match="path"):
            EncoderSpec(kind="external_file", dim=3).validate()
