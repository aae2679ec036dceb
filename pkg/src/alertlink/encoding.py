"""Pluggable text encoder: ticket summaries and event templates to R^k.

The default encoder is a signed feature-hash bag of tokens: portable,
deterministic, training-free. Real pretrained-model vectors can be
supplied through an external table keyed by sha256 of the exact text;
lookups that miss fall back to the hash encoder so coverage gaps never
fail the pipeline.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .hashing import fnv1a64_str

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
NUM_TOKEN = "<num>"


class EncoderError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, mask digit-only tokens."""
    tokens = [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]
    return [NUM_TOKEN if tok.isdigit() else tok for tok in tokens]


@dataclass(frozen=True)
class EncoderSpec:
    kind: str = "feature_hash"
    dim: int = 128
    seed: int = 0
    path: str | None = None

    def validate(self) -> None:
        if self.kind not in ("feature_hash", "external_file"):
            raise EncoderError(f"unknown encoder kind {self.kind!r}")
        if self.dim < 1:
            raise EncoderError(f"encoder dim must be >= 1: {self.dim}")
        if self.kind == "external_file" and not self.path:
            raise EncoderError("external_file encoder needs a path")


class TextEncoder:
    """Stateless after construction; safe for concurrent use."""

    def __init__(self, spec: EncoderSpec):
        spec.validate()
        self.spec = spec
        self._external: dict[str, np.ndarray] = {}
        self._cache: dict[str, np.ndarray] = {}
        if spec.kind == "external_file":
            self._external = _load_external_table(spec.path, spec.dim)

    def encode(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vec = self._encode_uncached(text)
        self._cache[text] = vec
        return vec

    def _encode_uncached(self, text: str) -> np.ndarray:
        if self._external:
            key = hashlib.sha256(text.encode("utf-8")).hexdigest()
            hit = self._external.get(key)
            if hit is not None:
                return hit
        return self._feature_hash(text)

    def _feature_hash(self, text: str) -> np.ndarray:
        vec = np.zeros(self.spec.dim, dtype=np.float64)
        for token in tokenize(text):
            h = fnv1a64_str(token, self.spec.seed)
            bucket = h % self.spec.dim
            sign = -1.0 if (h >> 63) & 1 else 1.0
            vec[bucket] += sign
        norm = math.sqrt(float(np.dot(vec, vec)))
        if norm > 0.0:
            vec /= norm
        vec.flags.writeable = False
        return vec


def _load_external_table(path: str, dim: int) -> dict[str, np.ndarray]:
    table: dict[str, np.ndarray] = {}
    try:
        with open(path, encoding="utf-8") as stream:
            lines = stream.read().splitlines()
    except OSError as exc:
        raise EncoderError(f"cannot read embedding file: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise EncoderError(f"{path}:{lineno}: expected <sha256>TAB<values>")
        key, values = parts
        if len(key) != 64:
            raise EncoderError(f"{path}:{lineno}: key is not a sha256 digest")
        try:
            vec = np.array([float(v) for v in values.split(",")], dtype=np.float64)
        except ValueError as exc:
            raise EncoderError(f"{path}:{lineno}: bad vector component") from exc
        if vec.shape != (dim,):
            raise EncoderError(
                f"{path}:{lineno}: vector has {vec.shape[0]} components, need {dim}"
            )
        vec.flags.writeable = False
        table[key] = vec
    return table


def build_encoder(spec: EncoderSpec) -> TextEncoder:
    return TextEncoder(spec)


def encode_text(text: str, spec: EncoderSpec) -> np.ndarray:
    """One-shot convenience wrapper around TextEncoder."""
    return TextEncoder(spec).encode(text)
