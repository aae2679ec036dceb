"""Stable 64-bit hashing used for event identity and feature hashing.

FNV-1a is used everywhere a hash must be reproducible across runs,
platforms and Python versions (the built-in ``hash`` is salted per
process and must never leak into persisted artifacts).
"""

from __future__ import annotations

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """FNV-1a over ``data``, with ``seed`` folded in ahead of the payload."""
    h = _FNV_OFFSET
    if seed:
        for b in (seed & _MASK64).to_bytes(8, "little"):
            h = ((h ^ b) * _FNV_PRIME) & _MASK64
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def fnv1a64_str(text: str, seed: int = 0) -> int:
    return fnv1a64(text.encode("utf-8"), seed)


def hex16(value: int) -> str:
    """Render a 64-bit hash as 16 lowercase hex characters."""
    return f"{value & _MASK64:016x}"
