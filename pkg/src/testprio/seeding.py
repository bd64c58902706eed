"""Deterministic 64-bit seed derivation.

Every stochastic component takes an explicit seed derived from a base seed
and a context path (ranker name, history index, cycle id, ...) through a
SplitMix64 finalizer.  Adding new contexts never perturbs the seeds of
existing ones, and string parts are hashed with FNV-1a so the mixing is
stable across processes and platforms.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def mix_seed(base: int, *parts: int | str) -> int:
    """Fold each part into the running state with one SplitMix64 step."""
    x = base & _MASK64
    for part in parts:
        value = fnv1a64(part) if isinstance(part, str) else part & _MASK64
        x = splitmix64(x ^ value)
    return x
