"""Deterministic, stateless pseudo-randomness.

Every stochastic choice in a run is derived by hashing the run seed together
with a purpose tag and the local coordinates of the draw (clock, agent id,
draw index).  There is no mutable RNG state anywhere, which is what makes
snapshot/restore and replay byte-exact: the same (seed, tag, args) always
yields the same draw, regardless of process, platform, or how many other
draws happened in between.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

T = TypeVar("T")


def _digest(parts: tuple) -> int:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def unit_float(*parts) -> float:
    """A float in [0, 1) determined entirely by ``parts``."""
    return _digest(parts) / 2**64


def randint(lo: int, hi: int, *parts) -> int:
    """An integer in [lo, hi] determined entirely by ``parts``."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    return lo + _digest(parts) % (hi - lo + 1)


def choice(seq: Sequence[T], *parts) -> T:
    """An element of ``seq`` determined entirely by ``parts``."""
    if not seq:
        raise ValueError("choice from empty sequence")
    return seq[_digest(parts) % len(seq)]
