"""Exact arithmetic over double-precision weights.

Every finite double is an integer times a power of two, so a whole weight
vector can be rescaled onto a shared power-of-two denominator and summed
with Python integers without rounding. Solvers compare candidate scores in
this representation; reported scores are converted back with a single
correctly rounded division, which agrees with ``math.fsum``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable


def exact_weights(weights: Iterable[float]) -> tuple[list[int], int]:
    """Return ``(numerators, denominator)`` with ``w[i] == num[i] / den`` exactly."""
    ratios = []
    for w in weights:
        w = float(w)
        if not math.isfinite(w):
            raise ValueError(f"weight {w!r} is not finite")
        ratios.append(w.as_integer_ratio())
    den = max((d for _, d in ratios), default=1)
    return [n * (den // d) for n, d in ratios], den


def to_float(num: int, den: int) -> float:
    return num / den


def mask_to_tuple(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def tuple_to_mask(ids: Iterable[int]) -> int:
    mask = 0
    for i in ids:
        mask |= 1 << i
    return mask


def max_subarray(ints: Iterable[int]) -> tuple[int, int, int]:
    """``(sum, start, end_inclusive)`` of the max-sum range; ties go to the earliest start, then end."""
    best = None
    cur = 0
    start = 0
    for j, w in enumerate(ints):
        if j == 0 or cur < 0:
            cur, start = w, j
        else:
            cur += w
        if best is None or cur > best[0] or (cur == best[0] and start < best[1]):
            best = (cur, start, j)
    if best is None:
        raise ValueError("empty sequence")
    return best
