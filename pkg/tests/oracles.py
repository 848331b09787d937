"""Independent brute-force references, written without the package's helpers."""

from __future__ import annotations

import itertools

import numpy as np


def minterm_rows(n: int) -> np.ndarray:
    """Row m holds the input bits of minterm m, first variable most significant."""
    idx = np.arange(1 << n)
    return np.array([(idx >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.int64).T


def positive_threshold_tables(n: int, bound: int) -> dict[int, tuple[tuple[int, ...], int]]:
    """Every table realized by weights in [0..bound]^n and T in [1..sum(w)],
    mapped to a realization minimizing sum(w) + T."""
    rows = minterm_rows(n)
    place = (1 << np.arange(1 << n)).astype(object)
    best: dict[int, tuple[tuple[int, ...], int]] = {}
    for w in itertools.product(range(bound + 1), repeat=n):
        sums = rows @ np.array(w, dtype=np.int64)
        for t in range(1, sum(w) + 1):
            bits = int((place * (sums >= t)).sum())
            cost = sum(w) + t
            prev = best.get(bits)
            if prev is None or cost < sum(prev[0]) + prev[1]:
                best[bits] = (w, t)
    return best


def minimal_cost(bits: int, n: int, bound: int = 8) -> int:
    """Smallest sum(w) + T over weights in [0..bound] realizing the table; -1 if none."""
    rows = minterm_rows(n)
    target = np.array([(bits >> m) & 1 for m in range(1 << n)], dtype=bool)
    best = -1
    for w in itertools.product(range(bound + 1), repeat=n):
        sums = rows @ np.array(w, dtype=np.int64)
        on_min = sums[target].min() if target.any() else None
        off_max = sums[~target].max() if (~target).any() else -1
        if on_min is None or on_min <= off_max:
            continue
        t = max(1, off_max + 1)
        cost = sum(w) + t
        if best < 0 or cost < best:
            best = cost
    return best


def monotone_tables(n: int) -> list[int]:
    """All non-constant monotone tables on n variables, by exhaustive filtering."""
    rows = minterm_rows(n)
    out = []
    size = 1 << n
    for bits in range(1, (1 << size) - 1):
        vals = [(bits >> m) & 1 for m in range(size)]
        ok = True
        for a in range(size):
            for b in range(size):
                if vals[a] and not vals[b] and all(rows[a] <= rows[b]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(bits)
    return out
