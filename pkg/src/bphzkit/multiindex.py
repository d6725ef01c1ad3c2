"""Multiindices in N^d as plain int tuples, plus the factorial/binomial conventions."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

MultiIndex = tuple[int, ...]


def zero(d: int) -> MultiIndex:
    return (0,) * d


def unit(d: int, i: int) -> MultiIndex:
    """The i-th canonical multiindex delta_i (0-based direction)."""
    k = [0] * d
    k[i] = 1
    return tuple(k)


def order(k: MultiIndex) -> int:
    """|k| = sum of components."""
    return sum(k)


def add(k: MultiIndex, l: MultiIndex) -> MultiIndex:
    return tuple(a + b for a, b in zip(k, l, strict=True))


def sub(k: MultiIndex, l: MultiIndex) -> MultiIndex:
    """Componentwise difference; only defined when l <= k componentwise."""
    if not leq(l, k):
        raise ValueError(f"multiindex subtraction {k} - {l} not defined")
    return tuple(a - b for a, b in zip(k, l, strict=True))


def leq(k: MultiIndex, l: MultiIndex) -> bool:
    return all(a <= b for a, b in zip(k, l, strict=True))


def factorial(k: MultiIndex) -> int:
    out = 1
    for a in k:
        out *= math.factorial(a)
    return out


def binom(k: MultiIndex, l: MultiIndex) -> int:
    """Product of componentwise binomial coefficients; 0 unless l <= k."""
    if not leq(l, k):
        return 0
    out = 1
    for a, b in zip(k, l, strict=True):
        out *= math.comb(a, b)
    return out


def binom_frac(k: MultiIndex, l: MultiIndex) -> Fraction:
    return Fraction(binom(k, l))


def up_to_order(d: int, n: int):
    """All multiindices in N^d with |k| <= n, in lexicographic order."""
    for total in range(n + 1):
        yield from with_order(d, total)


def with_order(d: int, total: int):
    """All multiindices in N^d with |k| = total, lexicographically."""
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in with_order(d - 1, total - first):
            yield (first,) + rest


def assignments(slots: int, d: int, budget: int):
    """All tuples of `slots` multiindices in N^d with total order <= budget.

    Enumeration order is deterministic (lexicographic in the flattened tuple
    of component totals).
    """
    if slots == 0:
        yield ()
        return
    for k in up_to_order(d, budget):
        for rest in assignments(slots - 1, d, budget - order(k)):
            yield (k,) + rest


def monomial(x, k: MultiIndex):
    """x^k for a point x (sequence of floats) or batched numpy array (..., d)."""
    import numpy as np

    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[:-1], dtype=float)
    for i, a in enumerate(k):
        if a:
            out = out * x[..., i] ** a
    return out


def falling(k: MultiIndex, l: MultiIndex) -> int:
    """Coefficient k!/(k-l)! of the derivative D^l x^k (0 when l > k)."""
    if not leq(l, k):
        return 0
    out = 1
    for a, b in zip(k, l, strict=True):
        out *= math.perm(a, b)
    return out


def iter_splits(k: MultiIndex):
    """All (l, k - l) with l <= k, i.e. the binomial splittings of k."""
    ranges = [range(a + 1) for a in k]
    for l in itertools.product(*ranges):
        yield tuple(l), sub(k, tuple(l))
