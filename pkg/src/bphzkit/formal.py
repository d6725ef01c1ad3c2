"""Exact-rational linear combinations of hashable, orderable basis elements.

FormalSum holds diagram sums; TensorSum holds (vacuum product (x) diagram)
sums.  Zero coefficients are dropped eagerly, iteration is sorted, and all
arithmetic stays in Fraction.
"""

from __future__ import annotations

from fractions import Fraction
from functools import total_ordering

from .diagram import FeynmanDiagram


class FormalSum:
    """Finite map basis element -> nonzero Fraction."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        acc: dict = {}
        items = terms.items() if isinstance(terms, dict) else terms
        for key, coeff in items:
            coeff = Fraction(coeff)
            if coeff == 0:
                continue
            new = acc.get(key, Fraction(0)) + coeff
            if new == 0:
                acc.pop(key, None)
            else:
                acc[key] = new
        self.terms = acc

    @classmethod
    def lift(cls, key, coeff=1) -> "FormalSum":
        return cls([(key, Fraction(coeff))])

    @classmethod
    def zero(cls) -> "FormalSum":
        return cls()

    def __iter__(self):
        return iter(sorted(self.terms.items(), key=lambda kv: _sort_key(kv[0])))

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __getitem__(self, key) -> Fraction:
        return self.terms.get(key, Fraction(0))

    def __add__(self, other: "FormalSum") -> "FormalSum":
        out = dict(self.terms)
        for key, c in other.terms.items():
            new = out.get(key, Fraction(0)) + c
            if new == 0:
                out.pop(key, None)
            else:
                out[key] = new
        return _wrap(type(self), out)

    def __sub__(self, other: "FormalSum") -> "FormalSum":
        return self + (-1) * other

    def __neg__(self) -> "FormalSum":
        return (-1) * self

    def __rmul__(self, scalar) -> "FormalSum":
        scalar = Fraction(scalar)
        if scalar == 0:
            return type(self)()
        return _wrap(type(self), {k: scalar * c for k, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, FormalSum) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def map_keys(self, fn) -> "FormalSum":
        return type(self)((fn(k), c) for k, c in self.terms.items())

    def apply(self, fn) -> "FormalSum":
        """Linearly extend fn: key -> FormalSum."""
        out = type(self)()
        for k, c in self:
            out = out + c * fn(k)
        return out

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({c})*{k!r}" for k, c in self)


def _wrap(cls, terms: dict):
    s = cls.__new__(cls)
    s.terms = terms
    return s


def _sort_key(key):
    if isinstance(key, FeynmanDiagram):
        return key.canonical_key
    if isinstance(key, VacuumProduct):
        return key.sort_key
    if isinstance(key, tuple):
        return tuple(_sort_key(k) for k in key)
    return key


@total_ordering
class VacuumProduct:
    """A commutative product of connected vacuum diagrams (the monomials of
    the vacuum algebra); the empty product is the unit."""

    __slots__ = ("factors", "sort_key")

    def __init__(self, factors=()):
        factors = tuple(sorted(factors, key=lambda g: g.canonical_key))
        for g in factors:
            if not g.is_vacuum or g.is_empty:
                raise ValueError(f"not a nonempty connected vacuum diagram: {g!r}")
            if len(g.components) != 1:
                raise ValueError("VacuumProduct factors must be connected")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "sort_key", tuple(g.canonical_key for g in factors))

    @classmethod
    def unit(cls) -> "VacuumProduct":
        return cls()

    @classmethod
    def of(cls, g: FeynmanDiagram) -> "VacuumProduct":
        """Split a (possibly disconnected) vacuum diagram into its factors."""
        if g.is_empty:
            return cls()
        return cls(tuple(g.component_diagrams()))

    @property
    def is_unit(self) -> bool:
        return not self.factors

    def __mul__(self, other: "VacuumProduct") -> "VacuumProduct":
        return VacuumProduct(self.factors + other.factors)

    def __iter__(self):
        return iter(self.factors)

    def __len__(self):
        return len(self.factors)

    def __eq__(self, other):
        return isinstance(other, VacuumProduct) and self.sort_key == other.sort_key

    def __lt__(self, other):
        return self.sort_key < other.sort_key

    def __hash__(self):
        return hash(self.sort_key)

    def __setattr__(self, *a):
        raise AttributeError("VacuumProduct is immutable")

    def __repr__(self):
        if not self.factors:
            return "1"
        return " * ".join(repr(g) for g in self.factors)


class TensorSum(FormalSum):
    """FormalSum keyed by (VacuumProduct, right factor) pairs."""

    @classmethod
    def pure(cls, right, coeff=1) -> "TensorSum":
        return cls([((VacuumProduct.unit(), right), Fraction(coeff))])

    def left_multiply(self, vp: VacuumProduct) -> "TensorSum":
        return self.map_keys(lambda key: (vp * key[0], key[1]))


def vac_product_sum(a: FormalSum, b: FormalSum) -> FormalSum:
    """Product of two FormalSums over VacuumProducts."""
    out: dict = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            key = ka * kb
            new = out.get(key, Fraction(0)) + ca * cb
            if new == 0:
                out.pop(key, None)
            else:
                out[key] = new
    return _wrap(FormalSum, out)
