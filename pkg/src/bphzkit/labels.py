"""Label alphabet: base edge labels with exact small- and large-scale degrees.

A base label t has deg(t) as an exact rational and deg_inf(t) as an exact
rational or -inf.  Derived labels t^(k) are pairs (name, k) and are never
stored in the table; their degrees follow deg t^(k) = deg t - |k| and
deg_inf t^(k) = deg_inf t.  The leg label delta (deg = -d) is implicit:
legs carry only their derivative multiindex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .multiindex import MultiIndex, order

NEG_INF = float("-inf")

DELTA = "delta"  # reserved name for the leg label


class LabelError(KeyError):
    pass


@dataclass(frozen=True)
class Label:
    name: str
    deg: Fraction
    deg_inf: Fraction | float = NEG_INF  # exact rational, or -inf sentinel


@dataclass(frozen=True)
class LabelTable:
    """The alphabet: dimension d and the base labels other than delta."""

    dimension: int
    entries: tuple[Label, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        names = [lab.name for lab in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate label names")
        if DELTA in names:
            raise ValueError(f"label name {DELTA!r} is reserved for legs")

    @property
    def d(self) -> int:
        return self.dimension

    def __contains__(self, name: str) -> bool:
        return any(lab.name == name for lab in self.entries)

    def base(self, name: str) -> Label:
        for lab in self.entries:
            if lab.name == name:
                return lab
        raise LabelError(f"unknown label {name!r}")

    def deg(self, name: str, k: MultiIndex = ()) -> Fraction:
        """deg t^(k) = deg t - |k|.  The delta label has deg -d."""
        if name == DELTA:
            return Fraction(-self.dimension) - order(k)
        return self.base(name).deg - order(k)

    def deg_inf(self, name: str, k: MultiIndex = ()) -> Fraction | float:
        """deg_inf t^(k) = deg_inf t; delta-derived labels sit at -inf."""
        if name == DELTA:
            return NEG_INF
        return self.base(name).deg_inf

    def with_label(self, label: Label) -> "LabelTable":
        return LabelTable(self.dimension, self.entries + (label,))


def make_table(dimension: int, specs: dict[str, Fraction | str | tuple]) -> LabelTable:
    """Convenience builder: specs maps name -> deg or (deg, deg_inf)."""
    entries = []
    for name, spec in specs.items():
        if isinstance(spec, tuple):
            deg, deg_inf = spec
            entries.append(Label(name, _frac(deg), _frac_or_inf(deg_inf)))
        else:
            entries.append(Label(name, _frac(spec)))
    return LabelTable(dimension, tuple(entries))


def _frac(x) -> Fraction:
    if isinstance(x, float):
        raise TypeError("degrees must be exact rationals, got float")
    return Fraction(x)


def _frac_or_inf(x) -> Fraction | float:
    if x == NEG_INF or x == "-inf":
        return NEG_INF
    return _frac(x)


def frac_str(x: Fraction | float) -> str:
    """Serialize an exact rational (or -inf) as 'p/q' / 'p' / '-inf'."""
    if x == NEG_INF:
        return "-inf"
    x = Fraction(x)
    return str(x)


def parse_frac(s: str) -> Fraction | float:
    s = s.strip()
    if s == "-inf":
        return NEG_INF
    return Fraction(s)
