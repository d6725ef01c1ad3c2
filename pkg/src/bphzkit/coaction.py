"""Subgraph-extraction coaction, vacuum coproduct, antipodes, characters.

All maps are computed on explicit representatives; identities that only hold
modulo the integration-by-parts ideal are checked numerically downstream,
never structurally.
"""

from __future__ import annotations

import math
from fractions import Fraction

from . import multiindex as mi
from .diagram import (
    FeynmanDiagram,
    Subgraph,
    boundary_half_edges,
    connected_divergent_subgraphs,
    contract,
    degree,
)
from .formal import FormalSum, TensorSum, VacuumProduct, vac_product_sum
from .labels import LabelTable
from .multiindex import MultiIndex


class PositiveDegree(ValueError):
    pass


class NotVacuum(ValueError):
    pass


def divergent_families(g: FeynmanDiagram, labels: LabelTable):
    """Subgraphs all of whose connected components are divergent, i.e. all
    unions of pairwise vertex-disjoint connected divergent subgraphs.

    Yields (list of (piece, degree)) including the empty family, in a
    deterministic order.
    """
    divs = connected_divergent_subgraphs(g, labels)

    def rec(start: int, chosen: list, used: frozenset):
        yield list(chosen)
        for j in range(start, len(divs)):
            piece, deg = divs[j]
            if piece.vertices & used:
                continue
            chosen.append((piece, deg))
            yield from rec(j + 1, chosen, used | piece.vertices)
            chosen.pop()

    yield from rec(0, [], frozenset())


def extraction_terms(g: FeynmanDiagram, labels: LabelTable, proper_only: bool = False):
    """All terms of the subgraph-extraction sum on g.

    Yields (subgraph family as one Subgraph, ell, nbar, coeff) where every
    connected component of the extracted part stays divergent after adding
    its decorations nbar + pi(ell); coeff carries the sign, factorial and
    binomial weights.  `proper_only` drops the empty and the full family.
    """
    d = g.dimension
    n_edges = len(g.edges)
    decor = g.decor_dict()
    for family in divergent_families(g, labels):
        ids = frozenset().union(*(p.edge_ids for p, _ in family)) if family else frozenset()
        if proper_only and (not family or len(ids) == n_edges):
            continue
        per_piece = [list(_piece_options(g, piece, deg, decor)) for piece, deg in family]
        for combo in _product(per_piece):
            ell: dict = {}
            nbar: dict[int, MultiIndex] = {}
            coeff = Fraction(1)
            for piece_ell, piece_nbar, piece_coeff in combo:
                ell.update(piece_ell)
                nbar.update(piece_nbar)
                coeff *= piece_coeff
            yield Subgraph(g, ids), ell, nbar, coeff


def _product(lists):
    if not lists:
        yield ()
        return
    head, *tail = lists
    for h in head:
        for t in _product(tail):
            yield (h,) + t


def _piece_options(g: FeynmanDiagram, piece: Subgraph, deg: Fraction, decor: dict):
    """(ell, nbar, coeff) choices for one connected divergent piece.

    The total decoration order |nbar| + |ell| is capped by floor(-deg); nbar
    splits existing node decorations binomially, ell decorates the boundary
    half-edges with the (-1)^{|out ell|}/ell! weight.
    """
    d = g.dimension
    budget = math.floor(-deg)
    boundary = boundary_half_edges(piece)
    decorated = [v for v in sorted(piece.vertices) if v in decor]
    for nbar_tuple in mi.assignments(len(decorated), d, budget):
        coeff_n = Fraction(1)
        ok = True
        for v, k in zip(decorated, nbar_tuple):
            b = mi.binom(decor[v], k)
            if b == 0:
                ok = False
                break
            coeff_n *= b
        if not ok:
            continue
        used = sum(mi.order(k) for k in nbar_tuple)
        nbar = {v: k for v, k in zip(decorated, nbar_tuple) if mi.order(k)}
        for ell_tuple in mi.assignments(len(boundary), d, budget - used):
            coeff = coeff_n
            ell = {}
            for h, k in zip(boundary, ell_tuple):
                if mi.order(k) == 0:
                    continue
                ell[h] = k
                coeff /= mi.factorial(k)
                if h.outgoing:
                    coeff *= Fraction(-1) ** mi.order(k)
            yield ell, nbar, coeff


# -- the coaction on Feynman diagrams -----------------------------------------


def coaction(g: FeynmanDiagram, labels: LabelTable) -> TensorSum:
    """Sum over divergent subgraph extractions: (vacuum part) (x) (quotient)."""
    if g.is_vacuum and not g.is_empty:
        raise NotVacuum("coaction acts on Feynman diagrams; use coproduct_minus")
    if g.is_empty:
        return TensorSum.pure(g)
    out = []
    for sub, ell, nbar, coeff in extraction_terms(g, labels):
        pair = contract(g, sub, ell, nbar)
        if pair is None:
            continue
        vacuum, quotient = pair
        out.append(((VacuumProduct.of(vacuum), quotient), coeff))
    return TensorSum(out)


# -- the coproduct on vacuum diagrams ------------------------------------------


def coproduct_minus(
    g: FeynmanDiagram, labels: LabelTable, project_right: bool = False
) -> TensorSum:
    """Vacuum coproduct with binomial splitting of node decorations.

    Keys are (VacuumProduct, VacuumProduct).  The left factor is always
    projected onto divergent components; `project_right` additionally drops
    terms whose right factor has a component of positive degree (the Hopf
    algebra variant used by the character group).
    """
    if not g.is_vacuum:
        raise NotVacuum("coproduct_minus needs a vacuum diagram")
    if g.is_empty:
        return TensorSum([((VacuumProduct.unit(), VacuumProduct.unit()), 1)])
    comps = g.component_diagrams()
    result = None
    for comp in comps:
        part = _coproduct_connected(comp, labels, project_right)
        result = part if result is None else _tensor_mul(result, part)
    return result


def _coproduct_connected(g: FeynmanDiagram, labels: LabelTable, project_right: bool) -> TensorSum:
    out = []
    for sub, ell, nbar, coeff in extraction_terms(g, labels):
        pair = contract(g, sub, ell, nbar)
        if pair is None:
            continue
        vacuum, quotient = pair
        right = VacuumProduct.of(quotient)
        if project_right and any(degree(c, labels) > 0 for c in right):
            continue
        out.append(((VacuumProduct.of(vacuum), right), coeff))
    return TensorSum(out)


def _tensor_mul(a: TensorSum, b: TensorSum) -> TensorSum:
    out = []
    for (la, ra), ca in a.terms.items():
        for (lb, rb), cb in b.terms.items():
            out.append(((la * lb, ra * rb), ca * cb))
    return TensorSum(out)


def reduced_coproduct(g: FeynmanDiagram, labels: LabelTable) -> TensorSum:
    """The coproduct with the two primitive terms tau (x) 1 and 1 (x) tau
    removed."""
    if not g.is_vacuum or g.is_empty:
        raise NotVacuum("reduced coproduct needs a nonempty vacuum diagram")
    full = coproduct_minus(g, labels)
    tau = VacuumProduct.of(g)
    unit = VacuumProduct.unit()
    return TensorSum(
        ((l, r), c)
        for (l, r), c in full.terms.items()
        if not (l == tau and r == unit) and not (l == unit and r == tau)
    )


# -- antipodes -----------------------------------------------------------------


class _AntipodeCache:
    def __init__(self):
        self.twisted: dict = {}
        self.plain: dict = {}


_caches: dict[tuple, _AntipodeCache] = {}


def _cache_for(labels: LabelTable) -> _AntipodeCache:
    key = (labels.dimension, tuple((l.name, l.deg, l.deg_inf) for l in labels.entries))
    return _caches.setdefault(key, _AntipodeCache())


def twisted_antipode(g: FeynmanDiagram, labels: LabelTable) -> FormalSum:
    """The map into the unprojected vacuum algebra solving
    (product)(twisted (x) id)(coproduct) = 0 on divergent diagrams.

    Input: connected vacuum diagram with degree <= 0 (PositiveDegree
    otherwise).  Returns a FormalSum over VacuumProducts.
    """
    if not g.is_vacuum:
        raise NotVacuum("twisted antipode acts on vacuum diagrams")
    if g.is_empty:
        return FormalSum.lift(VacuumProduct.unit())
    if len(g.components) != 1:
        raise NotVacuum("twisted antipode input must be connected (extend multiplicatively)")
    if degree(g, labels) > 0:
        raise PositiveDegree(f"twisted antipode needs degree <= 0, got {degree(g, labels)}")
    cache = _cache_for(labels).twisted
    key = g.canonical_key
    if key in cache:
        return cache[key]
    result = FormalSum.lift(VacuumProduct.of(g), -1)
    for sub, ell, nbar, coeff in extraction_terms(g, labels, proper_only=True):
        pair = contract(g, sub, ell, nbar)
        if pair is None:
            continue
        vacuum, quotient = pair
        left = twisted_antipode_product(VacuumProduct.of(vacuum), labels)
        term = vac_product_sum(left, FormalSum.lift(VacuumProduct.of(quotient)))
        result = result - coeff * term
    cache[key] = result
    return result


def twisted_antipode_product(vp: VacuumProduct, labels: LabelTable) -> FormalSum:
    """Multiplicative extension of the twisted antipode to products."""
    out = FormalSum.lift(VacuumProduct.unit())
    for comp in vp:
        out = vac_product_sum(out, twisted_antipode(comp, labels))
    return out


def antipode(g: FeynmanDiagram, labels: LabelTable) -> FormalSum:
    """The Hopf antipode of the divergent vacuum algebra (both coproduct
    factors projected to divergent components).  Positive-degree input maps
    to zero."""
    if not g.is_vacuum:
        raise NotVacuum("antipode acts on vacuum diagrams")
    if g.is_empty:
        return FormalSum.lift(VacuumProduct.unit())
    if len(g.components) != 1:
        raise NotVacuum("antipode input must be connected (extend multiplicatively)")
    if degree(g, labels) > 0:
        return FormalSum.zero()
    cache = _cache_for(labels).plain
    key = g.canonical_key
    if key in cache:
        return cache[key]
    result = FormalSum.lift(VacuumProduct.of(g), -1)
    for sub, ell, nbar, coeff in extraction_terms(g, labels, proper_only=True):
        pair = contract(g, sub, ell, nbar)
        if pair is None:
            continue
        vacuum, quotient = pair
        right = VacuumProduct.of(quotient)
        if any(degree(c, labels) > 0 for c in right):
            continue
        left = antipode_product(VacuumProduct.of(vacuum), labels)
        result = result - coeff * vac_product_sum(left, FormalSum.lift(right))
    cache[key] = result
    return result


def antipode_product(vp: VacuumProduct, labels: LabelTable) -> FormalSum:
    out = FormalSum.lift(VacuumProduct.unit())
    for comp in vp:
        part = antipode(comp, labels)
        if part.is_zero:
            return FormalSum.zero()
        out = vac_product_sum(out, part)
    return out


# -- characters ----------------------------------------------------------------


class Character:
    """A multiplicative functional on vacuum diagrams: 1 on the empty
    diagram, a product over connected components otherwise."""

    def __init__(self, fn, name: str = "char"):
        self._fn = fn
        self._cache: dict = {}
        self.name = name

    def on_connected(self, g: FeynmanDiagram):
        key = g.canonical_key
        if key not in self._cache:
            self._cache[key] = self._fn(g)
        return self._cache[key]

    def __call__(self, vp: VacuumProduct):
        val = Fraction(1)
        for comp in vp:
            val = val * self.on_connected(comp)
        return val

    def on_formal(self, s: FormalSum):
        total = Fraction(0)
        for vp, c in s:
            total = total + c * self(vp)
        return total


def counit() -> Character:
    """1 on the empty diagram, 0 on every nonempty connected one."""
    return Character(lambda g: Fraction(0), name="counit")


def char_product(f: Character, g: Character, labels: LabelTable) -> Character:
    """Convolution product (f o g)(tau) = (f (x) g) coproduct(tau) in the
    divergent Hopf algebra."""

    def fn(tau: FeynmanDiagram):
        total = None
        for (left, right), c in coproduct_minus(tau, labels, project_right=True).terms.items():
            term = c * f(left) * g(right)
            total = term if total is None else total + term
        return total if total is not None else Fraction(0)

    return Character(fn, name=f"({f.name} o {g.name})")


def char_inverse(g: Character, labels: LabelTable) -> Character:
    """Group inverse via the antipode: g^{-1} = g o A."""

    def fn(tau: FeynmanDiagram):
        return g.on_formal(antipode(tau, labels))

    return Character(fn, name=f"{g.name}^-1")


def renorm_map(g: Character, gamma: FeynmanDiagram, labels: LabelTable) -> FormalSum:
    """M^g gamma = (g (x) id) coaction(gamma), a FormalSum of diagrams.

    Numeric character values are converted exactly to rationals (floats are
    binary rationals) so the sum stays in exact arithmetic.
    """
    out = []
    for (vp, quot), c in coaction(gamma, labels).terms.items():
        out.append((quot, c * Fraction(g(vp))))
    return FormalSum(out)
