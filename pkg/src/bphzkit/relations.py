"""Generators of the relation ideals, leg surgery, and diagram convolution.

The integration-by-parts combinations span the ideal the canonical valuation
kills; the vacuum variants additionally move node decorations and the leg.
All functions return FormalSums of diagrams so residuals can be checked
numerically downstream.
"""

from __future__ import annotations

from fractions import Fraction

from . import multiindex as mi
from .diagram import (
    DiagramError,
    Edge,
    FeynmanDiagram,
    LastLegOfComponent,
    Leg,
    disjoint_union,
)
from .formal import FormalSum
from .labels import LabelTable
from .multiindex import MultiIndex


def raise_half_edge(g: FeynmanDiagram, kind: str, index: int, end: str, k: MultiIndex) -> tuple[Fraction, FeynmanDiagram]:
    """The signed diagram d^k_(e,v) g: raise the derivative on one half-edge,
    with sign (-1)^|k| when the half-edge is outgoing."""
    sign = Fraction(1)
    if kind == "edge":
        e = g.edges[index]
        if end == "src":
            sign = Fraction(-1) ** mi.order(k)
        edges = list(g.edges)
        edges[index] = e.raised(k)
        return sign, FeynmanDiagram(
            g.dimension, g.n_vertices, tuple(edges), g.legs, g.decorations, g.distinguished
        )
    legs = list(g.legs)
    legs[index] = legs[index].raised(k)
    return sign, FeynmanDiagram(
        g.dimension, g.n_vertices, g.edges, tuple(legs), g.decorations, g.distinguished
    )


def ibp_combination(g: FeynmanDiagram, v: int, i: int) -> FormalSum:
    """sum over half-edges at v of d^{delta_i} g (legs included); an element
    of the kernel of every smooth-kernel valuation."""
    if not 0 <= v < g.n_vertices:
        raise DiagramError(f"vertex {v} out of range")
    delta = mi.unit(g.dimension, i)
    terms = []
    for h in g.incident_half_edges(v):
        sign, raised = raise_half_edge(g, h.kind, h.index, h.end, delta)
        terms.append((raised, sign))
    return FormalSum(terms)


def with_decoration(g: FeynmanDiagram, decor: dict[int, MultiIndex]) -> FeynmanDiagram:
    return FeynmanDiagram(
        g.dimension, g.n_vertices, g.edges, g.legs, tuple(sorted(decor.items())), g.distinguished
    )


def with_distinguished(g: FeynmanDiagram, dist: tuple[int, ...]) -> FeynmanDiagram:
    return FeynmanDiagram(g.dimension, g.n_vertices, g.edges, g.legs, g.decorations, dist)


def vacuum_relation_generators(g: FeynmanDiagram) -> list[FormalSum]:
    """All ideal generators for a connected vacuum diagram: the decorated
    integration-by-parts relation at every non-distinguished vertex, the
    distinguished-vertex variant, and the leg-moving relation at every vertex.
    """
    if not g.is_vacuum or len(g.components) != 1 or g.is_empty:
        raise DiagramError("vacuum relations need a connected vacuum diagram")
    (v_star,) = g.distinguished
    d = g.dimension
    decor = g.decor_dict()
    gens: list[FormalSum] = []

    for i in range(d):
        delta = mi.unit(d, i)
        for v in range(g.n_vertices):
            deriv_part = FormalSum(
                [
                    raise_half_edge(g, h.kind, h.index, h.end, delta)[::-1]
                    for h in g.incident_half_edges(v)
                ]
            )
            if v != v_star:
                lower = _lower_decoration(g, decor, v, i)
                gens.append(deriv_part + lower)
            else:
                total = deriv_part
                for w in range(g.n_vertices):
                    total = total - _lower_decoration(g, decor, w, i)
                gens.append(total)

    for v in range(g.n_vertices):
        gens.append(move_leg_generator(g, v))
    return gens


def _lower_decoration(g: FeynmanDiagram, decor: dict[int, MultiIndex], v: int, i: int) -> FormalSum:
    """n(v)_i * (g with n(v) lowered by delta_i), or zero."""
    k = decor.get(v, mi.zero(g.dimension))
    if k[i] == 0:
        return FormalSum.zero()
    new = dict(decor)
    lowered = mi.sub(k, mi.unit(g.dimension, i))
    if mi.order(lowered):
        new[v] = lowered
    else:
        new.pop(v)
    return FormalSum.lift(with_decoration(g, new), k[i])


def move_leg_generator(g: FeynmanDiagram, v: int) -> FormalSum:
    """(g, v_star, n) minus its expansion re-rooted at v, with the binomial
    transfer of decorations onto the old root."""
    (v_star,) = g.distinguished
    d = g.dimension
    decor = g.decor_dict()
    verts = list(range(g.n_vertices))
    total = FormalSum.lift(g, 1)
    # enumerate m: V -> N^d with m <= n (componentwise); only decorated
    # vertices admit nonzero m
    decorated = [w for w in verts if w in decor]

    def rec(idx: int, chosen: dict[int, MultiIndex]):
        if idx == len(decorated):
            yield dict(chosen)
            return
        w = decorated[idx]
        for m, _ in mi.iter_splits(decor[w]):
            chosen[w] = m
            yield from rec(idx + 1, chosen)
        chosen.pop(w, None)

    expansion = []
    for m in rec(0, {}):
        coeff = Fraction(1)
        sigma = mi.zero(d)
        order_m = 0
        for w, mw in m.items():
            coeff *= mi.binom(decor[w], mw)
            sigma = mi.add(sigma, mw)
            order_m += mi.order(mw)
        new_decor: dict[int, MultiIndex] = {}
        for w in verts:
            k = decor.get(w, mi.zero(d))
            if w in m:
                k = mi.sub(k, m[w])
            if w == v_star:
                k = mi.add(k, sigma)
            if mi.order(k):
                new_decor[w] = k
        moved = with_distinguished(with_decoration(g, new_decor), (v,))
        expansion.append((moved, Fraction(-1) ** order_m * coeff))
    return total - FormalSum(expansion)


def delete_leg(g: FeynmanDiagram, leg_index: int) -> FormalSum:
    """Remove leg `leg_index` (0-based) when its multiindex is zero; the zero
    sum otherwise.  The leg's component must keep at least one other leg."""
    if not 0 <= leg_index < g.n_legs:
        raise DiagramError(f"leg index {leg_index} out of range")
    leg = g.legs[leg_index]
    comp = g.component_of(leg.vertex)
    others = [i for i in range(g.n_legs) if i != leg_index and g.legs[i].vertex in comp]
    if not others:
        raise LastLegOfComponent(f"leg {leg_index} is the last leg of its component")
    if mi.order(leg.deriv):
        return FormalSum.zero()
    legs = g.legs[:leg_index] + g.legs[leg_index + 1 :]
    return FormalSum.lift(
        FeynmanDiagram(g.dimension, g.n_vertices, g.edges, legs, g.decorations, g.distinguished)
    )


def reduce_leg_to_zero(g: FeynmanDiagram, leg_index: int) -> FormalSum:
    """Rewrite g, modulo the integration-by-parts ideal, as a combination of
    diagrams whose leg `leg_index` carries multiindex zero."""
    leg = g.legs[leg_index]
    if mi.order(leg.deriv) == 0:
        return FormalSum.lift(g)
    i = next(ax for ax, c in enumerate(leg.deriv) if c > 0)
    delta = mi.unit(g.dimension, i)
    lowered_legs = list(g.legs)
    lowered_legs[leg_index] = Leg(leg.vertex, mi.sub(leg.deriv, delta))
    lowered = FeynmanDiagram(
        g.dimension, g.n_vertices, g.edges, tuple(lowered_legs), g.decorations, g.distinguished
    )
    out = FormalSum.zero()
    for h in lowered.incident_half_edges(leg.vertex):
        if h.kind == "leg" and h.index == leg_index:
            continue
        sign, raised = raise_half_edge(lowered, h.kind, h.index, h.end, delta)
        out = out - sign * reduce_leg_to_zero(raised, leg_index)
    return out


def star_compose(g1: FeynmanDiagram, g2: FeynmanDiagram) -> FormalSum:
    """Convolution product: remove the last leg of g1 and the first leg of
    g2 and identify their attachment vertices.  Legs with nonzero multiindex
    are first rewritten by integration by parts."""
    if g1.n_legs < 1 or g2.n_legs < 1:
        raise DiagramError("star composition needs at least one leg on each side")
    left = reduce_leg_to_zero(g1, g1.n_legs - 1)
    right = reduce_leg_to_zero(g2, 0)
    out = FormalSum.zero()
    for a, ca in left:
        for b, cb in right:
            out = out + (ca * cb) * FormalSum.lift(_star_basic(a, b))
    return out


def _star_basic(g1: FeynmanDiagram, g2: FeynmanDiagram) -> FeynmanDiagram:
    v1 = g1.legs[-1].vertex
    v2 = g2.legs[0].vertex
    off = g1.n_vertices
    union = disjoint_union(
        FeynmanDiagram(g1.dimension, g1.n_vertices, g1.edges, g1.legs[:-1], g1.decorations, g1.distinguished),
        FeynmanDiagram(g2.dimension, g2.n_vertices, g2.edges, g2.legs[1:], g2.decorations, g2.distinguished),
    )
    drop = v2 + off
    keep = v1

    def image(v: int) -> int:
        return keep if v == drop else v

    kept = sorted(set(range(union.n_vertices)) - {drop})
    rank = {v: i for i, v in enumerate(kept)}
    return FeynmanDiagram(
        union.dimension,
        len(kept),
        tuple(Edge(rank[image(e.src)], rank[image(e.tgt)], e.label, e.deriv) for e in union.edges),
        tuple(Leg(rank[image(l.vertex)], l.deriv) for l in union.legs),
        tuple(sorted((rank[image(v)], k) for v, k in union.decorations)),
        tuple(sorted(rank[image(v)] for v in union.distinguished)),
    )


def chu_vandermonde_check(S: list, pi: dict, k: dict) -> bool:
    """Verify the pushforward binomial identity by enumeration: for every
    attainable pushforward L of l, the sum of binom(k, l) over l with fixed
    pushforward equals binom(pi_* k, L)."""
    import itertools
    import math

    Sbar = sorted(set(pi.values()))
    pk = {x: sum(k[s] for s in S if pi[s] == x) for x in Sbar}
    ranges = [range(k[s] + 1) for s in S]
    sums: dict[tuple, int] = {}
    for l_vals in itertools.product(*ranges):
        l = dict(zip(S, l_vals))
        L = tuple(sum(l[s] for s in S if pi[s] == x) for x in Sbar)
        weight = 1
        for s in S:
            weight *= math.comb(k[s], l[s])
        sums[L] = sums.get(L, 0) + weight
    for L, total in sums.items():
        expected = 1
        for x, Lx in zip(Sbar, L):
            expected *= math.comb(pk[x], Lx)
        if total != expected:
            return False
    return True
