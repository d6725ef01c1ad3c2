"""Forests of divergent subgraphs, contraction operators, the forest formula
and its resummation over forest intervals.

Contraction states track the bijection with the original edges (and legs), so
nested contractions know where to act; vertices keep their original indices,
merged vertices collapse to the lowest one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from . import multiindex as mi
from .diagram import Edge, FeynmanDiagram, Leg, Subgraph, degree
from .formal import TensorSum, VacuumProduct
from .labels import LabelTable
from .multiindex import MultiIndex


class NotAForest(ValueError):
    pass


class NotAPartition(ValueError):
    pass


@dataclass(frozen=True)
class Forest:
    """A set of connected divergent subgraphs, pairwise nested or
    vertex-disjoint, of a fixed parent diagram."""

    parent: FeynmanDiagram
    elements: frozenset[frozenset[int]]  # edge id sets

    def __post_init__(self):
        object.__setattr__(self, "elements", frozenset(frozenset(e) for e in self.elements))
        subs = [Subgraph(self.parent, e) for e in self.elements]
        for i, a in enumerate(subs):
            if not a.is_connected():
                raise NotAForest(f"forest element not connected: {sorted(a.edge_ids)}")
            for b in subs[i + 1 :]:
                if not a.nested_or_disjoint(b):
                    raise NotAForest(
                        f"overlapping elements: {sorted(a.edge_ids)} / {sorted(b.edge_ids)}"
                    )

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.sorted_elements)

    def __contains__(self, e):
        return frozenset(e) in self.elements

    @cached_property
    def sorted_elements(self) -> tuple[frozenset[int], ...]:
        return tuple(sorted(self.elements, key=lambda e: (len(e), sorted(e))))

    @cached_property
    def roots(self) -> tuple[frozenset[int], ...]:
        out = []
        for e in self.sorted_elements:
            if not any(e < f for f in self.elements):
                out.append(e)
        return tuple(out)

    def children(self, e: frozenset[int]) -> tuple[frozenset[int], ...]:
        below = [f for f in self.elements if f < e]
        out = []
        for f in below:
            if not any(f < h < e for h in below):
                out.append(f)
        return tuple(sorted(out, key=lambda x: (len(x), sorted(x))))

    def parent_of(self, e: frozenset[int]):
        """The smallest forest element strictly containing e, or None."""
        above = [f for f in self.elements if e < f]
        if not above:
            return None
        return min(above, key=lambda x: (len(x), sorted(x)))

    def union(self, other: "Forest") -> "Forest":
        return Forest(self.parent, self.elements | other.elements)

    def contraction_order(self) -> tuple[frozenset[int], ...]:
        """Parents before children (descending edge count); disjoint or
        same-size elements commute, ties broken by edge ids."""
        return tuple(sorted(self.elements, key=lambda e: (-len(e), sorted(e))))


def forests(g: FeynmanDiagram, labels: LabelTable, full_only: bool = False) -> list[Forest]:
    """All forests of connected divergent subgraphs (including the empty
    one); `full_only` restricts to subgraphs that are full in g."""
    from .diagram import connected_divergent_subgraphs, is_full

    divs = [s for s, _ in connected_divergent_subgraphs(g, labels)]
    if full_only:
        divs = [s for s in divs if is_full(s)]
    out: list[Forest] = []

    def rec(start: int, chosen: list[Subgraph]):
        out.append(Forest(g, frozenset(s.edge_ids for s in chosen)))
        for j in range(start, len(divs)):
            cand = divs[j]
            if all(cand.nested_or_disjoint(s) for s in chosen):
                chosen.append(cand)
                rec(j + 1, chosen)
                chosen.pop()

    rec(0, [])
    return out


@dataclass(frozen=True)
class ForestInterval:
    """The set of forests F with lower <= F <= lower + delta."""

    lower: Forest
    delta: Forest

    def __post_init__(self):
        if self.lower.elements & self.delta.elements:
            raise NotAForest("interval lower and delta sets must be disjoint")
        self.upper  # validates that lower U delta is a forest

    @cached_property
    def upper(self) -> Forest:
        return self.lower.union(self.delta)

    def members(self) -> list[Forest]:
        """All forests in the interval (every subset of delta works)."""
        deltas = sorted(self.delta.elements, key=lambda e: (len(e), sorted(e)))
        out = []
        for mask in range(1 << len(deltas)):
            extra = frozenset(deltas[i] for i in range(len(deltas)) if mask >> i & 1)
            out.append(Forest(self.lower.parent, self.lower.elements | extra))
        return out

    def __contains__(self, forest: Forest) -> bool:
        return (
            self.lower.elements <= forest.elements <= self.upper.elements
        )


# -- contraction states ---------------------------------------------------------


@dataclass(frozen=True)
class _Piece:
    """One connected component of a contraction state; vertices keep their
    original indices, edges and legs their original positions."""

    verts: tuple[int, ...]
    edges: tuple[tuple[int, int, int, MultiIndex], ...]  # (orig id, src, tgt, extra deriv)
    legs: tuple[tuple[int, int, MultiIndex], ...]  # (orig leg id, vertex, extra deriv)
    decor: tuple[tuple[int, MultiIndex], ...]
    dist: int | None  # distinguished vertex for vacuum pieces

    def sort_key(self):
        return (0 if self.legs else 1, self.legs, self.verts, self.edges, self.decor, self.dist if self.dist is not None else -1)


@dataclass(frozen=True)
class _State:
    pieces: tuple[_Piece, ...]

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(sorted(self.pieces, key=_Piece.sort_key)))


def _initial_state(g: FeynmanDiagram) -> _State:
    pieces = []
    for comp in g.components:
        cset = set(comp)
        pieces.append(
            _Piece(
                tuple(comp),
                tuple(
                    (i, e.src, e.tgt, mi.zero(g.dimension))
                    for i, e in enumerate(g.edges)
                    if e.src in cset
                ),
                tuple(
                    (i, l.vertex, mi.zero(g.dimension))
                    for i, l in enumerate(g.legs)
                    if l.vertex in cset
                ),
                tuple((v, k) for v, k in g.decorations if v in cset),
                next((v for v in g.distinguished if v in cset), None),
            )
        )
    return _State(tuple(pieces))


def _contract_piece(
    g: FeynmanDiagram, labels: LabelTable, piece: _Piece, gamma: frozenset[int]
) -> list[tuple[Fraction, _Piece, _Piece | None]]:
    """Apply the contraction of `gamma` inside one piece.

    Returns a list of (coefficient, extracted vacuum piece, quotient piece or
    None when it collapses to the empty factor); the empty list encodes zero.
    """
    d = g.dimension
    sub_edges = [e for e in piece.edges if e[0] in gamma]
    if len(sub_edges) != len(gamma):
        return []
    sub_verts = sorted({v for _, s, t, _ in sub_edges for v in (s, t)})
    # connectivity of the preimage with current endpoints
    parent = {v: v for v in sub_verts}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for _, s, t, _ in sub_edges:
        ra, rb = find(s), find(t)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    if len({find(v) for v in sub_verts}) != 1:
        return []

    deg = Fraction(labels.dimension) * (len(sub_verts) - 1)
    for oid, _, _, extra in sub_edges:
        e = g.edges[oid]
        deg += labels.deg(e.label, mi.add(e.deriv, extra))
    budget = math.floor(-deg)
    if budget < 0:
        return []

    decor = dict(piece.decor)
    sub_vset = set(sub_verts)
    # boundary half-edges inside the piece: (kind, position in piece list, end)
    boundary = []
    for pos, (oid, s, t, extra) in enumerate(piece.edges):
        if oid in gamma:
            continue
        if s in sub_vset:
            boundary.append(("edge", pos, "src"))
        if t in sub_vset:
            boundary.append(("edge", pos, "tgt"))
    for pos, (lid, v, extra) in enumerate(piece.legs):
        if v in sub_vset:
            boundary.append(("leg", pos, "tgt"))
    decorated = [v for v in sub_verts if v in decor]

    rep = sub_verts[0]
    out = []
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
        nbar = dict(zip(decorated, nbar_tuple))
        used = sum(mi.order(k) for k in nbar_tuple)
        for ell_tuple in mi.assignments(len(boundary), d, budget - used):
            coeff = coeff_n
            pi_ell: dict[int, MultiIndex] = {}
            edge_raise: dict[int, MultiIndex] = {}
            leg_raise: dict[int, MultiIndex] = {}
            for (kind, pos, end), k in zip(boundary, ell_tuple):
                if mi.order(k) == 0:
                    continue
                coeff /= mi.factorial(k)
                if kind == "edge" and end == "src":
                    coeff *= Fraction(-1) ** mi.order(k)
                if kind == "edge":
                    v = piece.edges[pos][1] if end == "src" else piece.edges[pos][2]
                    edge_raise[pos] = mi.add(edge_raise.get(pos, mi.zero(d)), k)
                else:
                    v = piece.legs[pos][1]
                    leg_raise[pos] = mi.add(leg_raise.get(pos, mi.zero(d)), k)
                pi_ell[v] = mi.add(pi_ell.get(v, mi.zero(d)), k)

            vac_decor = []
            for v in sub_verts:
                tot = mi.add(
                    pi_ell.get(v, mi.zero(d)), nbar.get(v, mi.zero(d))
                )
                if mi.order(tot):
                    vac_decor.append((v, tot))
            extracted = _Piece(
                tuple(sub_verts),
                tuple(sub_edges),
                (),
                tuple(vac_decor),
                rep,
            )

            def image(v: int) -> int:
                return rep if v in sub_vset else v

            q_edges = []
            for pos, (oid, s, t, extra) in enumerate(piece.edges):
                if oid in gamma:
                    continue
                k = edge_raise.get(pos, mi.zero(d))
                q_edges.append((oid, image(s), image(t), mi.add(extra, k)))
            q_legs = []
            for pos, (lid, v, extra) in enumerate(piece.legs):
                k = leg_raise.get(pos, mi.zero(d))
                q_legs.append((lid, image(v), mi.add(extra, k)))
            q_decor: dict[int, MultiIndex] = {}
            for v, k in piece.decor:
                if v in sub_vset:
                    k = mi.sub(k, nbar.get(v, mi.zero(d)))
                if mi.order(k):
                    w = image(v)
                    q_decor[w] = mi.add(q_decor.get(w, mi.zero(d)), k)
            q_verts = sorted(
                ({v for v in piece.verts if v not in sub_vset} | {rep})
            )
            q_dist = piece.dist
            if q_dist is not None and q_dist in sub_vset:
                q_dist = rep
            if not q_edges and not q_legs:
                # fully contracted component: empty factor or zero
                if q_decor:
                    continue
                quotient = None
            else:
                # drop the merged vertex if nothing touches it
                touched = {v for _, s, t, _ in q_edges for v in (s, t)}
                touched |= {v for _, v, _ in q_legs}
                if q_dist is not None:
                    touched.add(q_dist)
                if rep not in touched:
                    if rep in q_decor:
                        continue
                    q_verts.remove(rep)
                quotient = _Piece(
                    tuple(q_verts),
                    tuple(q_edges),
                    tuple(q_legs),
                    tuple(sorted(q_decor.items())),
                    q_dist,
                )
            out.append((coeff, extracted, quotient))
    return out


def _apply_contraction(
    g: FeynmanDiagram,
    labels: LabelTable,
    terms: dict[_State, Fraction],
    gamma: frozenset[int],
    scale: Fraction,
    keep_identity: bool,
) -> dict[_State, Fraction]:
    """terms <- (keep_identity * id + scale * C_gamma)(terms)."""
    out: dict[_State, Fraction] = {}

    def add(state: _State, c: Fraction):
        new = out.get(state, Fraction(0)) + c
        if new == 0:
            out.pop(state, None)
        else:
            out[state] = new

    for state, c in terms.items():
        if keep_identity:
            add(state, c)
        # find the piece holding gamma
        hit = [i for i, p in enumerate(state.pieces) if any(e[0] in gamma for e in p.edges)]
        if len(hit) != 1:
            continue  # split across pieces: contraction gives zero
        i = hit[0]
        rest = state.pieces[:i] + state.pieces[i + 1 :]
        for coeff, extracted, quotient in _contract_piece(g, labels, state.pieces[i], gamma):
            pieces = rest + (extracted,) + ((quotient,) if quotient is not None else ())
            add(_State(pieces), c * scale * coeff)
    return out


def _state_to_key(
    g: FeynmanDiagram, state: _State
) -> tuple[VacuumProduct, FeynmanDiagram]:
    d = g.dimension
    vac_factors = []
    legged: list[_Piece] = []
    for p in state.pieces:
        if p.dist is not None and not p.legs:
            rank = {v: i for i, v in enumerate(p.verts)}
            vac_factors.append(
                FeynmanDiagram(
                    d,
                    len(p.verts),
                    tuple(
                        Edge(
                            rank[s],
                            rank[t],
                            g.edges[oid].label,
                            mi.add(g.edges[oid].deriv, extra),
                        )
                        for oid, s, t, extra in p.edges
                    ),
                    (),
                    tuple((rank[v], k) for v, k in p.decor),
                    (rank[p.dist],),
                )
            )
        else:
            legged.append(p)
    verts = sorted(v for p in legged for v in p.verts)
    rank = {v: i for i, v in enumerate(verts)}
    edges = []
    legs = []
    decor = []
    for p in legged:
        for oid, s, t, extra in p.edges:
            edges.append((oid, Edge(rank[s], rank[t], g.edges[oid].label, mi.add(g.edges[oid].deriv, extra))))
        for lid, v, extra in p.legs:
            legs.append((lid, Leg(rank[v], mi.add(g.legs[lid].deriv, extra))))
        decor.extend((rank[v], k) for v, k in p.decor)
    edges.sort(key=lambda t: t[0])
    legs.sort(key=lambda t: t[0])
    diagram = FeynmanDiagram(
        d,
        len(verts),
        tuple(e for _, e in edges),
        tuple(l for _, l in legs),
        tuple(sorted(decor)),
        (),
    )
    return VacuumProduct(tuple(vac_factors)), diagram


def contract_forest(g: FeynmanDiagram, forest: Forest, labels: LabelTable) -> TensorSum:
    """The iterated contraction operator of a forest, roots first."""
    if forest.parent != g:
        raise NotAForest("forest belongs to a different diagram")
    terms: dict[_State, Fraction] = {_initial_state(g): Fraction(1)}
    for gamma in forest.contraction_order():
        terms = _apply_contraction(g, labels, terms, gamma, Fraction(1), keep_identity=False)
    return TensorSum(
        ((_state_to_key(g, s)), c) for s, c in terms.items()
    )


def forest_formula(g: FeynmanDiagram, labels: LabelTable, full_only: bool = False) -> TensorSum:
    """Signed sum of forest contractions; equals the twisted-antipode route
    modulo the relation ideals."""
    total = TensorSum()
    for forest in forests(g, labels, full_only=full_only):
        total = total + Fraction(-1) ** len(forest) * contract_forest(g, forest, labels)
    return total


def forest_interval_term(g: FeynmanDiagram, interval: ForestInterval, labels: LabelTable) -> TensorSum:
    """Renormalise the delta-set subgraphs (id - C) and contract the lower
    ones (-C), roots of the upper forest first."""
    if interval.lower.parent != g:
        raise NotAForest("interval belongs to a different diagram")
    terms: dict[_State, Fraction] = {_initial_state(g): Fraction(1)}
    for gamma in interval.upper.contraction_order():
        if gamma in interval.delta.elements:
            terms = _apply_contraction(g, labels, terms, gamma, Fraction(-1), keep_identity=True)
        else:
            terms = _apply_contraction(g, labels, terms, gamma, Fraction(-1), keep_identity=False)
    return TensorSum(
        ((_state_to_key(g, s)), c) for s, c in terms.items()
    )


def interval_resummation(
    g: FeynmanDiagram, partition: list[ForestInterval], labels: LabelTable, full_only: bool = False
) -> TensorSum:
    """Sum of interval terms over a partition of the forest set; checks the
    partition property first."""
    seen: dict[frozenset, int] = {}
    all_forests = forests(g, labels, full_only=full_only)
    for interval in partition:
        for member in interval.members():
            key = frozenset(member.elements)
            seen[key] = seen.get(key, 0) + 1
    expected = {frozenset(f.elements) for f in all_forests}
    if set(seen) != expected or any(v != 1 for v in seen.values()):
        raise NotAPartition("intervals do not partition the forest set")
    total = TensorSum()
    for interval in partition:
        total = total + forest_interval_term(g, interval, labels)
    return total
