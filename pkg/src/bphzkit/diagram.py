"""Decorated Feynman diagrams and vacuum diagrams.

A diagram is a directed multigraph on vertices 0..n-1 (construction index =
the fixed total order), with labelled internal edges, an ordered tuple of
legs (attachment vertex + derivative multiindex of the implicit delta label),
optional node decorations, and optional distinguished vertices.  A diagram
with one distinguished vertex per component and no legs is a vacuum diagram.

Diagrams are immutable.  Equality and ordering go through a canonical key
that sorts edges and normalises vertex numbering per connected component
(components ordered by first leg, then by structure), so that e.g. the
disjoint-union commutation law holds on the nose.  No graph-isomorphism
canonicalisation is attempted: vertex construction order is part of the data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from . import multiindex as mi
from .labels import DELTA, NEG_INF, LabelTable
from .multiindex import MultiIndex


class DiagramError(ValueError):
    pass


class EmptyGraph(DiagramError):
    pass


class UnsupportedDecoration(DiagramError):
    pass


class LastLegOfComponent(DiagramError):
    pass


class TooFewVertices(DiagramError):
    pass


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    tgt: int
    label: str
    deriv: MultiIndex

    def raised(self, k: MultiIndex) -> "Edge":
        return Edge(self.src, self.tgt, self.label, mi.add(self.deriv, k))


@dataclass(frozen=True, order=True)
class Leg:
    vertex: int
    deriv: MultiIndex

    def raised(self, k: MultiIndex) -> "Leg":
        return Leg(self.vertex, mi.add(self.deriv, k))


@dataclass(frozen=True, order=True)
class HalfEdge:
    """One end of an edge or leg; outgoing iff it is the source end."""

    kind: str  # "edge" or "leg"
    index: int
    end: str  # "src" or "tgt"; legs are always incoming at their vertex

    @property
    def outgoing(self) -> bool:
        return self.end == "src"


@dataclass(frozen=True)
class FeynmanDiagram:
    dimension: int
    n_vertices: int
    edges: tuple[Edge, ...] = ()
    legs: tuple[Leg, ...] = ()
    decorations: tuple[tuple[int, MultiIndex], ...] = ()  # sparse, nonzero only
    distinguished: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "legs", tuple(self.legs))
        decs = tuple(sorted((v, k) for v, k in self.decorations if mi.order(k) > 0))
        object.__setattr__(self, "decorations", decs)
        object.__setattr__(self, "distinguished", tuple(sorted(self.distinguished)))
        n = self.n_vertices
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.tgt < n):
                raise DiagramError(f"edge endpoint out of range: {e}")
            if len(e.deriv) != self.dimension:
                raise DiagramError(f"edge deriv has wrong dimension: {e}")
        for leg in self.legs:
            if not 0 <= leg.vertex < n:
                raise DiagramError(f"leg vertex out of range: {leg}")
            if len(leg.deriv) != self.dimension:
                raise DiagramError(f"leg deriv has wrong dimension: {leg}")
        for v, k in decs:
            if not 0 <= v < n:
                raise DiagramError(f"decoration vertex out of range: {v}")
            if len(k) != self.dimension:
                raise DiagramError("decoration has wrong dimension")
        for v in self.distinguished:
            if not 0 <= v < n:
                raise DiagramError(f"distinguished vertex out of range: {v}")

    # -- basic queries ----------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.n_vertices == 0

    @property
    def is_vacuum(self) -> bool:
        return bool(self.distinguished) or (self.is_empty and not self.legs)

    @property
    def n_legs(self) -> int:
        return len(self.legs)

    def decor(self, v: int) -> MultiIndex:
        for w, k in self.decorations:
            if w == v:
                return k
        return mi.zero(self.dimension)

    def decor_dict(self) -> dict[int, MultiIndex]:
        return dict(self.decorations)

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        """Connected components as sorted vertex tuples, ordered by min vertex."""
        parent = list(range(self.n_vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            ra, rb = find(e.src), find(e.tgt)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = {}
        for v in range(self.n_vertices):
            groups.setdefault(find(v), []).append(v)
        return tuple(tuple(sorted(g)) for g in sorted(groups.values()))

    def component_of(self, v: int) -> tuple[int, ...]:
        for comp in self.components:
            if v in comp:
                return comp
        raise DiagramError(f"vertex {v} out of range")

    def legs_at(self, v: int) -> list[int]:
        return [i for i, leg in enumerate(self.legs) if leg.vertex == v]

    def incident_half_edges(self, v: int) -> list[HalfEdge]:
        """All half-edges (edges and legs) at vertex v, deterministic order."""
        out = []
        for i, e in enumerate(self.edges):
            if e.src == v:
                out.append(HalfEdge("edge", i, "src"))
            if e.tgt == v:
                out.append(HalfEdge("edge", i, "tgt"))
        for i, leg in enumerate(self.legs):
            if leg.vertex == v:
                out.append(HalfEdge("leg", i, "tgt"))
        return out

    def half_edge_vertex(self, h: HalfEdge) -> int:
        if h.kind == "leg":
            return self.legs[h.index].vertex
        e = self.edges[h.index]
        return e.src if h.end == "src" else e.tgt

    # -- canonical form ----------------------------------------------------

    @cached_property
    def canonical_key(self) -> tuple:
        legged, legless = [], []
        for comp in self.components:
            comp_legs = [i for i, leg in enumerate(self.legs) if leg.vertex in comp]
            if comp_legs:
                legged.append((min(comp_legs), comp))
            else:
                legless.append((self._local_key(comp), comp))
        ordered = [c for _, c in sorted(legged, key=lambda t: t[0])]
        ordered += [c for k, c in sorted(legless, key=lambda t: t[0])]
        rank: dict[int, int] = {}
        for comp in ordered:
            for v in comp:
                rank[v] = len(rank)
        edges = tuple(
            sorted((rank[e.src], rank[e.tgt], e.label, e.deriv) for e in self.edges)
        )
        legs = tuple((rank[leg.vertex], leg.deriv) for leg in self.legs)
        decs = tuple(sorted((rank[v], k) for v, k in self.decorations))
        dist = tuple(sorted(rank[v] for v in self.distinguished))
        return (self.dimension, self.n_vertices, edges, legs, decs, dist)

    def _local_key(self, comp: tuple[int, ...]) -> tuple:
        rank = {v: i for i, v in enumerate(comp)}
        edges = tuple(
            sorted(
                (rank[e.src], rank[e.tgt], e.label, e.deriv)
                for e in self.edges
                if e.src in rank
            )
        )
        decs = tuple(sorted((rank[v], k) for v, k in self.decorations if v in rank))
        dist = tuple(sorted(rank[v] for v in self.distinguished if v in rank))
        return (len(comp), edges, decs, dist)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeynmanDiagram):
            return NotImplemented
        return self.canonical_key == other.canonical_key

    def __hash__(self) -> int:
        return hash(self.canonical_key)

    def __lt__(self, other) -> bool:
        return self.canonical_key < other.canonical_key

    def __repr__(self) -> str:
        bits = [f"V={self.n_vertices}"]
        bits.append("E[" + ",".join(f"{e.src}->{e.tgt}:{_lab(e)}" for e in self.edges) + "]")
        if self.legs:
            bits.append("L[" + ",".join(f"{l.vertex}:{l.deriv}" for l in self.legs) + "]")
        if self.decorations:
            bits.append(f"n{dict(self.decorations)}")
        if self.distinguished:
            bits.append(f"*{list(self.distinguished)}")
        return "Diag(" + " ".join(bits) + ")"

    # -- component split (for vacuum products) ------------------------------

    def component_diagrams(self) -> list["FeynmanDiagram"]:
        """Split into per-component diagrams (vertices renumbered in order).

        Leg order within each piece follows the global leg order.
        """
        out = []
        for comp in self.components:
            rank = {v: i for i, v in enumerate(comp)}
            out.append(
                FeynmanDiagram(
                    self.dimension,
                    len(comp),
                    tuple(
                        Edge(rank[e.src], rank[e.tgt], e.label, e.deriv)
                        for e in self.edges
                        if e.src in rank
                    ),
                    tuple(
                        Leg(rank[l.vertex], l.deriv) for l in self.legs if l.vertex in rank
                    ),
                    tuple((rank[v], k) for v, k in self.decorations if v in rank),
                    tuple(rank[v] for v in self.distinguished if v in rank),
                )
            )
        return out


def _lab(e: Edge) -> str:
    return e.label + (f"^{e.deriv}" if mi.order(e.deriv) else "")


EMPTY_KEY_CACHE: dict[int, FeynmanDiagram] = {}


def empty_diagram(dimension: int) -> FeynmanDiagram:
    if dimension not in EMPTY_KEY_CACHE:
        EMPTY_KEY_CACHE[dimension] = FeynmanDiagram(dimension, 0)
    return EMPTY_KEY_CACHE[dimension]


# -- validation -------------------------------------------------------------


def validate(g: FeynmanDiagram, labels: LabelTable) -> list[str]:
    """Return a list of violation messages (empty when the diagram is valid)."""
    errors = []
    if labels.dimension != g.dimension:
        errors.append(f"DimensionMismatch(table d={labels.dimension}, diagram d={g.dimension})")
    for i, e in enumerate(g.edges):
        if e.label == DELTA or e.label not in labels:
            errors.append(f"BadLabel(edge {i}: {e.label!r})")
    vacuum = g.is_vacuum
    if vacuum and g.legs:
        errors.append("MissingLeg(vacuum diagram carries legs)")
    if not vacuum and g.decorations:
        errors.append("DecorationOutsideVacuumMode")
    for ci, comp in enumerate(g.components):
        n_legs = sum(1 for leg in g.legs if leg.vertex in comp)
        n_dist = sum(1 for v in g.distinguished if v in comp)
        if vacuum:
            if n_dist != 1:
                errors.append(f"MissingLeg(component {ci}: {n_dist} distinguished vertices)")
        elif n_legs == 0:
            errors.append(f"MissingLeg(component {ci})")
    return errors


def check(g: FeynmanDiagram, labels: LabelTable) -> FeynmanDiagram:
    errs = validate(g, labels)
    if errs:
        raise DiagramError("; ".join(errs))
    return g


# -- subgraphs ---------------------------------------------------------------


@dataclass(frozen=True)
class Subgraph:
    """A subgraph of a fixed parent: a set of internal edges, vertices derived."""

    parent: FeynmanDiagram = field(compare=False)
    edge_ids: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edge_ids", frozenset(self.edge_ids))
        for i in self.edge_ids:
            if not 0 <= i < len(self.parent.edges):
                raise DiagramError(f"edge id {i} out of range")

    @cached_property
    def vertices(self) -> frozenset[int]:
        vs = set()
        for i in self.edge_ids:
            e = self.parent.edges[i]
            vs.add(e.src)
            vs.add(e.tgt)
        return frozenset(vs)

    @property
    def sorted_edges(self) -> tuple[int, ...]:
        return tuple(sorted(self.edge_ids))

    def __len__(self) -> int:
        return len(self.edge_ids)

    def __le__(self, other: "Subgraph") -> bool:
        return self.edge_ids <= other.edge_ids

    @cached_property
    def components(self) -> tuple[frozenset[int], ...]:
        """Connected components as frozensets of edge ids, ordered by min edge."""
        ids = sorted(self.edge_ids)
        parent: dict[int, int] = {i: i for i in ids}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        by_vertex: dict[int, int] = {}
        for i in ids:
            e = self.parent.edges[i]
            for v in (e.src, e.tgt):
                if v in by_vertex:
                    ra, rb = find(by_vertex[v]), find(i)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
                else:
                    by_vertex[v] = i
        groups: dict[int, set[int]] = {}
        for i in ids:
            groups.setdefault(find(i), set()).add(i)
        return tuple(frozenset(g) for _, g in sorted(groups.items()))

    def is_connected(self) -> bool:
        return len(self.components) == 1

    def vertex_disjoint(self, other: "Subgraph") -> bool:
        return not (self.vertices & other.vertices)

    def nested_or_disjoint(self, other: "Subgraph") -> bool:
        return (
            self.edge_ids <= other.edge_ids
            or other.edge_ids <= self.edge_ids
            or self.vertex_disjoint(other)
        )


# -- degrees -----------------------------------------------------------------


def degree(g: FeynmanDiagram | Subgraph, labels: LabelTable) -> Fraction:
    """Small-scale degree: sum of edge degrees + decoration orders + d per
    extra vertex, summed over connected components."""
    d = labels.dimension
    if isinstance(g, Subgraph):
        if not g.edge_ids:
            raise EmptyGraph("degree of the empty subgraph")
        deg = Fraction(0)
        for i in g.edge_ids:
            e = g.parent.edges[i]
            deg += labels.deg(e.label, e.deriv)
        n_comp = len(g.components)
        deg += d * (len(g.vertices) - n_comp)
        return deg
    if g.is_empty:
        raise EmptyGraph("degree of the empty diagram")
    deg = Fraction(0)
    for e in g.edges:
        deg += labels.deg(e.label, e.deriv)
    for _, k in g.decorations:
        deg += mi.order(k)
    deg += d * (g.n_vertices - len(g.components))
    return deg


# -- connected subgraph enumeration -------------------------------------------


def _edge_adjacency(g: FeynmanDiagram) -> list[set[int]]:
    at_vertex: dict[int, set[int]] = {}
    for i, e in enumerate(g.edges):
        at_vertex.setdefault(e.src, set()).add(i)
        at_vertex.setdefault(e.tgt, set()).add(i)
    adj: list[set[int]] = []
    for i, e in enumerate(g.edges):
        a = (at_vertex[e.src] | at_vertex[e.tgt]) - {i}
        adj.append(a)
    return adj


def connected_edge_subsets(g: FeynmanDiagram):
    """All nonempty connected subsets of internal edges, without repeats.

    Deterministic order: grouped by minimal edge id, then by discovery of the
    branch-and-exclude recursion.
    """
    adj = _edge_adjacency(g)
    m = len(g.edges)

    def grow(current: frozenset[int], frontier: list[int], banned: frozenset[int]):
        yield current
        for idx, c in enumerate(frontier):
            new = current | {c}
            new_banned = banned | set(frontier[: idx + 1])
            ext = sorted(
                e
                for e in set().union(*(adj[i] for i in new))
                if e not in new and e not in new_banned and e > min(new)
            )
            yield from grow(new, ext, new_banned)

    for root in range(m):
        frontier = sorted(e for e in adj[root] if e > root)
        yield from grow(frozenset([root]), frontier, frozenset())


def connected_divergent_subgraphs(
    g: FeynmanDiagram, labels: LabelTable
) -> list[tuple[Subgraph, Fraction]]:
    """All connected subgraphs of degree <= 0, with their degrees.

    Deterministic order: by (edge count, sorted edge ids).
    """
    found = []
    for S in connected_edge_subsets(g):
        sub = Subgraph(g, S)
        deg = degree(sub, labels)
        if deg <= 0:
            found.append((sub, deg))
    found.sort(key=lambda t: (len(t[0].edge_ids), t[0].sorted_edges))
    return found


# -- boundaries, closures, contraction ----------------------------------------


def boundary_half_edges(sub: Subgraph) -> list[HalfEdge]:
    """Half-edges adjacent to the subgraph: ends of outside edges (and legs)
    whose vertex lies in the subgraph.  An outside edge with both endpoints
    in the subgraph contributes two half-edges."""
    g = sub.parent
    verts = sub.vertices
    out = []
    for i, e in enumerate(g.edges):
        if i in sub.edge_ids:
            continue
        if e.src in verts:
            out.append(HalfEdge("edge", i, "src"))
        if e.tgt in verts:
            out.append(HalfEdge("edge", i, "tgt"))
    for i, leg in enumerate(g.legs):
        if leg.vertex in verts:
            out.append(HalfEdge("leg", i, "tgt"))
    return sorted(out)


def closure(sub: Subgraph) -> Subgraph:
    """All internal edges of the parent with both endpoints in the subgraph."""
    g = sub.parent
    verts = sub.vertices
    ids = frozenset(
        i for i, e in enumerate(g.edges) if e.src in verts and e.tgt in verts
    )
    return Subgraph(g, ids)


def is_full(sub: Subgraph) -> bool:
    return sub.edge_ids == closure(sub).edge_ids


def is_c_full(sub: Subgraph) -> bool:
    """Every connected component is a full subgraph."""
    return all(is_full(Subgraph(sub.parent, comp)) for comp in sub.components)


def contract(
    g: FeynmanDiagram,
    sub: Subgraph,
    ell: dict[HalfEdge, MultiIndex] | None = None,
    nbar: dict[int, MultiIndex] | None = None,
) -> tuple[FeynmanDiagram, FeynmanDiagram] | None:
    """Extract (sub, pi ell [+ nbar]) and form the quotient g / (sub, ell).

    Returns (vacuum part, quotient).  The vacuum part is `sub` with node
    decoration (pi ell)(v) = sum of ell over boundary half-edges at v (plus
    nbar, used by the coproduct's binomial splitting), one distinguished
    vertex per component (lowest index).  In the quotient each component of
    `sub` collapses to its lowest vertex, adjacent edge labels pick up the
    derivative ell(e_src) + ell(e_tgt), legs in the boundary get their
    multiindex raised, and decorations of merged vertices accumulate (minus
    nbar).  A fully contracted vacuum component becomes the empty factor when
    its leftover decoration is zero; returns None when it is nonzero (the
    term vanishes).
    """
    ell = dict(ell or {})
    nbar = dict(nbar or {})
    d = g.dimension
    boundary = set(boundary_half_edges(sub))
    for h, k in ell.items():
        if mi.order(k) and h not in boundary:
            raise UnsupportedDecoration(f"ell supported off the boundary: {h}")

    verts = sorted(sub.vertices)
    vrank = {v: i for i, v in enumerate(verts)}
    pi_ell: dict[int, MultiIndex] = {}
    for h, k in ell.items():
        if mi.order(k) == 0:
            continue
        v = g.half_edge_vertex(h)
        pi_ell[v] = mi.add(pi_ell.get(v, mi.zero(d)), k)
    vac_decor = {}
    for v in verts:
        tot = mi.add(pi_ell.get(v, mi.zero(d)), nbar.get(v, mi.zero(d)))
        if mi.order(tot):
            vac_decor[vrank[v]] = tot
    comp_rep = {}
    vac_dist = []
    for comp in sub.components:
        cverts = sorted(Subgraph(g, comp).vertices)
        rep = cverts[0]
        for v in cverts:
            comp_rep[v] = rep
        vac_dist.append(vrank[rep])
    vacuum = FeynmanDiagram(
        d,
        len(verts),
        tuple(
            Edge(vrank[e.src], vrank[e.tgt], e.label, e.deriv)
            for i, e in enumerate(g.edges)
            if i in sub.edge_ids
        ),
        (),
        tuple(sorted(vac_decor.items())),
        tuple(vac_dist),
    )

    # quotient: merged representatives plus untouched vertices
    def image(v: int) -> int:
        return comp_rep.get(v, v)

    new_decor: dict[int, list[int]] = {}
    for v in range(g.n_vertices):
        k = g.decor(v)
        if v in sub.vertices:
            k = mi.sub(k, nbar.get(v, mi.zero(d)))
        if mi.order(k):
            w = image(v)
            new_decor[w] = mi.add(new_decor.get(w, mi.zero(d)), k)

    kept = sorted(set(range(g.n_vertices)) - sub.vertices | set(comp_rep.values()))
    # drop isolated fully-contracted vacuum components (empty factor), or kill
    # the whole term when they carry decoration
    incident = set()
    new_edges = []
    for i, e in enumerate(g.edges):
        if i in sub.edge_ids:
            continue
        k = mi.zero(d)
        ks = ell.get(HalfEdge("edge", i, "src"))
        kt = ell.get(HalfEdge("edge", i, "tgt"))
        if ks:
            k = mi.add(k, ks)
        if kt:
            k = mi.add(k, kt)
        new_edges.append(Edge(image(e.src), image(e.tgt), e.label, mi.add(e.deriv, k)))
        incident.add(image(e.src))
        incident.add(image(e.tgt))
    new_legs = []
    for i, leg in enumerate(g.legs):
        k = ell.get(HalfEdge("leg", i, "tgt")) or mi.zero(d)
        new_legs.append(Leg(image(leg.vertex), mi.add(leg.deriv, k)))
        incident.add(image(leg.vertex))
    dist_img = sorted({image(v) for v in g.distinguished})

    # isolated nodes (fully contracted components): the empty factor when
    # undecorated, the zero element when decorated
    final = []
    for v in kept:
        if v in incident:
            final.append(v)
        elif v in new_decor:
            return None
    rank = {v: i for i, v in enumerate(final)}
    quotient = FeynmanDiagram(
        d,
        len(final),
        tuple(Edge(rank[e.src], rank[e.tgt], e.label, e.deriv) for e in new_edges),
        tuple(Leg(rank[l.vertex], l.deriv) for l in new_legs),
        tuple(sorted((rank[v], k) for v, k in new_decor.items() if v in rank)),
        tuple(sorted(rank[v] for v in dist_img if v in rank)),
    )
    return vacuum, quotient


# -- leg operations, unions, gluing -------------------------------------------


def permute_legs(g: FeynmanDiagram, sigma: tuple[int, ...]) -> FeynmanDiagram:
    """Reorder legs: new leg i is the old leg sigma[i]."""
    if sorted(sigma) != list(range(g.n_legs)):
        raise DiagramError(f"not a permutation of {g.n_legs} legs: {sigma}")
    return FeynmanDiagram(
        g.dimension,
        g.n_vertices,
        g.edges,
        tuple(g.legs[j] for j in sigma),
        g.decorations,
        g.distinguished,
    )


def disjoint_union(g1: FeynmanDiagram, g2: FeynmanDiagram) -> FeynmanDiagram:
    if g1.dimension != g2.dimension:
        raise DiagramError("dimension mismatch in disjoint union")
    off = g1.n_vertices
    return FeynmanDiagram(
        g1.dimension,
        g1.n_vertices + g2.n_vertices,
        g1.edges + tuple(Edge(e.src + off, e.tgt + off, e.label, e.deriv) for e in g2.edges),
        g1.legs + tuple(Leg(l.vertex + off, l.deriv) for l in g2.legs),
        g1.decorations + tuple((v + off, k) for v, k in g2.decorations),
        g1.distinguished + tuple(v + off for v in g2.distinguished),
    )


def swap_permutation(k: int, ell: int) -> tuple[int, ...]:
    """The permutation with sigma(g2 • g1) = g1 • g2 for k and ell legs."""
    return tuple(range(ell, ell + k)) + tuple(range(ell))


def glue(g: FeynmanDiagram) -> FeynmanDiagram:
    """Identify all distinguished vertices of a vacuum diagram into one;
    decorations add up at the merged vertex."""
    if not g.is_vacuum:
        raise DiagramError("glue requires a vacuum diagram")
    if g.is_empty or len(g.distinguished) <= 1:
        return g
    rep = min(g.distinguished)
    merged = set(g.distinguished)

    def image(v: int) -> int:
        return rep if v in merged else v

    kept = sorted({image(v) for v in range(g.n_vertices)})
    rank = {v: i for i, v in enumerate(kept)}
    decor: dict[int, MultiIndex] = {}
    for v, k in g.decorations:
        w = rank[image(v)]
        decor[w] = mi.add(decor.get(w, mi.zero(g.dimension)), k)
    return FeynmanDiagram(
        g.dimension,
        len(kept),
        tuple(Edge(rank[image(e.src)], rank[image(e.tgt)], e.label, e.deriv) for e in g.edges),
        (),
        tuple(sorted(decor.items())),
        (rank[rep],),
    )


# -- large-scale degrees -------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """A partition of the internal vertices into at least two blocks."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        object.__setattr__(self, "blocks", tuple(sorted(blocks)))

    def block_of(self, v: int) -> int:
        for i, b in enumerate(self.blocks):
            if v in b:
                return i
        raise DiagramError(f"vertex {v} not covered by partition")


def _set_partitions(items: list[int]):
    """All set partitions, deterministically (first item anchors its block)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def tight_partitions(g: FeynmanDiagram):
    """Partitions of the internal vertices (>= 2 blocks) with all
    leg-attachment vertices in a single block."""
    if g.n_vertices < 2:
        raise TooFewVertices("partitions need at least two internal vertices")
    leg_verts = {leg.vertex for leg in g.legs}
    for part in _set_partitions(list(range(g.n_vertices))):
        if len(part) < 2:
            continue
        if leg_verts:
            holders = {i for i, b in enumerate(part) if leg_verts & set(b)}
            if len(holders) != 1 or not leg_verts <= set(part[next(iter(holders))]):
                continue
        yield Partition(tuple(tuple(b) for b in part))


def deg_infinity(p: Partition, g: FeynmanDiagram, labels: LabelTable):
    """deg_inf of a partition: crossing-edge large-scale degrees plus
    d(|blocks| - 1).  Returns a Fraction, or -inf."""
    total: Fraction | float = Fraction(labels.dimension) * (len(p.blocks) - 1)
    for e in g.edges:
        if p.block_of(e.src) != p.block_of(e.tgt):
            di = labels.deg_inf(e.label, e.deriv)
            if di == NEG_INF:
                return NEG_INF
            total += di
    return total


def in_H_plus(g: FeynmanDiagram, labels: LabelTable) -> bool:
    """True when every tight partition has strictly negative deg_inf
    (vacuously true when there are no tight partitions)."""
    if g.n_vertices < 2:
        return True
    for p in tight_partitions(g):
        if not deg_infinity(p, g, labels) < 0:
            return False
    return True
