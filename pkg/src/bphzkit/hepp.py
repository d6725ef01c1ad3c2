"""Multiscale diagnostics: merge trees of point configurations, per-forest
scale statistics, safe/unsafe classification and the forest-interval
partition they induce.

This module feeds no numbers into the valuations; it verifies the
combinatorial backbone (ultrametric distances, the partition of the full
forest set into intervals) on concrete configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .diagram import FeynmanDiagram, Subgraph, connected_divergent_subgraphs, is_full
from .forests import Forest, ForestInterval, NotAForest, forests
from .labels import LabelTable


class DuplicatePoints(ValueError):
    pass


class NotFullForest(ValueError):
    pass


class NotSafe(ValueError):
    pass


@dataclass(frozen=True)
class HeppTree:
    """Single-linkage merge tree of a point configuration.

    Leaves are the vertex keys; inner nodes 0..n-2 carry integer scale labels
    that do not increase from leaves to root (node n-2 is the root).
    """

    leaves: tuple[int, ...]
    merge_children: tuple[tuple[int, int], ...]  # node i merges the two ids given
    # ids < n are leaves (indices into `leaves`), ids >= n are inner nodes n+i
    scales: tuple[int, ...]
    heights: tuple[float, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @cached_property
    def _parents(self) -> tuple[int, ...]:
        n = self.n_leaves
        parents = [-1] * (2 * n - 1)
        for i, (a, b) in enumerate(self.merge_children):
            parents[a] = n + i
            parents[b] = n + i
        return tuple(parents)

    def _leaf_id(self, v: int) -> int:
        return self.leaves.index(v)

    def ancestor(self, v: int, w: int) -> int:
        """Least common ancestor (inner node id - n_leaves) of two leaves."""
        if v == w:
            raise ValueError("common ancestor of a leaf with itself is the leaf")
        a, b = self._leaf_id(v), self._leaf_id(w)
        seen = set()
        while a != -1:
            seen.add(a)
            a = self._parents[a]
        while b not in seen:
            b = self._parents[b]
        return b - self.n_leaves

    def scale_of(self, v: int, w: int) -> int:
        return self.scales[self.ancestor(v, w)]

    def distance(self, v: int, w: int) -> float:
        """The ultrametric 2^(-scale at the common ancestor)."""
        if v == w:
            return 0.0
        return 2.0 ** (-self.scale_of(v, w))


def hepp_tree(points: dict[int, np.ndarray]) -> HeppTree:
    """Merge tree from the minimal spanning tree of the configuration, with
    scales ceil(-log2(merge distance)); ties broken by vertex index."""
    keys = tuple(sorted(points))
    if len(keys) < 2:
        raise ValueError("need at least two points")
    coords = np.array([np.atleast_1d(np.asarray(points[k], dtype=float)) for k in keys])
    n = len(keys)
    pair_edges = []
    for i in range(n):
        for j in range(i + 1, n):
            dist = float(np.linalg.norm(coords[i] - coords[j]))
            if dist == 0.0:
                raise DuplicatePoints(f"vertices {keys[i]} and {keys[j]} coincide")
            pair_edges.append((dist, i, j))
    pair_edges.sort()
    # Kruskal for the MST, then merge along MST edges in ascending order
    cluster = list(range(n))

    def find(a):
        while cluster[a] != a:
            cluster[a] = cluster[cluster[a]]
            a = cluster[a]
        return a

    mst = []
    for dist, i, j in pair_edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            cluster[max(ri, rj)] = min(ri, rj)
            mst.append((dist, i, j))
        if len(mst) == n - 1:
            break

    cluster = list(range(n))
    node_of = list(range(n))  # cluster representative -> current tree node id
    children = []
    scales = []
    heights = []
    for dist, i, j in sorted(mst):
        ri, rj = find(i), find(j)
        a, b = node_of[ri], node_of[rj]
        children.append((min(a, b), max(a, b)))
        scales.append(math.ceil(-math.log2(dist)))
        heights.append(dist)
        new = n + len(children) - 1
        cluster[max(ri, rj)] = min(ri, rj)
        node_of[min(ri, rj)] = new
    return HeppTree(keys, tuple(children), tuple(scales), tuple(heights))


def distance_bound_constant(n: int) -> float:
    """The sandwich constant 2(n-1): the merge distance at the common
    ancestor bounds the true distance within this factor."""
    return 2.0 * (n - 1)


# -- forest scale statistics -------------------------------------------------


@dataclass(frozen=True)
class ScaleRecord:
    element: frozenset[int]
    int_scale: float
    ext_scale: float

    @property
    def safe(self) -> bool:
        return self.ext_scale >= self.int_scale


@dataclass(frozen=True)
class ForestScales:
    forest: Forest
    records: tuple[ScaleRecord, ...]

    def record(self, element) -> ScaleRecord:
        element = frozenset(element)
        for r in self.records:
            if r.element == element:
                return r
        raise KeyError(f"no record for {sorted(element)}")

    @property
    def all_safe(self) -> bool:
        return all(r.safe for r in self.records)


def _remapped_ends(g: FeynmanDiagram, forest: Forest, edge_id: int) -> tuple[int, int]:
    """Both endpoints of an edge after collapsing forest elements: an
    endpoint inside an element that excludes the edge moves to the highest
    vertex of the innermost such element."""
    e = g.edges[edge_id]
    out = []
    for v in (e.src, e.tgt):
        containing = [
            el
            for el in forest.elements
            if edge_id not in el and v in Subgraph(g, el).vertices
        ]
        if containing:
            innermost = min(containing, key=lambda el: (len(el), sorted(el)))
            out.append(max(Subgraph(g, innermost).vertices))
        else:
            out.append(v)
    return out[0], out[1]


def forest_scales(
    g: FeynmanDiagram, forest: Forest, tree: HeppTree, labels: LabelTable
) -> ForestScales:
    """Internal and external scales of every forest element in a Hepp tree.

    The forest must consist of full subgraphs; the external scale of a root
    ranges over the internal edges of the whole diagram adjacent to it."""
    for el in forest.elements:
        if not is_full(Subgraph(g, el)):
            raise NotFullForest(f"element {sorted(el)} is not full")
    records = []
    all_edges = frozenset(range(len(g.edges)))

    def scale(edge_id: int) -> float:
        a, b = _remapped_ends(g, forest, edge_id)
        if a == b:
            return math.inf
        return float(tree.scale_of(a, b))

    for el in forest.sorted_elements:
        children = forest.children(el)
        own = el - frozenset().union(*children) if children else el
        int_scale = min((scale(i) for i in own), default=math.inf)
        parent = forest.parent_of(el)
        pool = parent if parent is not None else all_edges
        verts = Subgraph(g, el).vertices
        adjacent = [
            i
            for i in sorted(pool - el)
            if {g.edges[i].src, g.edges[i].tgt} & verts
        ]
        ext_scale = max((scale(i) for i in adjacent), default=-math.inf)
        records.append(ScaleRecord(el, int_scale, ext_scale))
    return ForestScales(forest, tuple(records))


def is_safe_forest(
    g: FeynmanDiagram, forest: Forest, tree: HeppTree, labels: LabelTable
) -> bool:
    return forest_scales(g, forest, tree, labels).all_safe


def unsafe_completion(
    g: FeynmanDiagram, safe: Forest, tree: HeppTree, labels: LabelTable
) -> Forest:
    """All full connected divergent subgraphs that are unsafe for the given
    safe forest (which must itself be safe)."""
    if not is_safe_forest(g, safe, tree, labels):
        raise NotSafe("base forest is not safe in this configuration")
    unsafe = []
    for sub, _ in connected_divergent_subgraphs(g, labels):
        if not is_full(sub):
            continue
        el = frozenset(sub.edge_ids)
        if el in safe.elements:
            continue
        try:
            extended = Forest(g, safe.elements | {el})
        except NotAForest:
            continue
        scales = forest_scales(g, extended, tree, labels)
        if not scales.record(el).safe:
            unsafe.append(el)
    return Forest(g, frozenset(unsafe))


def safe_decomposition(
    g: FeynmanDiagram, safe: Forest, tree: HeppTree, labels: LabelTable
) -> ForestInterval:
    """The interval [safe, safe + unsafe completion]."""
    return ForestInterval(safe, unsafe_completion(g, safe, tree, labels))


def interval_partition(
    g: FeynmanDiagram, tree: HeppTree, labels: LabelTable
) -> list[ForestInterval]:
    """One interval per safe full forest; partitions the set of full forests
    (verified by the caller or the test suite by exhaustive membership)."""
    out = []
    for forest in forests(g, labels, full_only=True):
        if is_safe_forest(g, forest, tree, labels):
            out.append(safe_decomposition(g, forest, tree, labels))
    return out
