"""Adaptive tensor Gauss-Legendre quadrature over axis-aligned boxes.

Batched and deterministic: pending boxes are evaluated in one vectorised call
per wave, the worst boxes split along their widest side, and the final sum
runs in creation order with math.fsum.  Rule orders are even so no node ever
sits at a box centre (where integrands may be singular at epsilon = 0).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np


class QuadratureFailure(RuntimeError):
    def __init__(self, message: str, value: float, error: float):
        super().__init__(f"{message} (value={value:.6e}, error={error:.3e})")
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_boxes: int = 400_000
    domain_radius: float = 8.0
    max_side: float = 2.0  # initial boxes are presplit to at most this width

    def __post_init__(self):
        if self.rel_tol <= 0 and self.abs_tol <= 0:
            raise ValueError("tolerance must be positive")

    def key(self) -> tuple:
        return (self.rel_tol, self.abs_tol, self.max_boxes, self.domain_radius, self.max_side)


_ORDERS = {1: (16, 10), 2: (12, 8), 3: (10, 6), 4: (8, 6), 5: (6, 4), 6: (6, 4)}

_rule_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _tensor_rule(n_dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (m, n_dim) and weights (m,) of the tensor rule on [-1,1]^n."""
    key = (n_dim, order)
    if key not in _rule_cache:
        x, w = np.polynomial.legendre.leggauss(order)
        grids = np.meshgrid(*([x] * n_dim), indexing="ij")
        nodes = np.stack([g.reshape(-1) for g in grids], axis=-1)
        weights = np.ones(order**n_dim)
        wg = np.meshgrid(*([w] * n_dim), indexing="ij")
        for g in wg:
            weights = weights * g.reshape(-1)
        _rule_cache[key] = (nodes, weights)
    return _rule_cache[key]


class _Box:
    __slots__ = ("lo", "hi", "val", "err", "counter")

    def __init__(self, lo, hi, counter):
        self.lo = lo
        self.hi = hi
        self.val = 0.0
        self.err = 0.0
        self.counter = counter


def _orders_for(n_dim: int) -> tuple[int, int]:
    if n_dim in _ORDERS:
        return _ORDERS[n_dim]
    return (4, 2)


def integrate(f, bounds, spec: QuadratureSpec) -> tuple[float, float]:
    """Integrate f over the box `bounds` (array (n,2)).

    f maps an (N, n) array of points to an (N,) array of values.  Returns
    (value, error estimate); raises QuadratureFailure when the budget of
    spec.max_boxes is exhausted before the tolerance is met.
    """
    bounds = np.asarray(bounds, dtype=float)
    n_dim = bounds.shape[0]
    if n_dim == 0:
        val = float(f(np.zeros((1, 0)))[0])
        return val, 0.0
    if np.any(bounds[:, 1] <= bounds[:, 0]):
        return 0.0, 0.0
    hi_order, lo_order = _orders_for(n_dim)
    nodes_hi, weights_hi = _tensor_rule(n_dim, hi_order)
    nodes_lo, weights_lo = _tensor_rule(n_dim, lo_order)
    m_hi = len(weights_hi)

    counter = 0
    pending: list[_Box] = []
    for lo, hi in _presplit(bounds, spec.max_side):
        pending.append(_Box(lo, hi, counter))
        counter += 1

    def evaluate(batch: list[_Box]):
        pts = []
        for b in batch:
            mid = (b.lo + b.hi) / 2.0
            half = (b.hi - b.lo) / 2.0
            pts.append(mid + nodes_hi * half)
            pts.append(mid + nodes_lo * half)
        vals = f(np.concatenate(pts, axis=0))
        if not np.all(np.isfinite(vals)):
            # singular nodes are measure zero; drop them rather than poison a box
            vals = np.where(np.isfinite(vals), vals, 0.0)
        off = 0
        for b in batch:
            scale = float(np.prod((b.hi - b.lo) / 2.0))
            vh = float(weights_hi @ vals[off : off + m_hi]) * scale
            off += m_hi
            vl = float(weights_lo @ vals[off : off + len(weights_lo)]) * scale
            off += len(weights_lo)
            b.val = vh
            b.err = abs(vh - vl)

    evaluate(pending)
    heap: list[tuple[float, int, _Box]] = []
    done: list[_Box] = []
    total_val = 0.0
    total_err = 0.0
    for b in pending:
        heapq.heappush(heap, (-b.err, b.counter, b))
        total_val += b.val
        total_err += b.err

    n_boxes = len(pending)
    while True:
        tol = max(spec.abs_tol, spec.rel_tol * abs(total_val))
        if total_err <= tol or not heap:
            break
        if n_boxes >= spec.max_boxes:
            value, error = _final_sum(heap, done)
            raise QuadratureFailure("quadrature box budget exhausted", value, error)
        batch_boxes: list[_Box] = []
        take = min(64, max(1, len(heap) // 4))
        while heap and len(batch_boxes) < take:
            neg_err, _, b = heapq.heappop(heap)
            if -neg_err <= tol / max(1, 4 * n_boxes):
                done.append(b)
                continue
            batch_boxes.append(b)
        if not batch_boxes:
            break
        children: list[_Box] = []
        for b in batch_boxes:
            total_val -= b.val
            total_err -= b.err
            axis = int(np.argmax(b.hi - b.lo))
            mid = (b.lo[axis] + b.hi[axis]) / 2.0
            lo2, hi2 = b.lo.copy(), b.hi.copy()
            hi2[axis] = mid
            children.append(_Box(b.lo, hi2, counter))
            counter += 1
            lo3 = b.lo.copy()
            lo3[axis] = mid
            children.append(_Box(lo3, b.hi, counter))
            counter += 1
        evaluate(children)
        n_boxes += len(children)
        for c in children:
            heapq.heappush(heap, (-c.err, c.counter, c))
            total_val += c.val
            total_err += c.err
    return _final_sum(heap, done)


def _final_sum(heap, done) -> tuple[float, float]:
    boxes = [b for _, _, b in heap] + list(done)
    boxes.sort(key=lambda b: b.counter)
    value = math.fsum(b.val for b in boxes)
    error = math.fsum(b.err for b in boxes)
    return value, error


def _presplit(bounds: np.ndarray, max_side: float):
    """Split the initial box so no side exceeds max_side (capped count)."""
    n_dim = bounds.shape[0]
    pieces_per_axis = []
    for i in range(n_dim):
        width = bounds[i, 1] - bounds[i, 0]
        pieces = max(1, int(math.ceil(width / max_side)))
        pieces_per_axis.append(min(pieces, 16))
    while np.prod(pieces_per_axis) > 4096:
        pieces_per_axis[int(np.argmax(pieces_per_axis))] -= 1
    grids = []
    for i, pieces in enumerate(pieces_per_axis):
        edges = np.linspace(bounds[i, 0], bounds[i, 1], pieces + 1)
        grids.append([(edges[j], edges[j + 1]) for j in range(pieces)])
    import itertools

    for combo in itertools.product(*grids):
        lo = np.array([c[0] for c in combo])
        hi = np.array([c[1] for c in combo])
        yield lo, hi
