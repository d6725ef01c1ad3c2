"""Numerical valuations: canonical, vacuum constants, BPHZ by three routes,
simple subtraction, large-scale variant, convergence studies and the
identity checks that only hold modulo the relation ideals.

An Evaluator owns the kernel assignment, quadrature settings and caches; the
vacuum constant of a subdiagram is computed once per canonical form no matter
how many forest terms mention it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import multiindex as mi
from .coaction import Character, coaction, twisted_antipode
from .diagram import FeynmanDiagram, Subgraph, connected_edge_subsets, degree, in_H_plus
from .formal import FormalSum, VacuumProduct
from .forests import forest_formula
from .kernels import KernelAssignment, SingularAtZero
from .labels import LabelTable
from .multiindex import MultiIndex
from .quadrature import QuadratureSpec, integrate
from .testfns import TestFunction


class SingularKernel(ValueError):
    pass


class NotInHPlus(ValueError):
    pass


class ArityMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationReport:
    value: float
    error_estimate: float
    term_breakdown: tuple[tuple[str, float], ...] = ()
    wall_ms: float = 0.0


def weinberg_condition(g: FeynmanDiagram, labels: LabelTable) -> bool:
    """True when every subgraph has strictly positive degree (so the
    canonical integral converges absolutely for every test function)."""
    for S in connected_edge_subsets(g):
        if degree(Subgraph(g, S), labels) <= 0:
            return False
    return True


class Evaluator:
    """Valuation engine for one kernel assignment.

    `use_tails` switches edge kernels to K + R; vacuum constants and
    counterterms always use the compactly supported part only.
    """

    def __init__(
        self,
        kernels: KernelAssignment,
        quad: QuadratureSpec | None = None,
        use_tails: bool = False,
    ):
        self.kernels = kernels
        self.labels = kernels.labels
        self.quad = quad or QuadratureSpec()
        self.use_tails = use_tails
        self._canon: dict = {}
        self._vac: dict = {}
        self._ct: dict = {}
        self._point: dict = {}

    # -- kernel access -----------------------------------------------------

    def _edge_eval(self, label: str, deriv: MultiIndex, tails: bool):
        self.kernels.check_order(deriv)
        small = self.kernels.small_scale(label)
        tail = self.kernels.tail(label) if tails else None
        if tail is None:
            return lambda x: small.eval(deriv, x)
        big = tail.for_dimension(self.kernels.dimension)
        return lambda x: small.eval(deriv, x) + big.eval(deriv, x)

    def _edge_reach(self, label: str, tails: bool) -> float:
        if tails and self.kernels.tail(label) is not None:
            rho = self.kernels.tail(label).rho
            return float(rho) if rho is not None else self.quad.domain_radius
        return 1.0

    def require_smooth(self):
        for s in self.kernels.specs:
            if s.epsilon == 0.0 and s.homogeneity < 0:
                raise SingularKernel(
                    f"label {s.label!r} has epsilon=0; smooth kernels required"
                )

    # -- support boxes -------------------------------------------------------

    def _vertex_bounds(self, g: FeynmanDiagram, phi: TestFunction | None,
                       pinned: dict[int, np.ndarray] | None = None,
                       tails: bool = False) -> np.ndarray:
        d = g.dimension
        D = self.quad.domain_radius
        lo = np.full((g.n_vertices, d), -D)
        hi = np.full((g.n_vertices, d), D)
        if pinned:
            for v, x in pinned.items():
                lo[v] = hi[v] = np.asarray(x, dtype=float)
        if phi is not None:
            for i, leg in enumerate(g.legs):
                box = phi.arg_box(i)
                if box is not None:
                    lo[leg.vertex] = np.maximum(lo[leg.vertex], box[:, 0])
                    hi[leg.vertex] = np.minimum(hi[leg.vertex], box[:, 1])
        reaches = [self._edge_reach(e.label, tails) for e in g.edges]
        constraints = phi.linear_constraints() if phi is not None else []
        for _ in range(max(3, g.n_vertices)):
            for e, r in zip(g.edges, reaches):
                lo[e.tgt] = np.maximum(lo[e.tgt], lo[e.src] - r)
                hi[e.tgt] = np.minimum(hi[e.tgt], hi[e.src] + r)
                lo[e.src] = np.maximum(lo[e.src], lo[e.tgt] - r)
                hi[e.src] = np.minimum(hi[e.src], hi[e.tgt] + r)
            for coeffs, shift, radius in constraints:
                verts = [g.legs[i].vertex for i in range(len(coeffs))]
                for i, ci in enumerate(coeffs):
                    if ci == 0.0:
                        continue
                    s_lo = np.zeros(d)
                    s_hi = np.zeros(d)
                    for j, cj in enumerate(coeffs):
                        if j == i or cj == 0.0:
                            continue
                        a = cj * lo[verts[j]]
                        b = cj * hi[verts[j]]
                        s_lo += np.minimum(a, b)
                        s_hi += np.maximum(a, b)
                    t_lo = (-radius - shift - s_hi)
                    t_hi = (radius - shift - s_lo)
                    a = t_lo / ci
                    b = t_hi / ci
                    lo[verts[i]] = np.maximum(lo[verts[i]], np.minimum(a, b))
                    hi[verts[i]] = np.minimum(hi[verts[i]], np.maximum(a, b))
        return np.stack([lo, hi], axis=-1)

    # -- canonical valuation --------------------------------------------------

    def canonical(self, g: FeynmanDiagram, phi: TestFunction) -> tuple[float, float]:
        """(value, error) of the canonical valuation against phi."""
        if g.is_vacuum and not g.is_empty:
            raise ArityMismatch("canonical valuation acts on legged diagrams")
        if phi.arity != g.n_legs:
            raise ArityMismatch(f"test function arity {phi.arity} != legs {g.n_legs}")
        if g.is_empty:
            return 1.0, 0.0
        key = (g.canonical_key, phi.key, self.use_tails)
        if key in self._canon:
            return self._canon[key]
        val, err = self._integrate_diagram(g, phi, self.use_tails)
        self._canon[key] = (val, err)
        return val, err

    def _integrate_diagram(self, g: FeynmanDiagram, phi: TestFunction, tails: bool):
        d = g.dimension
        n = g.n_vertices
        kerns = [self._edge_eval(e.label, e.deriv, tails) for e in g.edges]
        srcs = np.array([e.src for e in g.edges], dtype=int)
        tgts = np.array([e.tgt for e in g.edges], dtype=int)
        leg_vs = np.array([l.vertex for l in g.legs], dtype=int)
        derivs = tuple(l.deriv for l in g.legs)
        bounds = self._vertex_bounds(g, phi, tails=tails).reshape(n * d, 2)

        def f(P: np.ndarray) -> np.ndarray:
            X = P.reshape(-1, n, d)
            out = phi.eval(derivs, X[:, leg_vs, :])
            for k, (kern, a, b) in enumerate(zip(kerns, srcs, tgts)):
                out = out * kern(X[:, b, :] - X[:, a, :])
            return out

        return integrate(f, bounds, self.quad)

    # -- vacuum constants -------------------------------------------------------

    def vacuum(self, g: FeynmanDiagram) -> tuple[float, float]:
        """The vacuum constant (multiplicative over components)."""
        if not g.is_vacuum:
            raise ArityMismatch("vacuum valuation needs a vacuum diagram")
        if g.is_empty:
            return 1.0, 0.0
        val, err = 1.0, 0.0
        for comp in g.component_diagrams():
            v, e = self._vacuum_connected(comp)
            err = abs(err * v) + abs(val * e) + err * e
            val = val * v
        return val, err

    def vacuum_product(self, vp: VacuumProduct) -> tuple[float, float]:
        val, err = 1.0, 0.0
        for comp in vp:
            v, e = self._vacuum_connected(comp)
            err = abs(err * v) + abs(val * e) + err * e
            val = val * v
        return val, err

    def _vacuum_connected(self, g: FeynmanDiagram) -> tuple[float, float]:
        key = g.canonical_key
        if key in self._vac:
            return self._vac[key]
        (v_star,) = g.distinguished
        if mi.order(g.decor(v_star)):
            self._vac[key] = (0.0, 0.0)
            return self._vac[key]
        d = g.dimension
        kerns = [self._edge_eval(e.label, e.deriv, tails=False) for e in g.edges]
        if g.n_vertices == 1:
            x0 = np.zeros((1, d))
            val = 1.0
            for kern in kerns:
                val *= float(kern(x0)[0])
            self._vac[key] = (val, 0.0)
            return self._vac[key]
        free = [v for v in range(g.n_vertices) if v != v_star]
        pos = {v: i for i, v in enumerate(free)}
        bounds = self._vertex_bounds(
            g, None, pinned={v_star: np.zeros(d)}, tails=False
        )[free].reshape(len(free) * d, 2)
        decor = [(v, k) for v, k in g.decorations if v != v_star]

        def f(P: np.ndarray) -> np.ndarray:
            X = P.reshape(-1, len(free), d)
            out = np.ones(X.shape[0])
            for kern, e in zip(kerns, g.edges):
                a = X[:, pos[e.src], :] if e.src != v_star else np.zeros((X.shape[0], d))
                b = X[:, pos[e.tgt], :] if e.tgt != v_star else np.zeros((X.shape[0], d))
                out = out * kern(b - a)
            for v, k in decor:
                out = out * mi.monomial(X[:, pos[v], :], k)
            return out

        val, err = integrate(f, bounds, self.quad)
        self._vac[key] = (val, err)
        return val, err

    # -- BPHZ counterterm character ----------------------------------------------

    def counterterm(self, g: FeynmanDiagram) -> tuple[float, float]:
        """Pi_- of the twisted antipode of one connected vacuum diagram."""
        key = g.canonical_key
        if key in self._ct:
            return self._ct[key]
        total, terr = 0.0, 0.0
        for vp, c in twisted_antipode(g, self.labels):
            v, e = self.vacuum_product(vp)
            total += float(c) * v
            terr += abs(float(c)) * e
        self._ct[key] = (total, terr)
        return self._ct[key]

    def counterterm_product(self, vp: VacuumProduct) -> tuple[float, float]:
        val, err = 1.0, 0.0
        for comp in vp:
            v, e = self.counterterm(comp)
            err = abs(err * v) + abs(val * e) + err * e
            val = val * v
        return val, err

    def bphz_character(self) -> Character:
        """The counterterm character as a Character object."""
        return Character(lambda g: self.counterterm(g)[0], name="bphz-counterterm")

    # -- renormalised valuations ---------------------------------------------------

    def bphz(self, g: FeynmanDiagram, phi: TestFunction,
             route: str = "twisted-antipode") -> EvaluationReport:
        """BPHZ-renormalised valuation by one of the three routes."""
        self.require_smooth()
        t0 = time.perf_counter()
        if route == "twisted-antipode":
            terms = [
                (c, vp, q, True) for (vp, q), c in coaction(g, self.labels)
            ]
        elif route in ("forest-formula", "full-forest"):
            ts = forest_formula(g, self.labels, full_only=(route == "full-forest"))
            terms = [(c, vp, q, False) for (vp, q), c in ts]
        else:
            raise ValueError(f"unknown route {route!r}")
        total, terr = 0.0, 0.0
        breakdown = []
        vals = []
        for idx, (c, vp, q, use_ct) in enumerate(terms):
            cv, ce = (
                self.counterterm_product(vp) if use_ct else self.vacuum_product(vp)
            )
            qv, qe = self.canonical(q, phi)
            contrib = float(c) * cv * qv
            vals.append(contrib)
            terr += abs(float(c)) * (abs(ce * qv) + abs(cv * qe) + ce * qe)
            breakdown.append((f"term{idx}:{vp!r}|{q!r}", contrib))
        total = math.fsum(vals)
        return EvaluationReport(
            total, terr, tuple(breakdown), (time.perf_counter() - t0) * 1e3
        )

    def canonical_report(self, g: FeynmanDiagram, phi: TestFunction) -> EvaluationReport:
        t0 = time.perf_counter()
        v, e = self.canonical(g, phi)
        return EvaluationReport(v, e, (("canonical", v),), (time.perf_counter() - t0) * 1e3)

    def with_character(self, char: Character, g: FeynmanDiagram, phi: TestFunction) -> EvaluationReport:
        """(char (x) canonical) applied to the coaction."""
        t0 = time.perf_counter()
        total, terr = [], 0.0
        breakdown = []
        for (vp, q), c in coaction(g, self.labels):
            gv = float(char(vp))
            qv, qe = self.canonical(q, phi)
            contrib = float(c) * gv * qv
            total.append(contrib)
            terr += abs(float(c) * gv) * qe
            breakdown.append((f"{vp!r}|{q!r}", contrib))
        return EvaluationReport(
            math.fsum(total), terr, tuple(breakdown), (time.perf_counter() - t0) * 1e3
        )

    # -- large-scale valuation --------------------------------------------------------

    def large_scale(self, g: FeynmanDiagram, phi: TestFunction,
                    renormalised: bool = True) -> EvaluationReport:
        """Valuation with tail-extended kernels; the renormalised variant
        requires membership in the large-scale-safe subspace and uses
        compact-support counterterms."""
        if not self.use_tails:
            raise ValueError("large_scale needs an Evaluator with use_tails=True")
        if renormalised and not in_H_plus(g, self.labels):
            raise NotInHPlus("diagram fails the tight-partition condition")
        if not renormalised:
            return self.canonical_report(g, phi)
        return self.bphz(g, phi, route="twisted-antipode")

    # -- pointwise densities (two-leg diagrams) ------------------------------------------

    def pointwise(self, g: FeynmanDiagram, points: np.ndarray) -> tuple[float, float]:
        """Density of the canonical valuation at pinned leg positions.

        Legs must carry multiindex zero and sit at pairwise distinct vertices.
        """
        points = np.asarray(points, dtype=float)
        key = (g.canonical_key, points.tobytes(), self.use_tails)
        if key in self._point:
            return self._point[key]
        d = g.dimension
        leg_verts = [l.vertex for l in g.legs]
        if len(set(leg_verts)) != len(leg_verts):
            raise ArityMismatch("pointwise density needs legs at distinct vertices")
        if any(mi.order(l.deriv) for l in g.legs):
            raise ArityMismatch("pointwise density needs underived legs")
        pinned = {v: points[i] for i, v in enumerate(leg_verts)}
        free = [v for v in range(g.n_vertices) if v not in pinned]
        kerns = [self._edge_eval(e.label, e.deriv, self.use_tails) for e in g.edges]
        if not free:
            val = 1.0
            X = {v: pinned[v][None, :] for v in pinned}
            for kern, e in zip(kerns, g.edges):
                val *= float(kern(X[e.tgt] - X[e.src])[0])
            self._point[key] = (val, 0.0)
            return self._point[key]
        pos = {v: i for i, v in enumerate(free)}
        bounds = self._vertex_bounds(g, None, pinned=pinned, tails=self.use_tails)[
            free
        ].reshape(len(free) * d, 2)

        def f(P: np.ndarray) -> np.ndarray:
            X = P.reshape(-1, len(free), d)
            out = np.ones(X.shape[0])
            for kern, e in zip(kerns, g.edges):
                a = X[:, pos[e.src], :] if e.src in pos else np.broadcast_to(pinned[e.src], (X.shape[0], d))
                b = X[:, pos[e.tgt], :] if e.tgt in pos else np.broadcast_to(pinned[e.tgt], (X.shape[0], d))
                out = out * kern(b - a)
            return out

        val, err = integrate(f, bounds, self.quad)
        self._point[key] = (val, err)
        return val, err

    def density_fn(self, g: FeynmanDiagram):
        """Vectorised canonical density of a two-leg diagram as a function of
        the leg separation (first leg pinned at the origin)."""
        if g.n_legs != 2:
            raise ArityMismatch("density_fn is for two-leg diagrams")
        leg_verts = [l.vertex for l in g.legs]
        free = [v for v in range(g.n_vertices) if v not in leg_verts]
        if not free and len(set(leg_verts)) == 2:
            kerns = [self._edge_eval(e.label, e.deriv, self.use_tails) for e in g.edges]

            def fast(W: np.ndarray) -> np.ndarray:
                W = np.atleast_2d(np.asarray(W, dtype=float))
                X = {leg_verts[0]: np.zeros_like(W), leg_verts[1]: W}
                out = np.ones(W.shape[0])
                for kern, e in zip(kerns, g.edges):
                    out = out * kern(X[e.tgt] - X[e.src])
                return out

            return fast

        def slow(W: np.ndarray) -> np.ndarray:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            return np.array(
                [self.pointwise(g, np.stack([np.zeros_like(w), w]))[0] for w in W]
            )

        return slow

    def bphz_pointwise(self, g: FeynmanDiagram, separations) -> tuple[np.ndarray, np.ndarray, float]:
        """For a connected two-leg diagram: the renormalised density at leg
        separations w (first leg at 0), plus the coefficient of the delta
        part supported on the diagonal.

        Returns (densities, density error estimates, delta coefficient).
        """
        if g.n_legs != 2:
            raise ArityMismatch("pointwise BPHZ densities are for two-leg diagrams")
        seps = np.atleast_2d(np.asarray(separations, dtype=float))
        dens = np.zeros(len(seps))
        errs = np.zeros(len(seps))
        delta_coeff = 0.0
        for (vp, q), c in coaction(g, self.labels):
            cv, ce = self.counterterm_product(vp)
            leg_verts = [l.vertex for l in q.legs]
            if leg_verts[0] == leg_verts[1]:
                if any(mi.order(l.deriv) for l in q.legs):
                    raise ArityMismatch("derived delta terms not supported pointwise")
                delta_coeff += float(c) * cv
                continue
            for i, w in enumerate(seps):
                pv, pe = self.pointwise(q, np.stack([np.zeros_like(w), w]))
                dens[i] += float(c) * cv * pv
                errs[i] += abs(float(c)) * (abs(ce * pv) + abs(cv * pe))
        return dens, errs, delta_coeff


# -- the simple two-point subtraction ------------------------------------------------


def renorm_simple(
    kernels: KernelAssignment,
    label: str,
    phi: TestFunction,
    quad: QuadratureSpec | None = None,
    side: str = "subtract-at-y0",
) -> EvaluationReport:
    """Taylor-subtracted two-point valuation of the single-edge diagram, in
    the coordinates (base point, separation)."""
    if phi.arity != 2:
        raise ArityMismatch("renorm_simple needs a two-argument test function")
    quad = quad or QuadratureSpec()
    d = kernels.dimension
    spec = kernels.spec(label)
    deg = spec.homogeneity
    if spec.epsilon == 0.0 and deg <= -d - 1:
        raise SingularKernel(
            "subtraction of order |k| <= -d - deg does not make epsilon=0 integrable"
        )
    sub_orders = [
        k for n in range(0, max(-1, math.floor(-d - deg)) + 1) for k in mi.with_order(d, n)
    ]
    kern = kernels.small_scale(label)
    zero = mi.zero(d)
    t0 = time.perf_counter()

    base_arg = 0 if side == "subtract-at-y0" else 1
    other_arg = 1 - base_arg
    box_base = phi.arg_box(base_arg)
    box_other = phi.arg_box(other_arg)
    D = quad.domain_radius
    if box_base is None:
        box_base = np.stack([np.full(d, -D), np.full(d, D)], axis=-1)
    if box_other is not None:
        box_base = np.stack(
            [
                np.maximum(box_base[:, 0], box_other[:, 0] - 1.0),
                np.minimum(box_base[:, 1], box_other[:, 1] + 1.0),
            ],
            axis=-1,
        )
    w_box = np.stack([np.full(d, -1.0), np.full(d, 1.0)], axis=-1)
    bounds = np.concatenate([box_base, w_box], axis=0)
    sign = 1.0 if side == "subtract-at-y0" else -1.0

    def f(P: np.ndarray) -> np.ndarray:
        y = P[:, :d]
        w = P[:, d:]
        kv = kern.eval(zero, w)
        ys = np.zeros((len(P), 2, d))
        ys[:, base_arg, :] = y
        ys[:, other_arg, :] = y + sign * w
        val = phi.eval((zero, zero), ys)
        diag = np.zeros((len(P), 2, d))
        diag[:, 0, :] = y
        diag[:, 1, :] = y
        for k in sub_orders:
            dk = tuple(zero if i == base_arg else k for i in range(2))
            val = val - mi.monomial(sign * w, k) / mi.factorial(k) * phi.eval(dk, diag)
        return kv * val

    val, err = integrate(f, bounds, quad)
    return EvaluationReport(val, err, (("subtracted", val),), (time.perf_counter() - t0) * 1e3)


# -- studies and checks ---------------------------------------------------------------


def convergence_study(
    kernels: KernelAssignment,
    g: FeynmanDiagram,
    phi: TestFunction,
    epsilons: list[float],
    which: str = "canonical",
    quad: QuadratureSpec | None = None,
) -> dict:
    """Values along a decreasing epsilon ladder, successive differences and a
    least-squares fit of value against log(1/epsilon)."""
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilon list must be strictly decreasing")
    rows = []
    for eps in epsilons:
        ev = Evaluator(kernels.with_epsilon(eps), quad)
        if which == "canonical":
            rep = ev.canonical_report(g, phi)
        elif which == "bphz":
            rep = ev.bphz(g, phi)
        else:
            raise ValueError(f"unknown study {which!r}")
        rows.append({"epsilon": eps, "value": rep.value, "error": rep.error_estimate})
    values = [r["value"] for r in rows]
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    fit = None
    if len(values) >= 3:
        from scipy import stats

        x = np.log(1.0 / np.asarray(epsilons))
        res = stats.linregress(x, values)
        fit = {
            "slope": float(res.slope),
            "intercept": float(res.intercept),
            "stderr": float(res.stderr),
            "r_squared": float(res.rvalue) ** 2,
        }
    return {"rows": rows, "diffs": diffs, "fit": fit}


def ideal_annihilation_check(
    ev: Evaluator, generator: FormalSum, phi: TestFunction | None = None
) -> tuple[float, float]:
    """|valuation of an ideal generator|: canonical valuation for legged
    diagrams (against phi), vacuum constants otherwise.  Returns
    (residual, error estimate)."""
    total = []
    err = 0.0
    for g, c in generator:
        if g.is_vacuum:
            v, e = ev.vacuum(g)
        else:
            v, e = ev.canonical(g, phi)
        total.append(float(c) * v)
        err += abs(float(c)) * e
    return abs(math.fsum(total)), err
