"""Structural property checks of the renormalised valuation: algebra
morphism behaviour, leg deletion, the convolution identity, self-loop
vanishing, generalised self-loop factorisation, and the polynomial
vanishing statement."""

from __future__ import annotations

import math

import numpy as np

from .diagram import Edge, FeynmanDiagram, Leg, disjoint_union, permute_legs
from .fixtures import build_fixture
from .formal import FormalSum
from .quadrature import QuadratureSpec, integrate
from .relations import delete_leg, star_compose
from .testfns import TestFunction, collision_bump, cylinder, poly_times_bump, product_bump, sum_bump
from .valuation import Evaluator


def _report(name: str, passed: bool, value: float, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "value": float(value), "detail": detail}


def tensor_test_function(phi1: TestFunction, phi2: TestFunction) -> TestFunction:
    """The product function phi1 (x) phi2 on k1 + k2 arguments."""
    k1, k2 = phi1.arity, phi2.arity
    from .testfns import Factor

    factors = tuple(
        Factor(f.coeffs + (0.0,) * k2, f.shift, f.profile, f.radius, f.power)
        for f in phi1.factors
    ) + tuple(
        Factor((0.0,) * k1 + f.coeffs, f.shift, f.profile, f.radius, f.power)
        for f in phi2.factors
    )
    return TestFunction(phi1.dimension, k1 + k2, factors)


def check_multiplicativity(quad: QuadratureSpec, tol: float) -> dict:
    # a milder mollification keeps the four-dimensional joint integral cheap
    doc = build_fixture("e1_32")
    ev = Evaluator(doc.assignment(epsilon=0.25),
                   QuadratureSpec(rel_tol=1e-8, abs_tol=3e-9, max_boxes=quad.max_boxes))
    g = doc.diagram
    union = disjoint_union(g, g)
    phi1 = product_bump(1, [(0.0,), (0.1,)], [0.8, 0.8])
    phi2 = product_bump(1, [(-0.1,), (0.2,)], [0.7, 0.9])
    both = tensor_test_function(phi1, phi2)
    v1 = ev.bphz(g, phi1).value
    v2 = ev.bphz(g, phi2).value
    v12 = ev.bphz(union, both).value
    gap = abs(v12 - v1 * v2) / max(1.0, abs(v1 * v2))
    return _report("disjoint-union multiplicativity", gap <= tol, gap,
                   f"product={v1 * v2:.10g} joint={v12:.10g}")


def check_permutation(quad: QuadratureSpec, tol: float) -> dict:
    doc = build_fixture("par")
    ev = Evaluator(doc.assignment(), quad)
    g = doc.diagram
    sigma = (1, 0)
    phi = product_bump(1, [(0.15,), (-0.2,)], [1.0, 0.8])
    a = ev.bphz(permute_legs(g, sigma), phi).value
    b = ev.bphz(g, phi.permuted(sigma)).value
    gap = abs(a - b) / max(1.0, abs(b))
    return _report("leg-permutation equivariance", gap <= tol, gap, f"{a:.10g} vs {b:.10g}")


def check_leg_deletion(quad: QuadratureSpec, tol: float) -> dict:
    doc = build_fixture("e1_32")
    ev = Evaluator(doc.assignment(), quad)
    g = doc.diagram
    reduced = delete_leg(g, 1)
    ((g1, _),) = tuple(reduced)
    phi = product_bump(1, [(0.0,)], [1.0])
    a = ev.bphz(g1, phi).value
    b = ev.bphz(g, cylinder(phi)).value
    gap = abs(a - b) / max(1.0, abs(b))
    return _report("leg deletion identity", gap <= tol, gap, f"{a:.10g} vs {b:.10g}")


def check_star_identity(quad: QuadratureSpec, tol: float, n_grid: int = 7) -> dict:
    doc = build_fixture("ch2")
    labels = doc.labels
    K = doc.assignment()
    ev = Evaluator(K, quad)
    e1 = FeynmanDiagram(1, 2, (Edge(0, 1, "c1", (0,)),), (Leg(0, (0,)), Leg(1, (0,))))
    e2 = FeynmanDiagram(1, 2, (Edge(0, 1, "c2", (0,)),), (Leg(0, (0,)), Leg(1, (0,))))
    star = star_compose(e1, e2)
    ((chain, coeff),) = tuple(star)
    assert coeff == 1 and chain == doc.diagram
    ws = np.linspace(0.15, 1.6, n_grid)[:, None]
    lhs, lhs_err, _ = ev.bphz_pointwise(chain, ws)
    d1, _, c1 = ev.bphz_pointwise(e1, ws)
    d2, _, c2 = ev.bphz_pointwise(e2, ws)
    f1 = ev.density_fn(e1)
    f2 = ev.density_fn(e2)
    rhs = np.zeros(len(ws))
    for i, w in enumerate(ws):
        conv, _ = integrate(
            lambda Z, w=w: f1(Z) * f2(w[None, :] - Z), np.array([[-1.0, 1.0]]), quad
        )
        rhs[i] = conv + c1 * float(f2(w[None, :])[0]) + c2 * float(f1(w[None, :])[0])
    gap = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
    return _report("star convolution identity", gap <= tol, gap,
                   f"max pointwise gap over {n_grid} separations")


def check_self_loop(quad: QuadratureSpec, tol: float) -> dict:
    doc = build_fixture("sl")
    ev = Evaluator(doc.assignment(), quad)
    phi = product_bump(1, [(0.0,)], [1.0])
    rep = ev.bphz(doc.diagram, phi)
    return _report("self-loop vanishing", abs(rep.value) <= tol, abs(rep.value),
                   f"value={rep.value:.3e} err={rep.error_estimate:.1e}")


def check_generalised_self_loop(quad: QuadratureSpec, tol: float) -> dict:
    doc = build_fixture("gsl")
    ev = Evaluator(doc.assignment(), quad)
    g = doc.diagram
    base = FeynmanDiagram(1, 2, (g.edges[0],), g.legs)
    phis = [
        product_bump(1, [(0.0,), (0.1,)], [1.0, 1.0]),
        product_bump(1, [(0.2,), (-0.1,)], [0.7, 1.2]),
    ]
    ratios = []
    for phi in phis:
        num = ev.bphz(g, phi).value
        den = ev.bphz(base, phi).value
        ratios.append(num / den)
    gap = abs(ratios[0] - ratios[1]) / max(1.0, abs(ratios[0]))
    # the factored constant is the loop's vacuum constant
    from .diagram import Edge

    loop = FeynmanDiagram(1, 2, (Edge(0, 1, "b", (0,)), Edge(1, 0, "b", (0,))), (), (), (0,))
    cgamma, _ = ev.vacuum(loop)
    const_gap = abs(ratios[0] - cgamma) / max(1.0, abs(cgamma))
    passed = gap <= tol and const_gap <= 100 * tol
    return _report("generalised self-loop factorisation", passed, gap,
                   f"ratios {ratios[0]:.10g} / {ratios[1]:.10g}, loop constant {cgamma:.10g}")


def check_poly_vanishing(quad: QuadratureSpec, tol: float) -> dict:
    doc = build_fixture("e1_54")
    ev = Evaluator(doc.assignment(), quad)
    phi = poly_times_bump(1, 2, ((0,), (0,)), diff_radius=2.5, sum_radius=1.0)
    v1 = abs(ev.bphz(doc.diagram, phi).value)
    tri = build_fixture("tri")
    ev2 = Evaluator(tri.assignment(), quad)
    v2 = abs(ev2.bphz(tri.diagram, sum_bump(1, 1, (0.0,), 1.0)).value)
    worst = max(v1, v2)
    return _report("polynomial vanishing", worst <= tol, worst,
                   f"two-leg {v1:.2e}, one-leg {v2:.2e}")


def property_suite(quad: QuadratureSpec | None = None, tol: float = 1e-7) -> dict:
    """Run every structural check; `passed` is the conjunction."""
    quad = quad or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-10)
    checks = [
        check_multiplicativity(quad, tol),
        check_permutation(quad, tol),
        check_leg_deletion(quad, tol),
        check_star_identity(quad, tol),
        check_self_loop(quad, tol),
        check_generalised_self_loop(quad, tol),
        check_poly_vanishing(quad, tol),
    ]
    return {"checks": checks, "passed": all(c["passed"] for c in checks)}
