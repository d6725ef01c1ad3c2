"""Smooth compactly supported test functions with exact derivatives.

A TestFunction on (R^d)^k is a product of factors; each factor applies a
radial profile (bump, one-minus-bump) or a monomial to an affine combination
u = sum_i c_i y_i + shift of the arguments.  Derivatives are expanded by the
Leibniz rule across factors and evaluated in closed form, so no numerical
differentiation enters the valuations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import multiindex as mi
from .multiindex import MultiIndex


@dataclass(frozen=True)
class Factor:
    coeffs: tuple[float, ...]  # one scalar per argument
    shift: tuple[float, ...]  # offset in R^d
    profile: str  # "bump" | "one_minus_bump" | "monomial"
    radius: float = 1.0
    power: MultiIndex = ()

    def u(self, ys: np.ndarray) -> np.ndarray:
        """Affine combination of the arguments; ys has shape (N, k, d)."""
        out = np.broadcast_to(np.asarray(self.shift, float), ys.shape[::2]).copy()
        for i, c in enumerate(self.coeffs):
            if c:
                out += c * ys[:, i, :]
        return out

    def eval(self, m: MultiIndex, u: np.ndarray) -> np.ndarray:
        if self.profile == "monomial":
            coeff = mi.falling(self.power, m)
            if coeff == 0:
                return np.zeros(u.shape[0])
            return coeff * mi.monomial(u, mi.sub(self.power, m))
        if self.profile in ("bump", "one_minus_bump"):
            val = _bump_deriv(m, u, self.radius)
            if self.profile == "one_minus_bump":
                return (1.0 - val) if mi.order(m) == 0 else -val
            return val
        if self.profile in ("plateau", "one_minus_plateau"):
            from .kernels import RadialPower
            from fractions import Fraction

            ramp = RadialPower(len(m), Fraction(0), 0.0, (self.radius / 2.0, self.radius))
            val = ramp.eval(m, u)
            if self.profile == "one_minus_plateau":
                return (1.0 - val) if mi.order(m) == 0 else -val
            return val
        raise ValueError(f"unknown profile {self.profile!r}")


def _bump_deriv(m: MultiIndex, u: np.ndarray, radius: float) -> np.ndarray:
    """D^m of exp(-1/(1-|u/r|^2)) (0 outside |u| < r), |m| <= 2."""
    s = np.sum(u * u, axis=-1) / radius**2
    inside = s < 1.0
    out = np.zeros(s.shape)
    si = s[inside]
    one = 1.0 - si
    base = np.exp(-1.0 / one)
    order = mi.order(m)
    if order == 0:
        out[inside] = base
        return out
    g1 = -1.0 / one**2  # d/ds of -1/(1-s)
    t = 2.0 * u[inside] / radius**2  # d s / d u_a
    if order == 1:
        axis = m.index(1)
        out[inside] = base * g1 * t[:, axis]
        return out
    if order == 2:
        g2 = -2.0 / one**3
        axes = [a for a, c in enumerate(m) for _ in range(c)]
        a, b = axes
        val = base * (g1 * g1 + g2) * t[:, a] * t[:, b]
        if a == b:
            val += base * g1 * 2.0 / radius**2
        out[inside] = val
        return out
    raise NotImplementedError(f"bump derivative of order {order} not implemented")


@dataclass(frozen=True)
class TestFunction:
    """Product of factors on (R^d)^k."""

    dimension: int
    arity: int
    factors: tuple[Factor, ...]

    @property
    def key(self) -> tuple:
        return (self.dimension, self.arity, self.factors)

    def __call__(self, ys) -> np.ndarray:
        return self.eval(tuple(mi.zero(self.dimension) for _ in range(self.arity)), ys)

    def eval(self, derivs: tuple[MultiIndex, ...], ys) -> np.ndarray:
        """D_1^{derivs[0]} ... D_k^{derivs[k-1]} of the function at points ys
        of shape (N, k, d)."""
        ys = np.asarray(ys, dtype=float)
        if ys.ndim == 2:
            ys = ys[None, :, :]
        us = [f.u(ys) for f in self.factors]
        total = np.zeros(ys.shape[0])
        for scale, ms in _leibniz(self.factors, tuple(derivs), self.dimension):
            val = np.full(ys.shape[0], scale)
            for f, m, u in zip(self.factors, ms, us):
                val = val * f.eval(m, u)
            total += val
        return total

    def shifted(self, h) -> "TestFunction":
        """Translate every argument by h (kernel of translation invariance)."""
        h = tuple(float(x) for x in h)
        factors = []
        for f in self.factors:
            delta = tuple(
                s + sum(f.coeffs) * hx for s, hx in zip(f.shift, h, strict=True)
            )
            factors.append(Factor(f.coeffs, delta, f.profile, f.radius, f.power))
        return TestFunction(self.dimension, self.arity, tuple(factors))

    def permuted(self, sigma: tuple[int, ...]) -> "TestFunction":
        """The function (y_1..y_k) -> f(y_{sigma[0]}, ..., y_{sigma[k-1]});
        valuations are equivariant for this together with permute_legs."""
        factors = []
        for f in self.factors:
            coeffs = [0.0] * self.arity
            for i, c in enumerate(f.coeffs):
                coeffs[sigma[i]] = c
            factors.append(Factor(tuple(coeffs), f.shift, f.profile, f.radius, f.power))
        return TestFunction(self.dimension, self.arity, tuple(factors))

    def arg_box(self, i: int) -> np.ndarray | None:
        """A bounding box (d,2) for argument i implied by a bump factor
        touching only this argument; None when unconstrained."""
        for f in self.factors:
            if f.profile != "bump":
                continue
            if f.coeffs[i] == 0.0 or any(c != 0.0 for j, c in enumerate(f.coeffs) if j != i):
                continue
            c = f.coeffs[i]
            lo = np.array([(-s - f.radius) / c for s in f.shift])
            hi = np.array([(-s + f.radius) / c for s in f.shift])
            return np.stack([np.minimum(lo, hi), np.maximum(lo, hi)], axis=-1)
        return None

    def linear_constraints(self):
        """All bump-factor constraints as (coeffs, shift, radius): the support
        satisfies |sum_i coeffs[i] y_i + shift| <= radius."""
        return [
            (f.coeffs, np.asarray(f.shift), f.radius)
            for f in self.factors
            if f.profile == "bump"
        ]


@lru_cache(maxsize=4096)
def _leibniz(factors: tuple[Factor, ...], derivs: tuple[MultiIndex, ...], d: int):
    units = [
        (i, axis)
        for i, k in enumerate(derivs)
        for axis, reps in enumerate(k)
        for _ in range(reps)
    ]
    terms = [(1.0, tuple(mi.zero(d) for _ in factors))]
    for arg, axis in units:
        new = []
        for scale, ms in terms:
            for fi, f in enumerate(factors):
                c = f.coeffs[arg]
                if c == 0.0:
                    continue
                bumped = ms[:fi] + (mi.add(ms[fi], mi.unit(d, axis)),) + ms[fi + 1 :]
                new.append((scale * c, bumped))
        terms = new
    # collect like terms for determinism and speed
    acc: dict[tuple, float] = {}
    for scale, ms in terms:
        acc[ms] = acc.get(ms, 0.0) + scale
    return tuple((scale, ms) for ms, scale in sorted(acc.items(), key=lambda kv: kv[0]))


# -- constructors ---------------------------------------------------------------


def product_bump(d: int, centers, radii) -> TestFunction:
    """phi(y_1..y_k) = prod_i bump((y_i - c_i)/r_i)."""
    centers = [tuple(float(x) for x in c) for c in centers]
    k = len(centers)
    factors = []
    for i, (c, r) in enumerate(zip(centers, radii, strict=True)):
        coeffs = tuple(1.0 if j == i else 0.0 for j in range(k))
        factors.append(Factor(coeffs, tuple(-x for x in c), "bump", float(r)))
    return TestFunction(d, k, tuple(factors))


def sum_bump(d: int, k: int, center, radius: float) -> TestFunction:
    """phi depending only on y_1 + ... + y_k (a bump in the sum)."""
    center = tuple(float(x) for x in center)
    return TestFunction(
        d, k, (Factor((1.0,) * k, tuple(-x for x in center), "bump", float(radius)),)
    )


def poly_times_bump(d: int, k: int, power_by_arg: tuple[MultiIndex, ...],
                    diff_radius: float, sum_radius: float) -> TestFunction:
    """phi0 * phi1 with phi1 a bump in y_1+..+y_k and phi0 *equal* near the
    diagonal to the polynomial prod_{i>=2} (y_i - y_1)^{m_i}.

    power_by_arg[0] must be zero; phi0 uses plateau cutoffs in the
    differences, identically the polynomial for |y_i - y_1| <= diff_radius/2.
    """
    factors = [Factor((1.0,) * k, mi.zero(d), "bump", float(sum_radius))]
    for i in range(1, k):
        coeffs = tuple(1.0 if j == i else (-1.0 if j == 0 else 0.0) for j in range(k))
        if mi.order(power_by_arg[i]):
            factors.append(Factor(coeffs, mi.zero(d), "monomial", power=power_by_arg[i]))
        factors.append(Factor(coeffs, mi.zero(d), "plateau", float(diff_radius)))
    return TestFunction(d, k, tuple(factors))


def collision_bump(d: int, centers, radii, group: tuple[int, ...], hole: float) -> TestFunction:
    """A product bump multiplied by plateau holes vanishing identically in a
    neighbourhood of the partial diagonal where the `group` arguments
    collide (all pairwise differences below hole/2)."""
    base = product_bump(d, centers, radii)
    k = base.arity
    extra = []
    anchor = group[0]
    for i in group[1:]:
        coeffs = tuple(
            1.0 if j == i else (-1.0 if j == anchor else 0.0) for j in range(k)
        )
        extra.append(Factor(coeffs, mi.zero(d), "one_minus_plateau", float(hole)))
    return TestFunction(d, k, base.factors + tuple(extra))


def cylinder(base: TestFunction) -> TestFunction:
    """Extend to one more argument that the function ignores."""
    k = base.arity + 1
    factors = tuple(
        Factor(f.coeffs + (0.0,), f.shift, f.profile, f.radius, f.power)
        for f in base.factors
    )
    return TestFunction(base.dimension, k, factors)
