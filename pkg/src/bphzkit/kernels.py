"""Mollified homogeneous singular kernels with exact derivatives.

Small-scale kernels have the form (|x|^2 + eps^2)^(a/2) * psi(|x|) with psi a
fixed quintic smoothstep equal to 1 on [0,1/2] and 0 from 1 on; large-scale
tails are (2 + |x|^2)^(b/2) with an optional smooth truncation at radius rho.
Derivatives are evaluated through a closed term recurrence on powers of
u = |x|^2 + shift times derivatives of the cutoff profile, never by numerical
differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import multiindex as mi
from .labels import NEG_INF, LabelTable
from .multiindex import MultiIndex


class DerivativeOrderExceeded(ValueError):
    pass


class SingularAtZero(ZeroDivisionError):
    pass


class NonIntegrable(ValueError):
    pass


def _smoothstep(s: np.ndarray, order: int) -> np.ndarray:
    """Quintic smoothstep 6s^5-15s^4+10s^3 and its derivatives on [0,1]."""
    if order == 0:
        return s**3 * (6.0 * s * s - 15.0 * s + 10.0)
    if order == 1:
        return 30.0 * s * s * (s - 1.0) ** 2
    if order == 2:
        return 60.0 * s * (s - 1.0) * (2.0 * s - 1.0)
    if order == 3:
        return 60.0 * (6.0 * s * s - 6.0 * s + 1.0)
    raise DerivativeOrderExceeded(f"smoothstep derivative order {order} not supported")


# term of a derivative expansion: coeff * u^p * x^m * cutoff^(j)(r) * r^(-q)
_Term = tuple[float, Fraction, MultiIndex, int, int]


@dataclass(frozen=True)
class RadialPower:
    """(|x|^2 + shift)^(exponent/2) times an optional radial cutoff profile
    that is 1 below r0 and 0 above r1."""

    dimension: int
    exponent: Fraction  # the full homogeneity a; the power of u is a/2
    shift: float
    cutoff: tuple[float, float] | None

    @property
    def support_radius(self) -> float | None:
        return self.cutoff[1] if self.cutoff else None

    def _base_terms(self) -> list[_Term]:
        return [(1.0, Fraction(self.exponent, 2), mi.zero(self.dimension), 0, 0)]

    def terms(self, k: MultiIndex) -> list[_Term]:
        terms = self._base_terms()
        for axis, reps in enumerate(k):
            for _ in range(reps):
                terms = self._differentiate(terms, axis)
        return terms

    def _differentiate(self, terms: list[_Term], axis: int) -> list[_Term]:
        d = self.dimension
        out: dict[tuple, float] = {}

        def add(c, p, m, j, q):
            if c == 0.0:
                return
            key = (p, m, j, q)
            out[key] = out.get(key, 0.0) + c

        delta = mi.unit(d, axis)
        for c, p, m, j, q in terms:
            add(c * 2.0 * float(p), p - 1, mi.add(m, delta), j, q)
            if m[axis]:
                add(c * m[axis], p, mi.sub(m, delta), j, q)
            if self.cutoff is not None:
                add(c, p, mi.add(m, delta), j + 1, q + 1)
            if q:
                add(-c * q, p, mi.add(m, delta), j, q + 2)
        return [(c, p, m, j, q) for (p, m, j, q), c in sorted(out.items(), key=lambda kv: repr(kv[0]))]

    def eval(self, k: MultiIndex, x: np.ndarray) -> np.ndarray:
        """D^k of the kernel at points x of shape (..., d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r2 = np.sum(x * x, axis=-1)
        u = r2 + self.shift
        r = np.sqrt(r2)
        out = np.zeros_like(r2)
        if self.cutoff is not None:
            r0, r1 = self.cutoff
            inside = r < r1
            ramp = inside & (r > r0)
            width = r1 - r0
        else:
            inside = np.ones(r2.shape, dtype=bool)
            ramp = None
        if self.shift == 0.0:
            at_origin = r2 == 0.0
        else:
            at_origin = None
        for c, p, m, j, q in self.terms(k):
            if j == 0:
                mask = inside
                if self.cutoff is None:
                    profile = 1.0
                else:
                    profile = np.ones(int(np.sum(mask)))
                    on_ramp = ramp[mask]
                    s = (r[mask][on_ramp] - r0) / width
                    profile[on_ramp] = 1.0 - _smoothstep(s, 0)
            else:
                if ramp is None or not np.any(ramp):
                    continue
                mask = ramp
                s = (r[mask] - r0) / width
                profile = -_smoothstep(s, j) / width**j
            um = u[mask]
            if at_origin is not None and float(p) < 0:
                um = np.where(at_origin[mask], np.inf, um)
            val = c * um ** float(p)
            if mi.order(m):
                val = val * mi.monomial(x[mask], m)
            if q:
                val = val / r[mask] ** q
            val = val * profile
            out[mask] += val
        return out


@dataclass(frozen=True)
class KernelSpec:
    """Mollified small-scale kernel for one base label."""

    label: str
    homogeneity: Fraction  # = deg of the label
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def radial(self) -> RadialPower:
        return RadialPower(0, self.homogeneity, self.epsilon**2, (0.5, 1.0))

    def for_dimension(self, d: int) -> RadialPower:
        return RadialPower(d, self.homogeneity, self.epsilon**2, (0.5, 1.0))


@dataclass(frozen=True)
class LargeScaleKernel:
    """Algebraically decaying tail for one base label, optionally truncated
    smoothly at radius rho (rho None means untruncated)."""

    label: str
    deg_inf: Fraction
    rho: float | None = None

    def for_dimension(self, d: int) -> RadialPower:
        cutoff = (self.rho / 2.0, float(self.rho)) if self.rho is not None else None
        return RadialPower(d, Fraction(self.deg_inf), 2.0, cutoff)


@dataclass(frozen=True)
class KernelAssignment:
    """Kernels for every base label of a table, with a derivative-order cap."""

    labels: LabelTable
    specs: tuple[KernelSpec, ...]
    tails: tuple[LargeScaleKernel, ...] = ()
    max_derivative_order: int = 2

    def __post_init__(self):
        names = {s.label for s in self.specs}
        for lab in self.labels.entries:
            if lab.name not in names:
                raise ValueError(f"no kernel for label {lab.name!r}")
        for s in self.specs:
            if s.homogeneity != self.labels.deg(s.label):
                raise ValueError(f"kernel homogeneity disagrees with label degree for {s.label!r}")

    @property
    def dimension(self) -> int:
        return self.labels.dimension

    def spec(self, name: str) -> KernelSpec:
        for s in self.specs:
            if s.label == name:
                return s
        raise KeyError(f"no kernel for label {name!r}")

    def tail(self, name: str) -> LargeScaleKernel | None:
        for t in self.tails:
            if t.label == name:
                return t
        return None

    def small_scale(self, name: str) -> RadialPower:
        return self.spec(name).for_dimension(self.dimension)

    def with_epsilon(self, epsilon: float) -> "KernelAssignment":
        return KernelAssignment(
            self.labels,
            tuple(KernelSpec(s.label, s.homogeneity, epsilon) for s in self.specs),
            self.tails,
            self.max_derivative_order,
        )

    def with_rho(self, rho: float | None) -> "KernelAssignment":
        return KernelAssignment(
            self.labels,
            self.specs,
            tuple(LargeScaleKernel(t.label, t.deg_inf, rho) for t in self.tails),
            self.max_derivative_order,
        )

    def check_order(self, k: MultiIndex):
        if mi.order(k) > self.max_derivative_order:
            raise DerivativeOrderExceeded(
                f"derivative order {mi.order(k)} exceeds the cap {self.max_derivative_order}"
            )


def assignment_for(labels: LabelTable, epsilon: float, rho: float | None = None,
                   tails: bool = False, max_order: int = 2) -> KernelAssignment:
    """Build the default assignment: one mollified kernel per base label, plus
    tails (from the labels' deg_inf) when requested."""
    specs = tuple(KernelSpec(l.name, l.deg, epsilon) for l in labels.entries)
    tail_list = ()
    if tails:
        tail_list = tuple(
            LargeScaleKernel(l.name, Fraction(l.deg_inf), rho)
            for l in labels.entries
            if l.deg_inf != NEG_INF
        )
    return KernelAssignment(labels, specs, tail_list, max_order)


def eval_kernel(assignment: KernelAssignment, label: str, k: MultiIndex, x,
                include_tail: bool = True) -> np.ndarray:
    """D^k of the (possibly tail-extended) kernel of a label at points x."""
    assignment.check_order(k)
    spec = assignment.spec(label)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if spec.epsilon == 0.0 and spec.homogeneity < 0:
        if np.any(np.sum(x * x, axis=-1) == 0.0):
            raise SingularAtZero(f"kernel {label!r} with epsilon=0 evaluated at 0")
    out = assignment.small_scale(label).eval(k, x)
    tail = assignment.tail(label)
    if include_tail and tail is not None:
        out = out + tail.for_dimension(assignment.dimension).eval(k, x)
    return out


def seminorm_estimate(assignment: KernelAssignment, label: str, N: int,
                      sample_count: int = 400) -> float:
    """Estimated seminorm: sup over sampled x of |D^k K(x)| |x|^{|k| - deg}
    for all |k| <= N (grid plus golden-ratio radii accumulating at 0)."""
    if N > assignment.max_derivative_order:
        raise DerivativeOrderExceeded(f"N={N} exceeds the cap")
    d = assignment.dimension
    deg = assignment.labels.deg(label)
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    n_shells = max(8, sample_count // 16)
    radii = np.concatenate(
        [np.linspace(1e-3, 1.0, sample_count), phi ** np.arange(1, n_shells + 1)]
    )
    if d == 1:
        points = np.concatenate([radii, -radii])[:, None]
    else:
        angles = 2.0 * np.pi * phi * np.arange(len(radii))
        directions = np.zeros((len(radii), d))
        directions[:, 0] = np.cos(angles)
        directions[:, 1] = np.sin(angles)
        points = radii[:, None] * directions
    rad = np.linalg.norm(points, axis=-1)
    best = 0.0
    for order in range(N + 1):
        for k in mi.with_order(d, order):
            vals = assignment.small_scale(label).eval(k, points)
            weight = rad ** (order - float(deg))
            best = max(best, float(np.max(np.abs(vals) * weight)))
    return best


def moment(assignment: KernelAssignment, label: str, k: MultiIndex, quad=None) -> tuple[float, float]:
    """c_k = (1/k!) int x^k K(x) dx over the unit ball; returns (value, error)."""
    from .quadrature import QuadratureSpec, integrate

    spec = assignment.spec(label)
    d = assignment.dimension
    if spec.epsilon == 0.0 and mi.order(k) + spec.homogeneity <= -d:
        raise NonIntegrable(
            f"moment |k|={mi.order(k)} of label {label!r} diverges at epsilon=0"
        )
    quad = quad or QuadratureSpec()
    kern = assignment.small_scale(label)

    def f(P):
        return kern.eval(mi.zero(d), P) * mi.monomial(P, k)

    bounds = np.array([[-1.0, 1.0]] * d)
    val, err = integrate(f, bounds, quad)
    fact = mi.factorial(k)
    return val / fact, err / fact
