"""Vertical operators, their Green operators and the exact-sequence checks.

Two operators act fiberwise on a family with density ``rho``:

* Klein-Gordon ``P = (rho^-1 d/dt)^2 + m(x)^2`` on real or complex fields,
* massless Dirac ``D(psi, psibar) = (i rho^-1 psi', -i rho^-1 psibar')``.

Green operators use the explicit kernels in proper time.  Integrals run on
a per-base-point Gauss-Legendre mesh anchored at the support section, so
results are smooth in ``t`` and may themselves be finite-differenced.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .differentiation import DEFAULT_LEVELS, DEFAULT_STEP, derivatives
from .errors import DomainError, PreconditionError, SupportError
from .geometry import (VC, VFC, VPC, FieldConfiguration, ProperClock, Section,
                       SpacetimeFamily, Unrestricted, as_point, masked, smooth_step)
from .quadrature import CumulativeIntegrator

SOLUTION_TOL = 1e-5
# relative noise attached to finite-difference outputs
DIFFERENCE_NOISE = 1e-9


def _mass_fn(mass):
    if callable(mass):
        return lambda x: float(mass(x))
    value = float(mass)
    return lambda x: value


@dataclass(frozen=True)
class KleinGordon:
    family: SpacetimeFamily
    mass: Callable | float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mass", _mass_fn(self.mass))
        for x in self.family.base.samples():
            if not self.mass(x) > 0:
                raise DomainError(f"mass must be positive, got {self.mass(x)} at x={x}")

    order = 2

    def accepts(self, field):
        return field.components >= 1


@dataclass(frozen=True)
class Dirac:
    family: SpacetimeFamily

    order = 1
    components = 2

    def accepts(self, field):
        return field.components == 2 and field.scalar_kind == "complex"


@dataclass(frozen=True)
class GreenReport:
    check: str
    max_error: float
    tolerance: float
    samples: int

    @property
    def passed(self):
        return bool(self.max_error <= self.tolerance)

    def as_dict(self):
        return {"check": self.check, "max_error": self.max_error,
                "tolerance": self.tolerance, "samples": self.samples,
                "passed": self.passed}


def _check_operand(P, field):
    if not P.accepts(field):
        raise TypeError(f"{type(P).__name__} cannot act on a field with "
                        f"{field.components} {field.scalar_kind} components")


# --- the operators ----------------------------------------------------------

def apply_operator(P, field: FieldConfiguration, step=DEFAULT_STEP, levels=DEFAULT_LEVELS):
    """``P field`` by Richardson-extrapolated central differences.

    The step is ``step`` in proper time, i.e. ``step / rho(t, x)`` in ``t``.
    The result keeps the input's support class and is exactly zero outside
    the declared support.
    """
    _check_operand(P, field)
    fam = field.family
    ev = field.eval
    n = field.components
    dtype = field.dtype

    def values(t, x):
        return np.asarray(ev(t, x), dtype).reshape(len(t), n)

    if isinstance(P, KleinGordon):
        mass = P.mass

        def out(t, x):
            t = np.atleast_1d(np.asarray(t, float))
            rho = fam.rho(t, x)
            h = step / rho
            d = derivatives(lambda s: values(s, x), t, h, levels)
            drho = derivatives(lambda s: fam.rho(s, x), t, h, levels, order=(1,))[1]
            r = rho[:, None]
            m = mass(x)
            return d[2] / r ** 2 - (drho[:, None] / r ** 3) * d[1] + m * m * d[0]
    else:
        def out(t, x):
            t = np.atleast_1d(np.asarray(t, float))
            rho = fam.rho(t, x)
            d1 = derivatives(lambda s: values(s, x), t, step / rho, levels, order=(1,))[1]
            return np.stack([1j * d1[:, 0], -1j * d1[:, 1]], axis=1) / rho[:, None]

    kind = "complex" if isinstance(P, Dirac) else field.scalar_kind
    return FieldConfiguration(fam, masked(out, field.support), n, kind, field.support,
                              max(field.noise, DIFFERENCE_NOISE))


@dataclass(frozen=True)
class GreenField(FieldConfiguration):
    """A Green-operator output; carries a pointwise quadrature error estimate."""

    estimator: Callable | None = None

    def error_estimate(self, t, x):
        t = np.atleast_1d(np.asarray(t, float))
        if self.estimator is None:
            return np.zeros(t.shape)
        return self.estimator(t, as_point(x))


class _Kernel:
    """Per-base-point cache of cumulative integrators for one source field."""

    def __init__(self, P, field, direction, order, rtol):
        self.P = P
        self.field = field
        self.direction = direction
        self.order = order
        self.rtol = rtol
        self._cache = {}
        self._lock = threading.Lock()

    def _anchor(self, x):
        lo, hi = self.field.support.bounds(x)
        return lo if self.direction > 0 else hi

    def _integrator(self, x):
        got = self._cache.get(x)
        if got is not None:
            return got
        with self._lock:
            got = self._cache.get(x)
            if got is None:
                got = self._make(x)
                self._cache[x] = got
        return got

    def _make(self, x):
        fam = self.field.family
        n = self.field.components
        ev = self.field.eval
        dtype = self.field.dtype

        def rho(s):
            return fam.rho(s, x)

        if isinstance(self.P, KleinGordon):
            m = self.P.mass(x)

            def g(s, T):
                f = np.asarray(ev(s, x), dtype).reshape(len(s), n) * rho(s)[:, None]
                return np.concatenate([np.cos(m * T)[:, None] * f,
                                       np.sin(m * T)[:, None] * f], axis=1)
            q = 2 * n
        else:
            def g(s, T):
                f = np.asarray(ev(s, x), complex).reshape(len(s), 2) * rho(s)[:, None]
                return np.stack([-1j * f[:, 0], 1j * f[:, 1]], axis=1)
            q = 2
        rtol = max(self.rtol, self.field.noise)
        return CumulativeIntegrator(g, rho, self._anchor(x), self.direction,
                                    order=self.order, rtol=rtol, components=q)

    def evaluate(self, t, x):
        t = np.atleast_1d(np.asarray(t, float))
        x = as_point(x)
        F, T, E = self._integrator(x)(t)
        n = self.field.components
        if isinstance(self.P, KleinGordon):
            m = self.P.mass(x)
            C, S = F[:, :n], F[:, n:]
            val = (np.sin(m * T)[:, None] * C - np.cos(m * T)[:, None] * S) / m
            est = 2.0 * E / m
        else:
            val = F
            est = E
        if self.field.scalar_kind == "real" and isinstance(self.P, KleinGordon):
            val = val.real
        return val, est


def _green(P, field, direction, order=16, rtol=1e-13):
    _check_operand(P, field)
    sup = field.support
    if direction > 0 and not isinstance(sup, (VPC, VC)):
        raise SupportError("the retarded Green operator needs past-compact (VPC or VC) support")
    if direction < 0 and not isinstance(sup, (VFC, VC)):
        raise SupportError("the advanced Green operator needs future-compact (VFC or VC) support")
    kern = _Kernel(P, field, direction, order, rtol)
    if direction > 0:
        new_sup = VPC(sup.lower)
    else:
        new_sup = VFC(sup.upper)
    kind = "complex" if isinstance(P, Dirac) else field.scalar_kind
    return GreenField(field.family, lambda t, x: kern.evaluate(t, x)[0], field.components,
                      kind, new_sup, estimator=lambda t, x: kern.evaluate(t, x)[1])


def green_retarded(P, field, order=16, rtol=1e-13):
    """Retarded Green operator; the result is supported above the field's lower section.

    ``order`` and ``rtol`` select the Gauss-Legendre panel rule and the
    refinement tolerance.
    """
    return _green(P, field, +1, order, rtol)


def green_advanced(P, field, order=16, rtol=1e-13):
    """Advanced Green operator; the result is supported below the field's upper section."""
    return _green(P, field, -1, order, rtol)


def causal_propagator(P, field, order=16, rtol=1e-13):
    """``G+ field - G- field`` for a vertically compactly supported field."""
    if not isinstance(field.support, VC):
        raise SupportError("the causal propagator needs VC support")
    plus = _green(P, field, +1, order, rtol)
    minus = _green(P, field, -1, order, rtol)
    pe, me = plus.eval, minus.eval

    def est(t, x):
        return plus.error_estimate(t, x) + minus.error_estimate(t, x)

    return GreenField(field.family, lambda t, x: pe(t, x) - me(t, x), field.components,
                      plus.scalar_kind, Unrestricted(), estimator=est)


# --- initial data -------------------------------------------------------------

@dataclass(frozen=True)
class InitialData:
    """Data of a solution on a section.

    ``values(x)`` returns an array of shape ``(order, components)``: for
    Klein-Gordon the rows are the value and the proper-time derivative, for
    Dirac the single row is the value.
    """

    order: int
    components: int
    sigma: Section
    values: Callable

    @classmethod
    def constant(cls, sigma, rows):
        rows = np.atleast_2d(np.asarray(rows))
        return cls(rows.shape[0], rows.shape[1], sigma, lambda x: rows)

    def __call__(self, x):
        return np.asarray(self.values(as_point(x)))


def verification_times(field, x, n=41, pad=1.0):
    """Uniform ``t`` samples covering the field's support plus ``pad`` on each side."""
    lo, hi = field.support.bounds(x)
    flo, fhi = field.family.fiber(x)
    if not np.isfinite(lo):
        lo = hi - 2.0 if np.isfinite(hi) else -2.0
    if not np.isfinite(hi):
        hi = lo + 2.0
    a, b = max(lo - pad, flo), min(hi + pad, fhi)
    return np.linspace(a, b, n + 2)[1:-1] if (a == flo or b == fhi) else np.linspace(a, b, n)


def solution_residual(P, field, sigma: Section | None = None, n=41, span=2.0):
    """Largest ``|P field|`` on the verification grid around ``sigma``."""
    Pf = apply_operator(P, field)
    worst = 0.0
    count = 0
    for x in field.family.base.samples():
        c = sigma(x) if sigma is not None else 0.0
        flo, fhi = field.family.fiber(x)
        ts = np.linspace(max(c - span, flo), min(c + span, fhi), n + 2)[1:-1]
        worst = max(worst, float(np.max(np.abs(Pf(ts, x)))))
        count += ts.size
    return worst, count


def initial_data(P, sigma: Section, solution: FieldConfiguration, tol=SOLUTION_TOL,
                 check=True):
    """Cauchy data of ``solution`` on ``sigma``.

    Raises PreconditionError if ``P solution`` exceeds ``tol`` on the grid.
    """
    _check_operand(P, solution)
    if check:
        worst, _ = solution_residual(P, solution, sigma)
        if worst > tol:
            raise PreconditionError(
                f"field is not a solution: residual {worst:.3e} > {tol:g}", deviation=worst)
    fam = solution.family
    ev = solution.eval
    n = solution.components
    dtype = solution.dtype

    if isinstance(P, KleinGordon):
        def values(x):
            t0 = np.array([sigma(x)])
            rho = fam.rho(t0, x)
            d = derivatives(lambda s: np.asarray(ev(s, x), dtype).reshape(len(s), n),
                            t0, DEFAULT_STEP / rho, order=(1,))
            return np.stack([d[0][0], d[1][0] / rho[0]])
        return InitialData(2, n, sigma, values)

    def values(x):
        return np.asarray(ev(np.array([sigma(x)]), x), complex).reshape(1, 2)
    return InitialData(1, 2, sigma, values)


def solve_ivp(P, sigma: Section, data: InitialData, family: SpacetimeFamily | None = None,
              scalar_kind=None):
    """The solution with the given data on ``sigma``."""
    fam = family if family is not None else P.family
    if isinstance(P, KleinGordon):
        if data.order != 2:
            raise TypeError("Klein-Gordon data needs two rows (value, derivative)")
        clock = ProperClock(fam, sigma)
        mass = P.mass
        n = data.components

        def ev(t, x):
            T = clock(t, x)
            m = mass(x)
            d = data(x)
            return (np.cos(m * T)[:, None] * d[0][None, :]
                    + (np.sin(m * T) / m)[:, None] * d[1][None, :])
        kind = scalar_kind or ("complex" if np.iscomplexobj(data(fam.base.samples()[0])) else "real")
        return FieldConfiguration(fam, ev, n, kind, Unrestricted())

    if data.order != 1 or data.components != 2:
        raise TypeError("Dirac data needs one row with two components")

    def ev(t, x):
        return np.broadcast_to(data(x)[0].astype(complex), (len(t), 2))
    return FieldConfiguration(fam, ev, 2, "complex", Unrestricted())


# --- verification -------------------------------------------------------------

def _max_diff(f, g, x, ts):
    return float(np.max(np.abs(f(ts, x) - g(ts, x)))) if ts.size else 0.0


def _max_abs(f, x, ts):
    return float(np.max(np.abs(f(ts, x)))) if ts.size else 0.0


def verify_green_inverse(P, field, tol_left=1e-6, tol_right=1e-5, n=41, label=""):
    """Inverse axiom: ``P G+- phi = phi`` and ``G+- P phi = phi`` on the grid."""
    gp, gm = green_retarded(P, field), green_advanced(P, field)
    Pphi = apply_operator(P, field)
    pg = [apply_operator(P, gp), apply_operator(P, gm)]
    gP = [green_retarded(P, Pphi), green_advanced(P, Pphi)]
    left = right = 0.0
    count = 0
    for x in field.family.base.samples():
        ts = verification_times(field, x, n)
        for f in pg:
            left = max(left, _max_diff(f, field, x, ts))
        for f in gP:
            right = max(right, _max_diff(f, field, x, ts))
        count += ts.size
    return [GreenReport(f"{label}P(G{{+,-}}phi)=phi", left, tol_left, 2 * count),
            GreenReport(f"{label}G{{+,-}}(Pphi)=phi", right, tol_right, 2 * count)]


def partition_sections(field):
    """Two sections bracketing the field's support, at least 2 apart."""
    lo, hi = field.support.lower, field.support.upper

    def centre(x):
        return 0.5 * (lo(x) + hi(x))

    def half(x):
        return max(1.0, 0.5 * (hi(x) - lo(x)))

    return (Section(lambda x: centre(x) - half(x)), Section(lambda x: centre(x) + half(x)))


def split_solution(solution, lower: Section, upper: Section):
    """``solution = plus + minus`` with ``plus`` vanishing below ``lower``
    and ``minus`` vanishing above ``upper``."""
    ev = solution.eval
    n = solution.components
    dtype = solution.dtype

    def chi(t, x):
        a, b = lower(x), upper(x)
        return smooth_step((np.asarray(t, float) - a) / (b - a))

    def plus(t, x):
        return chi(t, x)[:, None] * np.asarray(ev(t, x), dtype).reshape(len(t), n)

    def minus(t, x):
        return (1.0 - chi(t, x))[:, None] * np.asarray(ev(t, x), dtype).reshape(len(t), n)

    fam = solution.family
    return (FieldConfiguration(fam, plus, n, solution.scalar_kind, VPC(lower)),
            FieldConfiguration(fam, minus, n, solution.scalar_kind, VFC(upper)))


def verify_exact_sequence(P, test_fields, tol=1e-6, n=41):
    """Four reports per field, checking each node of the exact sequence.

    (a) ``G+- P phi = phi``, (b) ``G P phi = 0``, (c) ``P G phi = 0`` and
    (d) a solution split by a partition of unity is ``G`` of a compactly
    supported source.
    """
    reports = []
    for k, phi in enumerate(test_fields):
        if not isinstance(phi.support, VC):
            raise SupportError("exact-sequence test fields need VC support")
        tag = f"field{k}:"
        Pphi = apply_operator(P, phi)
        ginv = [green_retarded(P, Pphi), green_advanced(P, Pphi)]
        GP = causal_propagator(P, Pphi)
        Gphi = causal_propagator(P, phi)
        PG = apply_operator(P, Gphi)

        lo_sec, hi_sec = partition_sections(phi)
        data = initial_data(P, lo_sec, Gphi, check=False)
        Phi = solve_ivp(P, lo_sec, data, phi.family, phi.scalar_kind if isinstance(P, KleinGordon) else None)
        plus, _ = split_solution(Phi, lo_sec, hi_sec)
        src = apply_operator(P, plus)
        vc = VC(lo_sec, hi_sec)
        src = FieldConfiguration(src.family, masked(src.eval, vc), src.components,
                                 src.scalar_kind, vc, src.noise)
        Gsrc = causal_propagator(P, src)

        err = [0.0, 0.0, 0.0, 0.0]
        count = 0
        for x in phi.family.base.samples():
            ts = verification_times(phi, x, n)
            for f in ginv:
                err[0] = max(err[0], _max_diff(f, phi, x, ts))
            err[1] = max(err[1], _max_abs(GP, x, ts))
            err[2] = max(err[2], _max_abs(PG, x, ts))
            a, b = lo_sec(x), hi_sec(x)
            wide = np.linspace(a - 1.0, b + 1.0, n)
            outside = wide[(wide < a) | (wide > b)]
            # the source must vanish off [a, b] before masking
            raw = apply_operator(P, plus.with_support(Unrestricted()))
            err[3] = max(err[3], _max_diff(Gsrc, Phi, x, wide), _max_abs(raw, x, outside))
            count += ts.size
        names = ["a:G+-(Pphi)=phi", "b:G(Pphi)=0", "c:P(Gphi)=0", "d:G(P(chi Phi))=Phi"]
        reports += [GreenReport(tag + nm, e, tol, count) for nm, e in zip(names, err)]
    return reports
