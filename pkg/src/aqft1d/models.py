"""The free scalar field with base-dependent mass and the massless Dirac field.

Observables are represented by finite families of VC test fields.  At each
base point the scalar model yields a Poisson space
``tau_ij = int phi_i (G phi_j) rho dt`` and the Dirac model a pairing space
``B_ij = int (psi_i, psibar_i) J S(psi_j, psibar_j) rho dt`` with
``J = [[0, i], [-i, 0]]``; both are then quantized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CoherenceError, PreconditionError
from .geometry import (VC, Embedding, FieldConfiguration, SpacetimeFamily, as_point,
                       pushforward_field, restrict_field)
from .green import Dirac, GreenReport, KleinGordon, causal_propagator
from .quadrature import CumulativeIntegrator
from .quantize import (AlgebraMorphism, CARAlgebra, CCRAlgebra, IPSpace, PoissonSpace,
                       algebra_morphism)

STRUCTURE_TOL = 1e-7
ALGEBRA_TOL = 1e-9

_J = np.array([[0, 1j], [-1j, 0]])


def _validate_tests(tests, components=None, kind=None):
    tests = list(tests)
    if not tests:
        raise ValueError("need at least one test field")
    fam = tests[0].family
    for f in tests:
        if f.family is not fam and f.family != fam:
            raise ValueError("test fields must live on one family")
        if not isinstance(f.support, VC):
            raise ValueError("test fields must be VC supported")
        if components is not None and f.components != components:
            raise TypeError(f"test fields need {components} components")
        if kind is not None and f.scalar_kind != kind:
            raise TypeError(f"test fields need scalar kind {kind!r}")
    return tests


def _outer_integrals(tests, partners, x, k=None, rtol=1e-13):
    """``M[i, j] = int tests_i(t) . partners[j](t) rho dt`` over supp(tests_i).

    ``partners(t, x)`` returns an array of shape ``(len(t), k, n)``; the dot
    product runs over the component axis.
    """
    fam = tests[0].family
    k = len(tests) if k is None else k
    out = np.zeros((len(tests), k), complex)
    for i, f in enumerate(tests):
        a, b = f.support.bounds(x)

        def g(s, T, f=f):
            vals = np.asarray(f(s, x), complex)                  # (N, n)
            pv = partners(s, x)                                  # (N, k, n)
            rho = fam.rho(s, x)
            return np.einsum("sn,skn->sk", vals, pv) * rho[:, None]

        integ = CumulativeIntegrator(g, lambda s: fam.rho(s, x), a, +1, panel=max(b - a, 1e-3),
                                     rtol=rtol, components=k)
        out[i] = integ(np.array([b]))[0][0]
    return out


def poisson_from_spacetime(family, mass, tests, x, tol=1e-8, raw=False):
    """Poisson space of the scalar model at base point ``x``.

    Raw antisymmetry is checked against ``tol`` before exact
    antisymmetrization.  With ``raw`` the unsymmetrized matrix is returned
    as well.
    """
    x = as_point(x)
    tests = _validate_tests(tests, components=1, kind="real")
    P = KleinGordon(family, mass)
    props = [causal_propagator(P, f) for f in tests]

    def partners(s, xx):
        return np.stack([np.asarray(G(s, xx), float) for G in props], axis=1)

    tau = _outer_integrals(tests, partners, x).real
    space = PoissonSpace.from_matrix(tau, tol)
    return (space, tau) if raw else space


def star_field(field):
    """``(psi, psibar) -> (conj psibar, conj psi)``."""
    ev = field.eval

    def out(t, x):
        v = np.asarray(ev(t, x), complex).reshape(len(t), 2)
        return np.conj(v[:, ::-1])
    return FieldConfiguration(field.family, out, 2, "complex", field.support, field.noise)


def dirac_pairing(family, left, right, x):
    """Raw pairing matrix ``B[i, j]`` between two lists of Dirac test fields."""
    x = as_point(x)
    left = _validate_tests(left, components=2, kind="complex")
    right = _validate_tests(right, components=2, kind="complex")
    D = Dirac(family)
    props = [causal_propagator(D, f) for f in right]

    def partners(s, xx):
        return np.stack([np.asarray(S(s, xx), complex) @ _J.T for S in props], axis=1)

    return _outer_integrals(left, partners, x, k=len(right))


def ip_from_spacetime(family, tests, x, perm=None, tol=1e-8, raw=False):
    """Pairing space of the Dirac model at ``x``; ``perm`` is the star permutation."""
    x = as_point(x)
    B = dirac_pairing(family, tests, tests, x)
    if perm is None:
        perm = tuple(range(len(tests)))
    space = IPSpace.from_matrix(B, perm, tol)
    return (space, B) if raw else space


def _same_on_grid(f, g, ts, xs, tol=1e-12):
    for x in xs:
        if np.max(np.abs(f(ts, x) - g(ts, x))) > tol:
            return False
    return True


def _probe_times(fields, x, n=33):
    lo = min(f.support.bounds(x)[0] for f in fields)
    hi = max(f.support.bounds(x)[1] for f in fields)
    return np.linspace(lo, hi, n)


def close_under_star(tests):
    """Split into single-component generators and close under the involution.

    Each generator is followed by its star partner unless the partner came
    earlier.  Returns ``(generators, perm, sides)`` where ``sides[i]`` is 0
    if the generator lives in the first component and 1 otherwise.
    """
    pure = []
    for f in tests:
        for slot in (0, 1):
            ev = f.eval

            def part(t, x, ev=ev, slot=slot):
                v = np.asarray(ev(t, x), complex).reshape(len(t), 2)
                out = np.zeros_like(v)
                out[:, slot] = v[:, slot]
                return out
            g = FieldConfiguration(f.family, part, 2, "complex", f.support, f.noise)
            xs = f.family.base.samples()
            if any(np.max(np.abs(g(_probe_times([f], x), x))) > 0 for x in xs):
                pure.append((g, slot))
    gens, sides, perm = [], [], []
    used = [False] * len(pure)
    for i, (g, side) in enumerate(pure):
        if used[i]:
            continue
        used[i] = True
        s = star_field(g)
        xs = g.family.base.samples()
        partner = None
        for j in range(i + 1, len(pure)):
            h, hside = pure[j]
            if not used[j] and hside != side and _same_on_grid(
                    s, h, _probe_times([g, h], xs[0]), xs):
                partner = h
                used[j] = True
                break
        k = len(gens)
        gens += [g, partner if partner is not None else s]
        sides += [side, 1 - side]
        perm += [k + 1, k]
    return gens, tuple(perm), tuple(sides)


class BosonicModel:
    """Scalar field with mass ``m(x)`` quantized per base point."""

    def __init__(self, family: SpacetimeFamily, mass, tests: Sequence[FieldConfiguration]):
        self.family = family
        self.operator = KleinGordon(family, mass)
        self.mass = self.operator.mass
        self.tests = _validate_tests(tests, components=1, kind="real")
        self._cache = {}

    @property
    def rank(self):
        return len(self.tests)

    def poisson(self, x):
        x = as_point(x)
        if x not in self._cache:
            self._cache[x] = poisson_from_spacetime(self.family, self.mass, self.tests, x)
        return self._cache[x]

    def algebra(self, x):
        return CCRAlgebra(self.poisson(x))

    def structure(self, x):
        return self.poisson(x).tau

    def with_tests(self, tests, family=None):
        fam = family if family is not None else self.family
        return BosonicModel(fam, self.mass, tests)

    def restrict(self, h, new_base):
        fam = self.family.pullback(h, new_base)
        mass = self.mass
        return BosonicModel(fam, lambda x: mass(as_point(h(x))),
                            [_rehome(restrict_field(f, h, new_base), fam) for f in self.tests])


class FermionicModel:
    """Massless Dirac field; generators are star-closed single-component tests."""

    def __init__(self, family: SpacetimeFamily, tests: Sequence[FieldConfiguration],
                 closed=None):
        self.family = family
        self.operator = Dirac(family)
        tests = _validate_tests(tests, components=2, kind="complex")
        if closed is None:
            self.tests, self.perm, self.sides = close_under_star(tests)
        else:
            self.tests = list(tests)
            self.perm, self.sides = closed
        self._cache = {}

    @property
    def rank(self):
        return len(self.tests)

    def pairing(self, x):
        x = as_point(x)
        if x not in self._cache:
            self._cache[x] = ip_from_spacetime(self.family, self.tests, x, self.perm)
        return self._cache[x]

    def algebra(self, x):
        return CARAlgebra(self.pairing(x))

    def structure(self, x):
        return self.pairing(x).pairing

    def with_tests(self, tests, family=None):
        fam = family if family is not None else self.family
        return FermionicModel(fam, tests, closed=(self.perm, self.sides))

    def restrict(self, h, new_base):
        fam = self.family.pullback(h, new_base)
        return FermionicModel(fam, [_rehome(restrict_field(f, h, new_base), fam)
                                    for f in self.tests], closed=(self.perm, self.sides))


def _rehome(field, family):
    return FieldConfiguration(family, field.eval, field.components, field.scalar_kind,
                              field.support, field.noise)


# --- functoriality ----------------------------------------------------------------

class Pushforward(AlgebraMorphism):
    """Algebra morphism induced by an embedding; ``target_model`` holds the pushed tests."""

    def __init__(self, morphism, target_model, deviation):
        super().__init__(morphism.source, morphism.target, morphism.images, deviation)
        self.target_model = target_model


def pushforward_observables(emb: Embedding, model, x, tol=STRUCTURE_TOL, **check):
    """Push every test field along ``emb`` (extension by zero) and return the
    induced morphism of the algebras at ``x``.

    Raises PreconditionError if ``emb`` is not an isometric open embedding
    and CoherenceError if the structure constants move by more than ``tol``.
    """
    rep = emb.check(**check)
    if not rep.passed:
        raise PreconditionError(
            f"not an open embedding preserving the 1-form (monotone={rep.monotone}, "
            f"in_target={rep.in_target}, form_error={rep.form_error:.3e})",
            deviation=rep.form_error)
    x = as_point(x)
    pushed = [pushforward_field(f, emb) for f in model.tests]
    target_model = model.with_tests(pushed, emb.target)
    src = model.structure(x)
    dst = target_model.structure(x)
    dev = float(np.max(np.abs(src - dst)))
    if dev > tol:
        raise CoherenceError(f"structure constants differ by {dev:.3e} > {tol:g}", deviation=dev)
    A, A2 = model.algebra(x), target_model.algebra(x)
    phi = algebra_morphism(A, A2, [A2.gen(i) for i in range(model.rank)], tol=max(tol, dev))
    return Pushforward(phi, target_model, dev)


def pullback_coherence_check(h, new_base, model, tol=STRUCTURE_TOL, name="pullback"):
    """Compare the structure at ``x'`` on the pulled-back model with the
    structure at ``h(x')`` on the original model."""
    pulled = model.restrict(h, new_base)
    worst = 0.0
    count = 0
    for xp in new_base.samples():
        a = pulled.structure(xp)
        b = model.structure(as_point(h(xp)))
        worst = max(worst, float(np.max(np.abs(a - b))))
        count += a.size
    return GreenReport(name, worst, tol, count)


# --- U(1) -----------------------------------------------------------------------

def _unit(g, x, tol):
    z = complex(g(x) if callable(g) else g)
    dev = abs(abs(z) - 1.0)
    if dev > tol:
        raise PreconditionError(f"|g(x)| = {abs(z)!r} is not 1 within {tol:g}", deviation=dev)
    return z


def phase_rotate(field, z):
    """``(psi, psibar) -> (z psi, conj(z) psibar)``."""
    ev = field.eval
    inv = np.conj(z)

    def out(t, x):
        v = np.asarray(ev(t, x), complex).reshape(len(t), 2)
        return np.stack([z * v[:, 0], inv * v[:, 1]], axis=1)
    return FieldConfiguration(field.family, out, 2, "complex", field.support, field.noise)


class U1Action(AlgebraMorphism):
    def __init__(self, morphism, phase, pairing_error):
        super().__init__(morphism.source, morphism.target, morphism.images, morphism.deviation)
        self.phase = phase
        self.pairing_error = pairing_error


def u1_action(g, model: FermionicModel, x, unit_tol=1e-12, tol=ALGEBRA_TOL, check_pairing=True):
    """Automorphism of the Dirac algebra at ``x`` induced by the phase ``g(x)``.

    The inverse phase is taken as the complex conjugate, so the group law
    holds exactly on generators.
    """
    x = as_point(x)
    z = _unit(g, x, unit_tol)
    A = model.algebra(x)
    images = [A.gen(i) * (z if side == 0 else np.conj(z)) for i, side in enumerate(model.sides)]
    perr = 0.0
    if check_pairing:
        rotated = [phase_rotate(f, z) for f in model.tests]
        B2 = ip_from_spacetime(model.family, rotated, x, model.perm, raw=True)[1]
        perr = float(np.max(np.abs(B2 - model.structure(x))))
        if perr > tol:
            raise PreconditionError(f"pairing not invariant: {perr:.3e} > {tol:g}", deviation=perr)
    for i, j in enumerate(model.perm):
        # star(g v_i) must equal g v_star(i)
        if images[i].star() != images[j]:
            raise PreconditionError("phase action does not commute with the involution")
    return U1Action(algebra_morphism(A, A, images, tol=tol), z, perr)


# --- smoothness -------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothnessReport:
    s0: float
    steps: tuple
    first: tuple
    second: tuple
    orders: tuple
    exact: bool
    passed: bool

    @property
    def order(self):
        return self.orders[-1] if self.orders else math.nan


def smoothness_probe(observable: Callable, s0, steps=(0.1, 0.05, 0.025), band=(1.5, 2.5),
                     zero_tol=1e-12):
    """Empirical convergence order of central-difference derivative estimates.

    The order is taken from successive differences of the second-derivative
    estimates.  An observable whose estimates agree to ``zero_tol`` counts
    as exactly convergent.
    """
    steps = tuple(float(h) for h in steps)
    if len(steps) < 3 or any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError("need at least three strictly decreasing steps")
    f0 = float(observable(s0))
    first, second = [], []
    for h in steps:
        fp, fm = float(observable(s0 + h)), float(observable(s0 - h))
        first.append((fp - fm) / (2 * h))
        second.append((fp - 2 * f0 + fm) / (h * h))
    diffs = [b - a for a, b in zip(second, second[1:])]
    scale = max(1.0, max(abs(v) for v in second))
    exact = all(abs(d) <= zero_tol * scale for d in diffs)
    orders = []
    for k in range(len(diffs) - 1):
        d0, d1 = abs(diffs[k]), abs(diffs[k + 1])
        ratio = steps[k] / steps[k + 1]
        orders.append(math.log(d0 / d1) / math.log(ratio) if d0 > 0 and d1 > 0 else math.nan)
    passed = exact or (bool(orders) and all(band[0] <= o <= band[1] for o in orders))
    return SmoothnessReport(float(s0), steps, tuple(first), tuple(second), tuple(orders),
                            exact, passed)
