"""Smooth families of 1-dimensional spacetimes in a global trivialization.

A family over a parameter box ``U`` is the product ``I x U`` with a
vertical 1-form ``rho(t, x) dt``; fiber endpoints may depend on ``x`` and
be infinite.  Fields are pure callables ``(t, x) -> K^n`` vectorized over
``t``, carrying a declared vertical support class bounded by sections.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .differentiation import derivatives
from .errors import DomainError, IncompatibleError
from .quadrature import CumulativeIntegrator, integrate

Point = tuple


def as_point(x) -> Point:
    """Normalize a base point (None, scalar or sequence) to a tuple of floats."""
    if x is None:
        return ()
    return tuple(float(v) for v in np.atleast_1d(np.asarray(x, float)))


def _const(value):
    value = float(value)
    return lambda x: value


def _fn(f):
    return f if callable(f) else _const(f)


@dataclass(frozen=True)
class BaseDomain:
    """Rectangular parameter box with a sampling grid."""

    box: tuple
    grid: tuple

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        grid = tuple(int(n) for n in self.grid)
        if len(box) != len(grid):
            raise ValueError("box and grid need one entry per axis")
        for lo, hi in box:
            if not lo < hi:
                raise ValueError(f"axis bounds must satisfy lo < hi, got ({lo}, {hi})")
        if any(n < 2 for n in grid):
            raise ValueError("sample counts must be >= 2 per axis")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def point(cls):
        """The zero-dimensional base (a single spacetime)."""
        return cls((), ())

    @property
    def dimension(self):
        return len(self.box)

    def samples(self):
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.grid)]
        return [tuple(float(v) for v in p) for p in itertools.product(*axes)]

    def contains(self, x, slack=1e-12):
        return len(x) == self.dimension and all(
            lo - slack <= v <= hi + slack for v, (lo, hi) in zip(x, self.box))

    def product(self, other: "BaseDomain") -> "BaseDomain":
        return BaseDomain(self.box + other.box, self.grid + other.grid)


@dataclass(frozen=True)
class Section:
    """A section ``x -> sigma(x)`` of the fiber bundle."""

    sigma: Callable

    @classmethod
    def constant(cls, c):
        return cls(_const(c))

    def __call__(self, x):
        return float(self.sigma(x))

    def pullback(self, h):
        sigma = self.sigma
        return Section(lambda x: sigma(h(x)))


@dataclass(frozen=True)
class SpacetimeFamily:
    """``M = I x U`` with vertical 1-form ``E = density(t, x) dt``.

    ``density`` takes a float or 1-D array ``t`` and a base point ``x``.
    Fiber endpoints are functions of ``x`` or constants (possibly infinite).
    """

    base: BaseDomain
    density: Callable
    fiber_lo: Callable | float = -math.inf
    fiber_hi: Callable | float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "fiber_lo", _fn(self.fiber_lo))
        object.__setattr__(self, "fiber_hi", _fn(self.fiber_hi))

    def fiber(self, x):
        return float(self.fiber_lo(x)), float(self.fiber_hi(x))

    def rho(self, t, x):
        t = np.asarray(t, float)
        r = np.asarray(self.density(t, x), float)
        return np.broadcast_to(r, t.shape) if r.shape != t.shape else r

    def validate(self, window=10.0, n=41):
        """Check the invariants on the sample grid; raise DomainError otherwise."""
        for x in self.base.samples():
            lo, hi = self.fiber(x)
            if not lo < hi:
                raise DomainError(f"empty fiber at x={x}: ({lo}, {hi})")
            ts = _fiber_samples(lo, hi, window, n)
            r = self.rho(ts, x)
            if not np.all(r > 0):
                raise DomainError(f"density not positive at x={x}")
        return self

    def in_fiber(self, t, x):
        lo, hi = self.fiber(x)
        return lo < t < hi

    def pullback(self, h, new_base: BaseDomain) -> "SpacetimeFamily":
        """Pull back along ``h: new_base -> self.base`` (checked on samples)."""
        for xp in new_base.samples():
            hx = as_point(h(xp))
            if not self.base.contains(hx):
                raise DomainError(f"h{xp} = {hx} leaves the base box {self.base.box}")
        density, lo, hi = self.density, self.fiber_lo, self.fiber_hi
        return SpacetimeFamily(
            new_base,
            lambda t, x: density(t, as_point(h(x))),
            lambda x: lo(as_point(h(x))),
            lambda x: hi(as_point(h(x))),
        )


def _fiber_samples(lo, hi, window, n):
    a = max(lo, -window)
    b = min(hi, window)
    if math.isinf(lo) or math.isinf(hi) or a >= b:
        a, b = (max(lo, -window), min(hi, window)) if a < b else (lo, hi)
    # open interval: stay off finite endpoints
    return np.linspace(a, b, n + 2)[1:-1]


# --- support classes -------------------------------------------------------

@dataclass(frozen=True)
class Unrestricted:
    def bounds(self, x):
        return -math.inf, math.inf

    def pullback(self, h):
        return self


@dataclass(frozen=True)
class VPC:
    """Vertically past compact: support above ``lower``."""

    lower: Section

    def bounds(self, x):
        return self.lower(x), math.inf

    def pullback(self, h):
        return VPC(self.lower.pullback(h))


@dataclass(frozen=True)
class VFC:
    """Vertically future compact: support below ``upper``."""

    upper: Section

    def bounds(self, x):
        return -math.inf, self.upper(x)

    def pullback(self, h):
        return VFC(self.upper.pullback(h))


@dataclass(frozen=True)
class VC:
    """Vertically compact: support between ``lower`` and ``upper``."""

    lower: Section
    upper: Section

    def bounds(self, x):
        return self.lower(x), self.upper(x)

    def pullback(self, h):
        return VC(self.lower.pullback(h), self.upper.pullback(h))

    def check(self, base: BaseDomain):
        for x in base.samples():
            lo, hi = self.bounds(x)
            if not lo < hi:
                raise DomainError(f"VC support needs lower < upper, got ({lo}, {hi}) at x={x}")
        return self


SupportClass = Unrestricted | VPC | VFC | VC


def is_past_compact(support):
    return isinstance(support, (VPC, VC))


def is_future_compact(support):
    return isinstance(support, (VFC, VC))


@dataclass(frozen=True)
class FieldConfiguration:
    """A smooth map ``(t, x) -> K^n`` on a family, with declared support.

    ``eval(t, x)`` receives a 1-D float array ``t`` and a base point tuple
    and returns an array of shape ``(len(t),)`` or ``(len(t), n)``.
    Calling the field normalizes to shape ``t.shape + (n,)``.
    ``noise`` is the relative evaluation noise (nonzero for fields obtained
    by finite differencing); integrators do not refine below it.
    """

    family: SpacetimeFamily
    eval: Callable
    components: int = 1
    scalar_kind: str = "real"
    support: object = dc_field(default_factory=Unrestricted)
    noise: float = 0.0

    def __post_init__(self):
        if self.components < 1:
            raise ValueError("components must be positive")
        if self.scalar_kind not in ("real", "complex"):
            raise ValueError("scalar_kind must be 'real' or 'complex'")

    @property
    def dtype(self):
        return float if self.scalar_kind == "real" else complex

    def __call__(self, t, x):
        t_arr = np.asarray(t, float)
        flat = np.atleast_1d(t_arr).ravel()
        v = np.asarray(self.eval(flat, x), dtype=self.dtype)
        if v.shape == ():
            v = np.full(flat.shape, v)
        v = v.reshape(flat.size, self.components) if v.size else np.zeros((flat.size, self.components), self.dtype)
        return v.reshape(t_arr.shape + (self.components,))

    def value(self, t, x):
        """Scalar convenience: component 0 at a single point."""
        return self(np.array([t]), as_point(x))[0, 0]

    def with_support(self, support):
        return FieldConfiguration(self.family, self.eval, self.components, self.scalar_kind,
                                  support, self.noise)

    def scaled(self, c):
        ev = self.eval
        kind = "complex" if (self.scalar_kind == "complex" or np.iscomplexobj(c)) else "real"
        return FieldConfiguration(self.family, lambda t, x: c * np.asarray(ev(t, x)),
                                  self.components, kind, self.support, self.noise)

    def check_support(self, t_samples=None, tol=0.0):
        """Largest |value| found outside the declared support on the sample grid."""
        worst = 0.0
        for x in self.family.base.samples():
            lo, hi = self.support.bounds(x)
            flo, fhi = self.family.fiber(x)
            ts = t_samples if t_samples is not None else _fiber_samples(flo, fhi, 10.0, 201)
            ts = np.asarray(ts, float)
            out = ts[(ts < lo) | (ts > hi)]
            if out.size:
                worst = max(worst, float(np.max(np.abs(self(out, x)))))
        return worst


def masked(eval_fn, support):
    """Wrap ``eval_fn`` so it returns exact zeros outside ``support``."""
    if isinstance(support, Unrestricted):
        return eval_fn

    def ev(t, x):
        lo, hi = support.bounds(x)
        t = np.asarray(t, float)
        v = np.asarray(eval_fn(t, x))
        keep = (t >= lo) & (t <= hi)
        if v.ndim > 1:
            keep = keep.reshape(keep.shape + (1,) * (v.ndim - 1))
        return np.where(keep, v, 0)

    return ev


# --- proper time -----------------------------------------------------------

def proper_time(family: SpacetimeFamily, t, x, anchor: Section, tol=1e-10, max_depth=40):
    """``T(t, x) = int_{anchor(x)}^t rho(s, x) ds`` by adaptive Simpson."""
    x = as_point(x)
    t = float(t)
    if not family.in_fiber(t, x):
        raise DomainError(f"t={t} outside the fiber {family.fiber(x)} at x={x}")
    a = anchor(x)
    if not family.in_fiber(a, x):
        raise DomainError(f"anchor {a} outside the fiber at x={x}")
    return integrate(lambda s: float(family.density(s, x)), a, t, tol, max_depth)


def inverse_proper_time(family: SpacetimeFamily, T, x, anchor: Section, tol=1e-12,
                        quad_tol=1e-10, max_expand=60):
    """Solve ``proper_time(t, x) = T`` for ``t`` by bisection."""
    x = as_point(x)
    T = float(T)
    lo, hi = family.fiber(x)
    a = anchor(x)

    def Tof(s):
        return proper_time(family, s, x, anchor, quad_tol)

    # bracket: walk toward the endpoint on T's side, doubling the step
    if T == 0.0:
        return a
    sign = 1.0 if T > 0 else -1.0
    end = hi if sign > 0 else lo
    inner = a
    step = 1.0
    for _ in range(max_expand):
        if math.isinf(end):
            outer = a + sign * step
        else:
            outer = a + (end - a) * (1.0 - 2.0 ** -min(step, 50))
        if sign * (Tof(outer) - T) >= 0:
            break
        inner = outer
        step *= 2.0
    else:
        raise DomainError(f"T={T} lies outside the proper-time range of the fiber at x={x}")
    if not math.isinf(end):
        edge = integrate(lambda s: float(family.density(s, x)), a,
                         end - sign * 1e-15 * max(1.0, abs(end)), quad_tol)
        if sign * (edge - T) <= 0:
            raise DomainError(f"T={T} outside ({Tof(lo + 1e-15)}, {edge}) at x={x}")
    left, right = (inner, outer) if sign > 0 else (outer, inner)
    while right - left > tol * max(1.0, abs(left), abs(right)) * 0.5 and right - left > tol:
        mid = 0.5 * (left + right)
        if Tof(mid) < T:
            left = mid
        else:
            right = mid
    return 0.5 * (left + right)


class ProperClock:
    """Smooth, cached proper time from an anchor section, vectorized over ``t``.

    Uses panel Gauss-Legendre integration so ``T`` is smooth in ``t``
    (suitable for finite differencing), unlike the adaptive-Simpson
    :func:`proper_time`.
    """

    def __init__(self, family: SpacetimeFamily, anchor: Section, panel=1.0):
        self.family = family
        self.anchor = anchor
        self.panel = panel
        self._cache = {}

    def _integrators(self, x):
        got = self._cache.get(x)
        if got is None:
            a = self.anchor(x)
            dens = (lambda s, x=x: self.family.rho(s, x))
            got = (a, CumulativeIntegrator(None, dens, a, +1, self.panel),
                   CumulativeIntegrator(None, dens, a, -1, self.panel))
            self._cache[x] = got
        return got

    def __call__(self, t, x):
        t = np.atleast_1d(np.asarray(t, float))
        a, fwd, bwd = self._integrators(as_point(x))
        T = np.zeros(t.shape)
        up = t >= a
        if up.any():
            T[up] = fwd(t[up])[1]
        if (~up).any():
            T[~up] = bwd(t[~up])[1]
        return T


def vertical_region(family: SpacetimeFamily, section: Section, direction: str):
    """Membership test for the vertical future (``t >= sigma``) or past of a section."""
    if direction not in ("future", "past"):
        raise ValueError("direction must be 'future' or 'past'")

    def member(t, x):
        s = section(as_point(x))
        t = np.asarray(t, float)
        out = t >= s if direction == "future" else t <= s
        return bool(out) if out.ndim == 0 else out

    return member


# --- restriction, gluing, embeddings ---------------------------------------

def restrict_field(field: FieldConfiguration, h, new_base: BaseDomain) -> FieldConfiguration:
    """Pull a field back along the base map ``h: new_base -> old base``."""
    fam = field.family.pullback(h, new_base)
    ev = field.eval
    return FieldConfiguration(fam, lambda t, x: ev(t, as_point(h(x))),
                              field.components, field.scalar_kind,
                              field.support.pullback(lambda x: as_point(h(x))))


def _bounding_box(boxes):
    dim = boxes[0].dimension
    return tuple((min(b.box[i][0] for b in boxes), max(b.box[i][1] for b in boxes))
                 for i in range(dim))


def glue_fields(cover: Sequence[BaseDomain], locals_: Sequence[FieldConfiguration], tol=1e-8,
                t_samples=None) -> FieldConfiguration:
    """Glue fields given on sub-boxes of the base into one global field.

    Overlaps are compared on the union of both sub-boxes' sample grids
    (restricted to the overlap) and on ``t_samples``.  Evaluation delegates
    to the first sub-box containing the base point.
    """
    if len(cover) != len(locals_) or not cover:
        raise ValueError("need one local field per cover element")
    box = _bounding_box(cover)
    grid = tuple(max(c.grid[i] for c in cover) * len(cover) for i in range(len(box)))
    base = BaseDomain(box, grid)
    for x in base.samples():
        if not any(c.contains(x) for c in cover):
            raise DomainError(f"sub-boxes do not cover the base at x={x}")
    if t_samples is None:
        t_samples = np.linspace(-5.0, 5.0, 41)
    t_samples = np.asarray(t_samples, float)

    worst = (0.0, None, None)
    for i, j in itertools.combinations(range(len(cover)), 2):
        ov = [(max(a[0], b[0]), min(a[1], b[1])) for a, b in zip(cover[i].box, cover[j].box)]
        if any(lo > hi for lo, hi in ov):
            continue
        pts = {x for x in cover[i].samples() + cover[j].samples()
               if all(lo <= v <= hi for v, (lo, hi) in zip(x, ov))}
        # sample the overlap itself so thin overlaps are not missed
        axes = [np.linspace(lo, hi, 3) for lo, hi in ov]
        pts |= {tuple(float(v) for v in p) for p in itertools.product(*axes)}
        for x in sorted(pts):
            lo_i, hi_i = locals_[i].family.fiber(x)
            ts = t_samples[(t_samples > lo_i) & (t_samples < hi_i)]
            if not ts.size:
                continue
            d = np.abs(locals_[i](ts, x) - locals_[j](ts, x)).max(axis=-1)
            k = int(np.argmax(d))
            if d[k] > worst[0]:
                worst = (float(d[k]), float(ts[k]), x)
    if worst[0] > tol:
        err, t, x = worst
        raise IncompatibleError(
            f"local fields disagree by {err:.3e} > tol={tol:g} at t={t}, x={x}", worst=worst)

    cover = tuple(cover)
    locals_ = tuple(locals_)

    def pick(x):
        for c, f in zip(cover, locals_):
            if c.contains(x):
                return f
        raise DomainError(f"x={x} outside the glued base")

    fam = SpacetimeFamily(
        base,
        lambda t, x: pick(as_point(x)).family.density(t, x),
        lambda x: pick(as_point(x)).family.fiber_lo(x),
        lambda x: pick(as_point(x)).family.fiber_hi(x),
    )
    first = locals_[0]
    support = first.support
    if not all(type(f.support) is type(support) for f in locals_):
        support = Unrestricted()
    elif not isinstance(support, Unrestricted):
        support = _glued_support(cover, [f.support for f in locals_], pick)
    return FieldConfiguration(fam, lambda t, x: pick(as_point(x)).eval(t, x),
                              first.components, first.scalar_kind, support)


def _glued_support(cover, supports, pick):
    def section(attr):
        def sigma(x):
            for c, s in zip(cover, supports):
                if c.contains(x):
                    return getattr(s, attr)(x)
            raise DomainError(f"x={x} outside the glued base")
        return Section(sigma)

    s0 = supports[0]
    if isinstance(s0, VC):
        return VC(section("lower"), section("upper"))
    if isinstance(s0, VPC):
        return VPC(section("lower"))
    return VFC(section("upper"))


@dataclass(frozen=True)
class EmbeddingReport:
    passed: bool
    monotone: bool
    in_target: bool
    form_error: float
    min_slope: float
    samples: int


def check_open_embedding(f, source: SpacetimeFamily, target: SpacetimeFamily,
                         t_samples=None, tol=1e-8, window=5.0, n=81) -> EmbeddingReport:
    """Sampled check that ``f(., x)`` is an orientation-preserving open
    embedding of fibers that pulls ``target``'s 1-form back to ``source``'s."""
    monotone = True
    in_target = True
    worst_form = 0.0
    min_slope = math.inf
    count = 0
    for x in source.base.samples():
        lo, hi = source.fiber(x)
        ts = (np.asarray(t_samples, float) if t_samples is not None
              else _fiber_samples(lo, hi, window, n))
        ts = ts[(ts > lo) & (ts < hi)]
        ft = np.asarray(f(ts, x), float)
        if not np.all(np.diff(ft) > 0):
            monotone = False
        tlo, thi = target.fiber(x)
        if not (np.all(ft > tlo) and np.all(ft < thi)):
            in_target = False
        slope = derivatives(lambda s: np.asarray(f(s, x), float), ts, 1e-3, order=(1,))[1]
        min_slope = min(min_slope, float(slope.min()))
        lhs = target.rho(ft, x) * slope
        worst_form = max(worst_form, float(np.max(np.abs(lhs - source.rho(ts, x)))))
        count += ts.size
    passed = monotone and in_target and min_slope > 0 and worst_form <= tol
    return EmbeddingReport(passed, monotone, in_target, worst_form, min_slope, count)


@dataclass(frozen=True)
class Embedding:
    """A fiberwise map ``t -> f(t, x)`` between two families over one base.

    ``inverse`` is optional; without it points are pulled back by bisection.
    """

    source: SpacetimeFamily
    target: SpacetimeFamily
    map: Callable
    inverse: Callable | None = None

    def check(self, **kw) -> EmbeddingReport:
        return check_open_embedding(self.map, self.source, self.target, **kw)

    def invert(self, t, x, tol=1e-14):
        """Preimage of target points; NaN where ``t`` is outside the image."""
        t = np.atleast_1d(np.asarray(t, float))
        if self.inverse is not None:
            return np.asarray(self.inverse(t, x), float)
        lo, hi = self.source.fiber(x)
        lo = lo if math.isfinite(lo) else -1e6
        hi = hi if math.isfinite(hi) else 1e6
        flo = float(np.asarray(self.map(np.array([lo]), x))[0])
        fhi = float(np.asarray(self.map(np.array([hi]), x))[0])
        left = np.full(t.shape, lo)
        right = np.full(t.shape, hi)
        for _ in range(200):
            mid = 0.5 * (left + right)
            below = np.asarray(self.map(mid, x), float) < t
            left = np.where(below, mid, left)
            right = np.where(below, right, mid)
            if np.all(right - left <= tol * np.maximum(1.0, np.abs(mid))):
                break
        out = 0.5 * (left + right)
        return np.where((t > flo) & (t < fhi), out, np.nan)

    def compose(self, after: "Embedding") -> "Embedding":
        """``after o self``."""
        f, g = self.map, after.map
        inv = None
        if self.inverse is not None and after.inverse is not None:
            fi, gi = self.inverse, after.inverse
            inv = lambda t, x: fi(gi(t, x), x)
        return Embedding(self.source, after.target, lambda t, x: g(f(t, x), x), inv)

    def push_section(self, sec: Section) -> Section:
        f = self.map
        return Section(lambda x: float(np.asarray(f(np.array([sec(x)]), x))[0]))


def pushforward_field(field: FieldConfiguration, emb: Embedding) -> FieldConfiguration:
    """Extension by zero of ``field`` along the embedding."""
    ev = field.eval

    def pushed(t, x):
        t = np.asarray(t, float)
        s = emb.invert(t, x)
        ok = ~np.isnan(s)
        out = np.zeros((t.size, field.components), field.dtype)
        if ok.any():
            out[ok] = np.asarray(ev(s[ok], x), field.dtype).reshape(int(ok.sum()), field.components)
        return out

    sup = field.support
    if isinstance(sup, VC):
        new_sup = VC(emb.push_section(sup.lower), emb.push_section(sup.upper))
    elif isinstance(sup, VPC):
        new_sup = VPC(emb.push_section(sup.lower))
    elif isinstance(sup, VFC):
        new_sup = VFC(emb.push_section(sup.upper))
    else:
        new_sup = sup
    return FieldConfiguration(emb.target, pushed, field.components, field.scalar_kind, new_sup)


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def _invert_monotone(fn, target, lo, hi, iters=200, tol=1e-14):
    # vectorized bisection for increasing fn
    left = np.full(target.shape, lo, float)
    right = np.full(target.shape, hi, float)
    for _ in range(iters):
        mid = 0.5 * (left + right)
        below = fn(mid) < target
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
        if np.all(right - left <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (left + right)


def _solve_clock(clock, rho, target, start, lo, hi, iters=30):
    # Newton on T(s) = target (T' = rho), bisection where it does not settle
    s = np.clip(start, lo, hi)
    for _ in range(iters):
        step = (clock(s) - target) / rho(s)
        s = np.clip(s - step, lo, hi)
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(s))):
            return s
    bad = np.abs(clock(s) - target) > 1e-12 * np.maximum(1.0, np.abs(target))
    if bad.any():
        s[bad] = _invert_monotone(clock, target[bad], lo, hi)
    return s


def proper_time_shift(family: SpacetimeFamily, shift, anchor: Section | None = None,
                      reach=50.0) -> Embedding:
    """Isometric self-embedding moving every point forward by ``shift`` units of
    proper time.  For a ``t``-independent density this is a plain translation
    in ``t`` by ``shift / rho``.
    """
    anchor = anchor or Section.constant(0.0)
    clock = ProperClock(family, anchor)
    shift = float(shift)

    def bracket(x):
        lo, hi = family.fiber(x)
        a = anchor(x)
        return max(lo, a - reach), min(hi, a + reach)

    def move(t, x, d):
        t = np.atleast_1d(np.asarray(t, float))
        lo, hi = bracket(x)
        rho = lambda s: family.rho(s, x)
        return _solve_clock(lambda s: clock(s, x), rho, clock(t, x) + d, t + d / rho(t), lo, hi)

    return Embedding(family, family, lambda t, x: move(t, x, shift),
                     lambda t, x: move(t, x, -shift))
