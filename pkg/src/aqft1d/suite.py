"""Verification suite: builds a scenario from a RunConfig and runs every check.

Each check returns ``(max_error, samples)``; the suite compares against the
configured tolerance.  Checks are independent, construct their own objects
and may run in parallel; results are sorted by name.
"""
from __future__ import annotations

import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .fields import bump_field
from .geometry import (VC, BaseDomain, Section, SpacetimeFamily, as_point, glue_fields,
                       inverse_proper_time, proper_time, proper_time_shift, restrict_field)
from .green import (Dirac, InitialData, KleinGordon, apply_operator, causal_propagator,
                    green_retarded, initial_data, solve_ivp, verification_times,
                    verify_exact_sequence, verify_green_inverse)
from .config import DEFAULT_TOLERANCES
from .models import (BosonicModel, FermionicModel, dirac_pairing, ip_from_spacetime, poisson_from_spacetime,
                     pullback_coherence_check, pushforward_observables, smoothness_probe,
                     u1_action)
from .quantize import multiply, star

WORKERS_ENV = "AQFT1D_MAX_WORKERS"


def max_workers():
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


# --- scenario construction ------------------------------------------------------

class Scenario:
    def __init__(self, cfg):
        self.cfg = cfg
        self.base = BaseDomain(cfg.box, cfg.grid)
        c, slope, q = cfg.density["constant"], cfg.density["slope"], cfg.density["quadratic"]

        def density(t, x):
            t = np.asarray(t, float)
            return c + sum(s * v for s, v in zip(slope, x)) + q * t * t

        self.family = SpacetimeFamily(self.base, density)
        self.family.validate()
        if cfg.mass is not None:
            mc, ms = cfg.mass["constant"], cfg.mass["slope"]
            self.mass = lambda x: mc + sum(s * v for s, v in zip(ms, x))
            self.operator = KleinGordon(self.family, self.mass)
        else:
            self.mass = None
            self.operator = Dirac(self.family)
        self.tests = [self.test_field(t, self.family) for t in cfg.tests]
        self.x0 = cfg.point if cfg.point is not None else self.base.samples()[0]

    def test_field(self, spec, family):
        if self.cfg.fermionic:
            return bump_field(family, spec.center, spec.width, amplitude=list(spec.amplitude),
                              components=2)
        return bump_field(family, spec.center, spec.width, amplitude=spec.amplitude[0])

    def model(self):
        if self.cfg.fermionic:
            return FermionicModel(self.family, self.tests)
        return BosonicModel(self.family, self.mass, self.tests)

    def square_map(self):
        box = self.cfg.box

        def h(x):
            return tuple(lo + (v - lo) ** 2 / (hi - lo) for v, (lo, hi) in zip(x, box))
        return h

    def reverse_map(self):
        box = self.cfg.box

        def h(x):
            return tuple(hi - (v - lo) for v, (lo, hi) in zip(x, box))
        return h


def _times(field, x, n=25):
    return verification_times(field, as_point(x), n)


# --- checks ---------------------------------------------------------------------

def check_proper_time_roundtrip(sc):
    rng = random.Random(sc.cfg.seed)
    anchor = Section.constant(0.0)
    worst = 0.0
    n = 20
    for _ in range(n):
        x = tuple(rng.uniform(lo, hi) for lo, hi in sc.cfg.box)
        T = rng.uniform(-3.0, 3.0)
        t = inverse_proper_time(sc.family, T, x, anchor)
        worst = max(worst, abs(proper_time(sc.family, t, x, anchor) - T))
    return worst, n


def check_restrict_functorial(sc):
    h1, h2 = sc.square_map(), sc.reverse_map()
    f = sc.tests[0]
    once = restrict_field(restrict_field(f, h1, sc.base), h2, sc.base)
    both = restrict_field(f, lambda x: h1(h2(x)), sc.base)
    worst, count = 0.0, 0
    for x in sc.base.samples():
        ts = _times(f, h1(h2(x)))
        worst = max(worst, float(np.max(np.abs(once(ts, x) - both(ts, x)))))
        count += ts.size
    return worst, count


def check_glue_roundtrip(sc):
    (lo, hi), rest = sc.cfg.box[0], sc.cfg.box[1:]
    mid = 0.5 * (lo + hi)
    pad = 0.1 * (hi - lo)
    boxes = [((lo, mid + pad),) + rest, ((mid - pad, hi),) + rest]
    cover = [BaseDomain(b, sc.cfg.grid) for b in boxes]
    f = sc.tests[0]
    locals_ = [restrict_field(f, lambda x: x, c) for c in cover]
    glued = glue_fields(cover, locals_, tol=1e-12,
                        t_samples=np.linspace(f.support.lower(sc.x0) - 1, f.support.upper(sc.x0) + 1, 21))
    worst, count = 0.0, 0
    for x in sc.base.samples():
        ts = _times(f, x)
        worst = max(worst, float(np.max(np.abs(glued(ts, x) - f(ts, x)))))
        count += ts.size
    return worst, count


def _inverse_reports(sc):
    out = []
    for f in sc.tests:
        out.append(verify_green_inverse(sc.operator, f, n=25))
    return out


def check_inverse_left(sc):
    reps = [r[0] for r in _inverse_reports(sc)]
    return max(r.max_error for r in reps), sum(r.samples for r in reps)


def check_inverse_right(sc):
    reps = [r[1] for r in _inverse_reports(sc)]
    return max(r.max_error for r in reps), sum(r.samples for r in reps)


def check_support(sc):
    worst, count = 0.0, 0
    for f in sc.tests:
        g = green_retarded(sc.operator, f)
        for x in sc.base.samples():
            a = f.support.lower(x)
            ts = np.linspace(a - 2.0, a, 21)[:-1]
            worst = max(worst, float(np.max(np.abs(g(ts, x)))))
            count += ts.size
    return worst, count


def _exact_node(k):
    def check(sc):
        reps = verify_exact_sequence(sc.operator, sc.tests, n=25)
        mine = reps[k::4]
        return max(r.max_error for r in mine), sum(r.samples for r in mine)
    return check


def _random_data(sc, rng):
    sigma = Section.constant(0.0)
    if sc.cfg.fermionic:
        z = [complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(2)]
        return InitialData.constant(sigma, np.array([z]))
    return InitialData.constant(sigma, np.array([[rng.uniform(-1, 1)], [rng.uniform(-1, 1)]]))


def check_ivp_data_solve(sc):
    rng = random.Random(sc.cfg.seed + 1)
    worst, count = 0.0, 0
    for _ in range(5):
        data = _random_data(sc, rng)
        sol = solve_ivp(sc.operator, data.sigma, data)
        back = initial_data(sc.operator, data.sigma, sol)
        for x in sc.base.samples():
            worst = max(worst, float(np.max(np.abs(back(x) - data(x)))))
            count += 1
    return worst, count


def check_ivp_solve_data(sc):
    worst, count = 0.0, 0
    for f in sc.tests:
        Phi = causal_propagator(sc.operator, f)
        sigma = Section(lambda x, f=f: f.support.upper(x) + 0.5)
        data = initial_data(sc.operator, sigma, Phi)
        again = solve_ivp(sc.operator, sigma, data, scalar_kind=f.scalar_kind)
        for x in sc.base.samples():
            ts = _times(f, x)
            worst = max(worst, float(np.max(np.abs(again(ts, x) - Phi(ts, x)))))
            count += ts.size
    return worst, count


def check_linearity(sc):
    f1, f2 = sc.tests[0], sc.tests[-1]
    a, b = 0.75, -1.25
    e1, e2 = f1.eval, f2.eval
    sup = VC(Section(lambda x: min(f1.support.lower(x), f2.support.lower(x))),
             Section(lambda x: max(f1.support.upper(x), f2.support.upper(x))))
    combo = type(f1)(f1.family, lambda t, x: a * np.asarray(e1(t, x)) + b * np.asarray(e2(t, x)),
                     f1.components, f1.scalar_kind, sup)
    g, g1, g2 = (green_retarded(sc.operator, h) for h in (combo, f1, f2))
    worst, count = 0.0, 0
    for x in sc.base.samples():
        ts = _times(combo, x)
        worst = max(worst, float(np.max(np.abs(g(ts, x) - a * g1(ts, x) - b * g2(ts, x)))))
        count += ts.size
    return worst, count


def _algebra(sc):
    return sc.model().algebra(sc.x0)


def _random_element(alg, rng, terms=3, max_len=3):
    out = alg.zero()
    for _ in range(terms):
        n = rng.randint(0, max_len)
        word = tuple(rng.randrange(alg.rank) for _ in range(n))
        out = out + alg.normal_form(word, complex(rng.randint(-3, 3), rng.randint(-3, 3)))
    return out


def _rel(a, b):
    scale = 1.0 + max((abs(c) for c in list(a.terms.values()) + list(b.terms.values())), default=0.0)
    return a.distance(b) / scale


def check_relations(sc):
    alg = _algebra(sc)
    gens = alg.gens()
    worst = 0.0
    S = alg.space.tau * 1j if not sc.cfg.fermionic else alg.space.pairing
    for i, gi in enumerate(gens):
        for j, gj in enumerate(gens):
            if sc.cfg.fermionic:
                c = multiply(gi, gj) + multiply(gj, gi)
            else:
                c = multiply(gi, gj) - multiply(gj, gi)
            worst = max(worst, c.distance(alg.one(S[i][j])))
    return worst, len(gens) ** 2


def check_associativity(sc):
    alg = _algebra(sc)
    rng = random.Random(sc.cfg.seed + 2)
    worst = 0.0
    n = 50
    for _ in range(n):
        a, b, c = (_random_element(alg, rng) for _ in range(3))
        worst = max(worst, _rel(multiply(multiply(a, b), c), multiply(a, multiply(b, c))))
    return worst, n


def check_star(sc):
    alg = _algebra(sc)
    rng = random.Random(sc.cfg.seed + 3)
    worst = 0.0
    n = 50
    for _ in range(n):
        a, b = _random_element(alg, rng), _random_element(alg, rng)
        worst = max(worst, _rel(star(star(a)), a), _rel(star(multiply(a, b)),
                                                         multiply(star(b), star(a))))
    return worst, n


def check_confluence(sc):
    alg = _algebra(sc)
    rng = random.Random(sc.cfg.seed + 4)
    worst = 0.0
    n = 50
    for _ in range(n):
        word = tuple(rng.randrange(alg.rank) for _ in range(rng.randint(0, 5)))
        left = alg.normal_form(word, strategy="leftmost")
        right = alg.normal_form(word, strategy="rightmost")
        worst = max(worst, _rel(left, right))
    return worst, n


def _raw_structure(sc, tests, x):
    if sc.cfg.fermionic:
        model = FermionicModel(sc.family, tests)
        return ip_from_spacetime(sc.family, model.tests, x, model.perm, raw=True)[1], model.perm
    return poisson_from_spacetime(sc.family, sc.mass, tests, x, raw=True)[1], None


def check_structure_symmetry(sc):
    worst, count = 0.0, 0
    for x in sc.base.samples():
        M, perm = _raw_structure(sc, sc.tests, x)
        if perm is None:
            worst = max(worst, float(np.max(np.abs(M + M.T))))
        else:
            idx = np.array(perm)
            worst = max(worst, float(np.max(np.abs(M - M.T))),
                        float(np.max(np.abs(np.conj(M) - M[np.ix_(idx, idx)]))))
        count += M.size
    return worst, count


def check_quotient(sc):
    x = sc.x0
    worst, count = 0.0, 0
    for f in sc.tests:
        Pf = apply_operator(sc.operator, f)
        if sc.cfg.fermionic:
            gens = FermionicModel(sc.family, sc.tests).tests
            M = dirac_pairing(sc.family, gens, [Pf], x)
        else:
            M = poisson_from_spacetime(sc.family, sc.mass, list(sc.tests) + [Pf], x, raw=True)[1]
            M = M[:, -1]
        worst = max(worst, float(np.max(np.abs(M))))
        count += M.size
    return worst, count


def _pullback(kind):
    def check(sc):
        model = sc.model()
        if kind == "identity":
            h = (lambda x: x)
        elif kind == "constant":
            c = tuple(0.5 * (lo + hi) for lo, hi in sc.cfg.box)
            h = (lambda x: c)
        else:
            h = sc.square_map()
        rep = pullback_coherence_check(h, sc.base, model)
        return rep.max_error, rep.samples
    return check


def check_pushforward(sc):
    model = sc.model()
    push = pushforward_observables(proper_time_shift(sc.family, 1.0), model, sc.x0,
                                   tol=float("inf"), t_samples=np.linspace(-3, 3, 13))
    return push.deviation, model.rank ** 2


def check_pushforward_compose(sc):
    model = sc.model()
    f1, f2 = proper_time_shift(sc.family, 1.0), proper_time_shift(sc.family, 0.5)
    kw = {"t_samples": np.linspace(-3, 3, 13)}
    p1 = pushforward_observables(f1, model, sc.x0, **kw)
    p2 = pushforward_observables(f2, p1.target_model, sc.x0, **kw)
    p12 = pushforward_observables(f1.compose(f2), model, sc.x0, **kw)
    comp = p1.compose(p2)
    worst = 0.0
    for a, b in zip(comp.images, p12.images):
        worst = max(worst, max((abs(a.coefficient(w) - b.coefficient(w))
                                for w in set(a.terms) | set(b.terms)), default=0.0))
    return worst, model.rank


def check_smoothness(sc):
    x = sc.x0
    if sc.cfg.fermionic:
        # pairing along the first base axis: s -> B_01 at x(s)
        tests = sc.tests
        model = FermionicModel(sc.family, tests)

        def obs(s):
            xs = (s,) + tuple(x[1:])
            return float(np.real(ip_from_spacetime(sc.family, model.tests, xs, model.perm)
                                 .pairing[0, model.perm[0]]))
        s0 = 0.5 * sum(sc.cfg.box[0])
    else:
        tests = sc.tests

        def obs(m):
            return float(poisson_from_spacetime(sc.family, m, tests, x).tau[0, -1])
        s0 = sc.mass(x)
    rep = smoothness_probe(obs, s0)
    err = 0.0 if rep.exact else abs(rep.order - 2.0)
    return (err if np.isfinite(err) else float("inf")), len(rep.steps)


def _phases(sc):
    ph = list(sc.cfg.phases) or [0.3, 1.7, -2.2]
    return [complex(np.cos(p), np.sin(p)) for p in ph]


def check_u1_pairing(sc):
    model = sc.model()
    worst = 0.0
    for z in _phases(sc):
        act = u1_action(z, model, sc.x0, tol=float("inf"))
        worst = max(worst, act.pairing_error)
    return worst, len(_phases(sc))


def check_u1_group_law(sc):
    model = sc.model()
    zs = _phases(sc)
    worst = 0.0
    count = 0
    for i, z1 in enumerate(zs):
        for z2 in zs[i:]:
            a = u1_action(z1, model, sc.x0, check_pairing=False)
            b = u1_action(z2, model, sc.x0, check_pairing=False)
            ab = u1_action(z1 * z2, model, sc.x0, check_pairing=False, unit_tol=1e-12)
            comp = b.compose(a)
            for p, q in zip(comp.images, ab.images):
                worst = max(worst, p.distance(q))
            count += 1
    return worst, count


def check_u1_pushforward(sc):
    model = sc.model()
    emb = proper_time_shift(sc.family, 1.0)
    push = pushforward_observables(emb, model, sc.x0, t_samples=np.linspace(-3, 3, 13))
    target = push.target_model
    worst = 0.0
    for z in _phases(sc):
        g_src = u1_action(z, model, sc.x0, check_pairing=False)
        g_dst = u1_action(z, target, sc.x0, check_pairing=False)
        lhs = push.compose(g_dst)
        rhs = g_src.compose(push)
        for p, q in zip(lhs.images, rhs.images):
            worst = max(worst, p.distance(q))
    return worst, len(_phases(sc))


COMMON = {
    "geometry.glue_roundtrip": check_glue_roundtrip,
    "geometry.proper_time_roundtrip": check_proper_time_roundtrip,
    "geometry.restrict_functorial": check_restrict_functorial,
    "green.exact_sequence.a_inverse": _exact_node(0),
    "green.exact_sequence.b_kernel": _exact_node(1),
    "green.exact_sequence.c_solution": _exact_node(2),
    "green.exact_sequence.d_surjective": _exact_node(3),
    "green.inverse_left": check_inverse_left,
    "green.inverse_right": check_inverse_right,
    "green.ivp_data_solve": check_ivp_data_solve,
    "green.ivp_solve_data": check_ivp_solve_data,
    "green.linearity": check_linearity,
    "green.support": check_support,
    "models.pullback.constant": _pullback("constant"),
    "models.pullback.identity": _pullback("identity"),
    "models.pullback.square": _pullback("square"),
    "models.pushforward": check_pushforward,
    "models.pushforward_compose": check_pushforward_compose,
    "models.quotient": check_quotient,
    "models.smoothness": check_smoothness,
    "models.structure_symmetry": check_structure_symmetry,
    "quantize.associativity": check_associativity,
    "quantize.confluence": check_confluence,
    "quantize.relations": check_relations,
    "quantize.star": check_star,
}

U1 = {
    "models.u1_group_law": check_u1_group_law,
    "models.u1_pairing": check_u1_pairing,
    "models.u1_pushforward": check_u1_pushforward,
}


def checks_for(cfg):
    out = dict(COMMON)
    if cfg.scenario == "u1-dirac":
        out.update(U1)
    return dict(sorted(out.items()))


def tolerance_key(name):
    """Check names with a dotted suffix share their parent's tolerance."""
    while name not in DEFAULT_TOLERANCES and "." in name:
        name = name.rsplit(".", 1)[0]
    return name


@dataclass(frozen=True)
class CheckResult:
    check: str
    status: str
    max_error: float | None
    tolerance: float
    samples: int
    runtime_ms: int
    message: str = ""

    def as_dict(self):
        d = {"check": self.check, "status": self.status, "max_error": _json_float(self.max_error),
             "tolerance": _json_float(self.tolerance), "samples": self.samples, "runtime_ms": self.runtime_ms}
        if self.message:
            d["message"] = self.message
        return d


def _json_float(v):
    if v is None or not np.isfinite(v):
        return None
    return float(v)


def _run_one(name, fn, sc, tol, timings):
    start = time.perf_counter()
    try:
        err, samples = fn(sc)
        status = "pass" if err <= tol else "fail"
        msg = ""
    except Exception as exc:  # reported, not raised
        err, samples, status = None, 0, "error"
        msg = f"{type(exc).__name__}: {exc}"
    ms = int(round((time.perf_counter() - start) * 1000)) if timings else 0
    return CheckResult(name, status, None if err is None else float(err), tol, int(samples), ms, msg)


def run_verify(cfg, timings=False, workers=None):
    """Run the scenario's checks and return the report as a plain dict."""
    sc = Scenario(cfg)
    checks = checks_for(cfg)
    workers = workers or max_workers()
    jobs = [(n, f, cfg.tolerances[tolerance_key(n)]) for n, f in checks.items()]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_one(j[0], j[1], Scenario(cfg), j[2], timings), jobs))
    else:
        results = [_run_one(n, f, sc, tol, timings) for n, f, tol in jobs]
    results.sort(key=lambda r: r.check)
    counts = {s: sum(r.status == s for r in results) for s in ("pass", "fail", "error")}
    return {
        "artifact": "aqft1d",
        "version": __version__,
        "config": cfg.echo(),
        "checks": [r.as_dict() for r in results],
        "summary": {"total": len(results), **counts,
                    "passed": counts["fail"] == 0 and counts["error"] == 0},
    }
