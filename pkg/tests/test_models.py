import math

import numpy as np
import pytest

from aqft1d.errors import PreconditionError
from aqft1d.fields import bump_field
from aqft1d.geometry import BaseDomain, Embedding, SpacetimeFamily, proper_time_shift
from aqft1d.green import Dirac, KleinGordon, apply_operator
from aqft1d.models import (BosonicModel, FermionicModel, close_under_star, dirac_pairing,
                           ip_from_spacetime, poisson_from_spacetime, pullback_coherence_check,
                           pushforward_observables, smoothness_probe, u1_action)

# Frozen mpmath value: two width-0.1 unit bumps at 0 and 2, m = 1, rho = 1.
# Double quadrature of phi1(t) * int sin(t - s) phi2(s) ds gives -sin(2) c^2.
TAU12_BUMPS = -0.907860673001836616686049156038
# (psi, 0) against its star (0, conj psi) for a unit bump: minus the squared mass.
B12_UNIT = -1.0

POINT = BaseDomain.point()
LINE = BaseDomain(((0.0, 1.0),), (3,))


def flat(base=POINT, c=1.0):
    return SpacetimeFamily(base, lambda t, x: np.full(np.shape(t), c, float))


def sloped(base=LINE):
    return SpacetimeFamily(base, lambda t, x: 1.0 + 0.2 * x[0] + 0.0 * np.asarray(t))


def test_poisson_pinned_oracle():
    fam = flat()
    tests = [bump_field(fam, 0.0, 0.1), bump_field(fam, 2.0, 0.1)]
    tau = poisson_from_spacetime(fam, 1.0, tests, ()).tau
    assert tau[0, 1] == pytest.approx(TAU12_BUMPS, abs=1e-7)
    assert tau[1, 0] == -tau[0, 1]


def test_single_test_has_zero_tau():
    fam = flat()
    space, raw = poisson_from_spacetime(fam, 1.0, [bump_field(fam, 0.0, 0.5)], (), raw=True)
    assert space.tau[0, 0] == 0
    assert abs(raw[0, 0]) <= 1e-8


def test_poisson_quotient():
    fam = sloped()
    KG = KleinGordon(fam, 1.0)
    psi = bump_field(fam, 0.5, 0.4)
    tests = [bump_field(fam, 0.0, 0.3), apply_operator(KG, psi)]
    for x in LINE.samples():
        _, raw = poisson_from_spacetime(fam, 1.0, tests, x, raw=True)
        assert abs(raw[0, 1]) <= 1e-7 and abs(raw[1, 0]) <= 1e-7


def test_dirac_pairing_pinned_oracle():
    fam = flat()
    gens, perm, sides = close_under_star([bump_field(fam, 0.0, 0.1, components=2)])
    assert perm == (1, 0) and sides == (0, 1)
    B = ip_from_spacetime(fam, gens, (), perm).pairing
    assert B[0, 1] == pytest.approx(B12_UNIT, abs=1e-8)
    assert B[0, 0] == 0 and B[1, 1] == 0


def test_dirac_quotient():
    fam = sloped()
    D = Dirac(fam)
    chi = bump_field(fam, 0.3, 0.4, amplitude=[1.0, 0.5j], components=2)
    model = FermionicModel(fam, [bump_field(fam, 0.0, 0.3, components=2)])
    M = dirac_pairing(fam, model.tests, [apply_operator(D, chi)], (0.5,))
    assert np.max(np.abs(M)) <= 1e-7


def test_pushforward_translation():
    fam = flat()
    model = BosonicModel(fam, 1.0, [bump_field(fam, 0.0, 0.3), bump_field(fam, 1.0, 0.3)])
    shift = Embedding(fam, fam, lambda t, x: np.asarray(t) + 1.0, lambda t, x: np.asarray(t) - 1.0)
    push = pushforward_observables(shift, model, ())
    assert push.deviation <= 1e-7
    ident = Embedding(fam, fam, lambda t, x: np.asarray(t), lambda t, x: np.asarray(t))
    same = pushforward_observables(ident, model, ())
    assert [im.terms for im in same.images] == [g.terms for g in model.algebra(()).gens()]


def test_pushforward_rejects_non_isometry():
    fam = flat()
    model = BosonicModel(fam, 1.0, [bump_field(fam, 0.0, 0.3)])
    stretch = Embedding(fam, fam, lambda t, x: 2.0 * np.asarray(t), lambda t, x: 0.5 * np.asarray(t))
    with pytest.raises(PreconditionError):
        pushforward_observables(stretch, model, ())


def test_pushforward_composes():
    fam = sloped()
    model = BosonicModel(fam, 1.0, [bump_field(fam, 0.0, 0.3), bump_field(fam, 1.5, 0.3)])
    a, b = proper_time_shift(fam, 1.0), proper_time_shift(fam, 0.5)
    pa = pushforward_observables(a, model, (0.5,))
    pb = pushforward_observables(b, pa.target_model, (0.5,))
    pab = pushforward_observables(a.compose(b), model, (0.5,))
    for u, v in zip(pa.compose(pb).images, pab.images):
        assert u.terms.keys() == v.terms.keys()
        assert all(abs(u.terms[w] - v.terms[w]) <= 1e-9 for w in u.terms)


@pytest.mark.parametrize("h", ["identity", "constant", "square"])
def test_pullback_coherence(h):
    fam = sloped()
    model = BosonicModel(fam, lambda x: 1.0 + 0.5 * x[0],
                         [bump_field(fam, 0.0, 0.3), bump_field(fam, 1.0, 0.3)])
    maps = {"identity": lambda x: x, "constant": lambda x: (0.3,), "square": lambda x: (x[0] ** 2,)}
    rep = pullback_coherence_check(maps[h], LINE, model)
    assert rep.passed, rep.as_dict()
    if h == "identity":
        assert rep.max_error == 0


def dirac_model(fam=None):
    fam = fam or sloped()
    return FermionicModel(fam, [bump_field(fam, 0.0, 0.3, components=2),
                                bump_field(fam, 1.0, 0.3, amplitude=[0.5, 1.0], components=2)])


def test_u1_examples():
    model = dirac_model()
    x = (0.5,)
    ident = u1_action(1.0, model, x)
    assert [im.terms for im in ident.images] == [g.terms for g in model.algebra(x).gens()]
    rot = u1_action(1j, model, x)
    for side, g, im in zip(model.sides, model.algebra(x).gens(), rot.images):
        assert im == g * (1j if side == 0 else -1j)
    with pytest.raises(PreconditionError):
        u1_action(1.1, model, x)


def test_u1_group_law_exact():
    model = dirac_model()
    x = (0.0,)
    rng = np.random.default_rng(7)
    for _ in range(3):
        z1, z2 = np.exp(1j * rng.uniform(-math.pi, math.pi, 2))
        a = u1_action(z1, model, x, check_pairing=False)
        b = u1_action(z2, model, x, check_pairing=False)
        ab = u1_action(z1 * z2, model, x, check_pairing=False)
        assert [im.terms for im in a.compose(b).images] == [im.terms for im in ab.images]


def test_u1_pairing_invariance():
    act = u1_action(np.exp(0.7j), dirac_model(), (1.0,))
    assert act.pairing_error <= 1e-9


def test_smoothness_examples():
    const = smoothness_probe(lambda s: 3.0, 0.0)
    assert const.exact and const.passed
    kink = smoothness_probe(abs, 0.0)
    assert not kink.passed
    fam = flat()
    tests = [bump_field(fam, 0.0, 0.1), bump_field(fam, 2.0, 0.1)]
    rep = smoothness_probe(lambda m: poisson_from_spacetime(fam, m, tests, ()).tau[0, 1], 1.0)
    assert rep.passed and 1.5 <= rep.order <= 2.5
