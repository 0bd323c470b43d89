import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aqft1d.errors import PreconditionError, SupportError
from aqft1d.fields import BUMP_MASS, bump_field, bump_profile
from aqft1d.geometry import (VC, VPC, BaseDomain, FieldConfiguration, Section, SpacetimeFamily,
                             Unrestricted)
from aqft1d.green import (Dirac, InitialData, KleinGordon, apply_operator, causal_propagator,
                          green_advanced, green_retarded, initial_data, solve_ivp,
                          verify_exact_sequence, verify_green_inverse)

# Frozen mpmath values (30 digits) for the width-0.1 unit bump at 0, m = 1, rho = 1:
# c = int cos(s) phi(s) ds; by symmetry (G+ phi)(T) = sin(T) c past the support.
BUMP_COS_MOMENT = 0.999209652544227043257025526115
G_PLUS_AT_2 = 0.908578765917849121561989287472

POINT = BaseDomain.point()
ZERO = Section.constant(0.0)


def flat(c=1.0, base=POINT):
    return SpacetimeFamily(base, lambda t, x: np.full(np.shape(t), c, float))


def fn_field(fam, f, support=None, kind="real", n=1):
    return FieldConfiguration(fam, lambda t, x: f(np.asarray(t, float)), n, kind,
                              support or Unrestricted())


def test_bump_mass_constant():
    mp.mp.dps = 30
    exact = mp.quad(lambda u: mp.e ** (1 - 1 / (1 - u * u)), [-1, 0, 1])
    assert BUMP_MASS == pytest.approx(float(exact), rel=1e-15)
    assert bump_profile(np.array([0.0, 1.0, -1.5])).tolist() == [1.0, 0.0, 0.0]


def test_apply_operator_examples():
    KG = KleinGordon(flat(), 1.0)
    t = np.linspace(-3, 3, 13)
    assert np.max(np.abs(apply_operator(KG, fn_field(KG.family, np.cos))(t, ()))) <= 1e-6
    sq = apply_operator(KG, fn_field(KG.family, lambda t: t * t))
    assert sq.value(3.0, ()) == pytest.approx(11.0, abs=1e-6)
    KG2 = KleinGordon(flat(2.0), 1.0)
    lin = apply_operator(KG2, fn_field(KG2.family, lambda t: t))
    assert lin.value(2.0, ()) == pytest.approx(2.0, abs=1e-6)


def test_mass_must_be_positive():
    with pytest.raises(ValueError):
        KleinGordon(flat(), 0.0)


def test_green_of_zero_is_zero():
    KG = KleinGordon(flat(), 1.0)
    zero = fn_field(KG.family, np.zeros_like, VC(Section.constant(-1), Section.constant(1)))
    t = np.linspace(-3, 3, 7)
    for op in (green_retarded, green_advanced, causal_propagator):
        assert np.all(op(KG, zero)(t, ()) == 0)


def test_green_retarded_pinned_oracle():
    KG = KleinGordon(flat(), 1.0)
    phi = bump_field(KG.family, 0.0, 0.1)
    assert green_retarded(KG, phi).value(2.0, ()) == pytest.approx(G_PLUS_AT_2, abs=1e-8)
    assert G_PLUS_AT_2 == pytest.approx(math.sin(2.0) * BUMP_COS_MOMENT, abs=1e-15)


def test_causal_propagator_pinned_oracle():
    KG = KleinGordon(flat(), 1.0)
    G = causal_propagator(KG, bump_field(KG.family, 0.0, 0.1))
    assert G.value(2.0, ()) == pytest.approx(G_PLUS_AT_2, abs=1e-8)
    assert G.value(-2.0, ()) == pytest.approx(-G_PLUS_AT_2, abs=1e-8)


def test_dirac_retarded_unit_bump():
    D = Dirac(flat())
    psi = bump_field(D.family, 0.0, 0.1, components=2)
    S = green_retarded(D, psi)
    v = S(np.array([0.5, 3.0]), ())
    np.testing.assert_allclose(v[:, 0], -1j, atol=1e-10)
    np.testing.assert_allclose(v[:, 1], 0, atol=1e-15)


def test_support_classes_enforced():
    KG = KleinGordon(flat(), 1.0)
    past = fn_field(KG.family, np.cos, VPC(ZERO))
    with pytest.raises(SupportError):
        green_advanced(KG, past)
    with pytest.raises(SupportError):
        causal_propagator(KG, past)


def test_retarded_vanishes_below_support():
    fam = flat(1.0, BaseDomain(((0.0, 1.0),), (3,)))
    KG = KleinGordon(fam, lambda x: 1.0 + x[0])
    G = green_retarded(KG, bump_field(fam, 0.5, 0.3))
    for x in fam.base.samples():
        assert np.all(G(np.linspace(-3, 0.19, 30), x) == 0)


def test_initial_data_examples():
    KG = KleinGordon(flat(), 1.0)
    np.testing.assert_allclose(initial_data(KG, ZERO, fn_field(KG.family, np.cos))(()).ravel(),
                               [1, 0], atol=1e-9)
    np.testing.assert_allclose(initial_data(KG, ZERO, fn_field(KG.family, np.sin))(()).ravel(),
                               [0, 1], atol=1e-9)
    np.testing.assert_allclose(initial_data(KG, ZERO, fn_field(KG.family, np.zeros_like))(()).ravel(),
                               [0, 0], atol=0)
    with pytest.raises(PreconditionError):
        initial_data(KG, ZERO, fn_field(KG.family, lambda t: t * t))


def test_solve_ivp_examples():
    KG = KleinGordon(flat(), 1.0)
    cos = solve_ivp(KG, ZERO, InitialData.constant(ZERO, [[1.0], [0.0]]))
    assert cos.value(math.pi, ()) == pytest.approx(-1.0, abs=1e-12)
    sin = solve_ivp(KG, ZERO, InitialData.constant(ZERO, [[0.0], [1.0]]))
    assert sin.value(math.pi / 2, ()) == pytest.approx(1.0, abs=1e-12)
    zero = solve_ivp(KG, ZERO, InitialData.constant(ZERO, [[0.0], [0.0]]))
    assert np.all(zero(np.linspace(-5, 5, 11), ()) == 0)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), m=st.floats(0.3, 3), s=st.floats(-1, 1))
def test_ivp_data_solve_roundtrip(a, b, m, s):
    KG = KleinGordon(flat(1.3), m)
    sigma = Section.constant(s)
    data = InitialData.constant(sigma, [[a], [b]])
    back = initial_data(KG, sigma, solve_ivp(KG, sigma, data))(())
    np.testing.assert_allclose(back, data(()), atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(re=st.floats(-2, 2), im=st.floats(-2, 2))
def test_dirac_ivp_roundtrip(re, im):
    D = Dirac(flat())
    data = InitialData.constant(ZERO, [[complex(re, im), complex(im, -re)]])
    back = initial_data(D, ZERO, solve_ivp(D, ZERO, data))(())
    np.testing.assert_allclose(back, data(()), atol=1e-10)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_green_linearity(a, b):
    KG = KleinGordon(flat(), 1.0)
    f1, f2 = bump_field(KG.family, 0.0, 0.4), bump_field(KG.family, 0.3, 0.4)
    sup = VC(Section.constant(-0.4), Section.constant(0.7))
    combo = FieldConfiguration(KG.family, lambda t, x: a * f1.eval(t, x) + b * f2.eval(t, x),
                               support=sup)
    t = np.linspace(-1, 3, 9)
    lhs = green_retarded(KG, combo)(t, ())
    rhs = a * green_retarded(KG, f1)(t, ()) + b * green_retarded(KG, f2)(t, ())
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_green_inverse_klein_gordon_density_gradient():
    fam = SpacetimeFamily(BaseDomain(((0.0, 1.0),), (3,)),
                          lambda t, x: 1.0 + 0.2 * x[0] + 0.05 * np.asarray(t) ** 2)
    KG = KleinGordon(fam, 1.5)
    left, right = verify_green_inverse(KG, bump_field(fam, 0.2, 0.4), n=21)
    assert left.passed and right.passed


def test_exact_sequence_zero_field():
    KG = KleinGordon(flat(), 1.0)
    zero = fn_field(KG.family, np.zeros_like, VC(Section.constant(-1), Section.constant(1)))
    reports = verify_exact_sequence(KG, [zero])
    assert len(reports) == 4
    assert all(r.passed and r.max_error == 0 for r in reports)


@pytest.mark.parametrize("kind", ["kg", "dirac"])
def test_exact_sequence_bump(kind):
    fam = flat()
    if kind == "kg":
        P, phi = KleinGordon(fam, 1.0), bump_field(fam, 0.0, 0.5)
    else:
        P, phi = Dirac(fam), bump_field(fam, 0.0, 0.5, amplitude=[1.0, 0.5j], components=2)
    reports = verify_exact_sequence(P, [phi], tol=1e-6)
    assert [r.passed for r in reports] == [True] * 4, [r.as_dict() for r in reports]
