import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabispec.exceptions import IrregularFinitePoint, NotIrregular, UnsupportedRank
from rabispec.heun import HeunParams
from rabispec.odecore import (
    AsymptoticData, RationalODE, Verdict, bargmann_admissibility, classify_singularities,
    indicial_roots, irregular_infinity_data,
)
from rabispec.rabi_eps import Model1Params, heun_params, model1_ode


def test_model1_points_are_regular():
    pts = classify_singularities(model1_ode(Model1Params(1.0, 0.4, 0.7, 0.2)))
    assert sorted(round(p.location.real, 12) for p in pts) == [-0.4, 0.4]
    assert all(p.is_regular for p in pts)


def test_model1_exponents_in_z():
    # exponents {0, x - eps} at -lambda and {0, 1 + x + eps} at +lambda
    pts = {round(p.location.real, 9): p for p in
           classify_singularities(model1_ode(Model1Params(1.0, 0.4, 0.7, 0.2)))}
    assert sorted(np.real(pts[-0.4].exponents)) == pytest.approx([0.0, 0.8], abs=1e-12)
    assert sorted(np.real(pts[0.4].exponents)) == pytest.approx([0.0, 2.2], abs=1e-12)


def test_heun_form_exponents():
    hp = heun_params(1.0, 0.4, 0.7, 0.2)
    pts = {round(p.location.real, 9): p for p in classify_singularities(hp.ode())}
    assert sorted(np.real(pts[0.0].exponents)) == pytest.approx(sorted([0.0, -hp.beta]), abs=1e-12)
    assert sorted(np.real(pts[1.0].exponents)) == pytest.approx(sorted([0.0, -hp.gamma]), abs=1e-12)


def test_cubic_pole_is_irregular():
    ode = RationalODE([0.0], [1.0], [1.0], [0.0, 0.0, 0.0, 1.0])
    (pt,) = classify_singularities(ode)
    assert not pt.is_regular and pt.location == 0
    with pytest.raises(IrregularFinitePoint):
        classify_singularities(ode, strict=True)


def test_reduced_form_cancels_common_factor():
    # (z - 1) / ((z - 1)(z + 2)) reduces to 1 / (z + 2)
    ode = RationalODE([-1.0, 1.0], [-2.0, 1.0, 1.0], [0.0], [1.0])
    assert ode.p_den.degree() == 1
    assert [p.location for p in classify_singularities(ode)] == [pytest.approx(-2.0)]


def test_model1_asymptotic_pairs():
    lam, eps, E = 0.4, 0.2, 1.0
    a = irregular_infinity_data(model1_ode(Model1Params(E + lam ** 2, lam, 0.7, eps)))
    got = sorted((c.real, r.real) for c, r in a.pairs)
    want = sorted([(lam, E + lam ** 2 + eps - 1), (-lam, E + lam ** 2 - eps)])
    assert np.allclose(got, want, atol=1e-12)
    assert np.allclose(got, [(-0.4, 0.96), (0.4, 0.36)], atol=1e-12)
    assert a.poincare_rank == 1 and a.growth_order == 1.0


def test_constant_coefficients():
    a = irregular_infinity_data(RationalODE([0.0], [1.0], [-1.0], [1.0]))
    assert [(c.real, r.real) for c, r in a.pairs] == [(1.0, 0.0), (-1.0, 0.0)]


def test_regular_infinity_and_fractional_rank():
    with pytest.raises(NotIrregular) as info:
        irregular_infinity_data(RationalODE([2.0], [0.0, 1.0], [0.0], [1.0]))
    assert info.value.data.growth_order == 0
    with pytest.raises(UnsupportedRank):
        irregular_infinity_data(RationalODE([0.0], [1.0], [1.0], [0.0, 1.0]))
    with pytest.raises(UnsupportedRank):
        irregular_infinity_data(RationalODE([0.0], [1.0], [0.0, 1.0], [1.0]))


@pytest.mark.parametrize("order,sigma,verdict", [
    (1.0, 0.4, Verdict.ADMISSIBLE),
    (2.0, 0.5, Verdict.INCONCLUSIVE),
    (2.0, 0.4, Verdict.ADMISSIBLE),
    (2.0, 0.7, Verdict.NOT_ADMISSIBLE),
    (3.0, 0.1, Verdict.NOT_ADMISSIBLE),
])
def test_admissibility_rules(order, sigma, verdict):
    assert bargmann_admissibility(AsymptoticData((), 1, order, sigma)) is verdict


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(0.1, 1.5), mu=st.floats(0.05, 1.5), eps=st.floats(-0.9, 0.9),
       x=st.floats(-1.0, 6.0))
def test_indicial_roots_solve_indicial_polynomial(lam, mu, eps, x):
    # mu = 0 can make a point removable, so the count check needs mu > 0
    pts = classify_singularities(model1_ode(Model1Params(x, lam, mu, eps)))
    assert len(pts) == 2
    assert sorted(p.location.real for p in pts) == pytest.approx([-lam, lam], abs=1e-9)
    for p in pts:
        for r in p.exponents:
            # the exponents are {0, x - eps} and {0, 1 + x + eps}
            assert min(abs(r), abs(r - (x - eps)), abs(r - (1 + x + eps))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(p1=st.floats(-3, 3), q2=st.floats(-3, 3))
def test_indicial_roots_identity(p1, q2):
    for r in indicial_roots(p1, q2):
        assert abs(r * (r - 1) + p1 * r + q2) < 1e-10 * (1 + abs(r) ** 2)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.1, 1.5), mu=st.floats(0.0, 1.5), eps=st.floats(-0.9, 0.9),
       E=st.floats(-1.0, 5.0))
def test_asymptotic_pairs_cancel_leading_orders(lam, mu, eps, E):
    ode = model1_ode(Model1Params(E + lam ** 2, lam, mu, eps))
    a = irregular_infinity_data(ode)
    # with phi = e^{cz} z^rho (1 + O(1/z)) the z^0 and z^-1 orders of
    # phi''/phi + p phi'/phi + q must vanish
    z = 1e6
    for c, rho in a.pairs:
        lead = c * c + c * ode.p(z) + ode.q(z)
        sub = (2 * c * rho / z) + ode.p(z) * rho / z
        assert abs((lead + sub) * z) < 1e-4 * (1 + abs(rho)) + 1e-12 * z
    got = sorted((c.real, r.real) for c, r in a.pairs)
    want = sorted([(abs(lam), E + lam ** 2 + eps - 1), (-abs(lam), E + lam ** 2 - eps)])
    assert np.allclose(got, want, atol=1e-9)
