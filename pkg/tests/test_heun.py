import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabispec.exceptions import Divergent, GapMismatch, OutOfDisk, ResonantWithoutBranch
from rabispec.fockoracle import build_hamiltonian, eigenvalues
from rabispec.heun import (
    Branch, HeunParams, LocalSeries, TruncationPolicy, heun_eval, heun_log_series,
    heun_series, log_obstruction, obstruction_vanishes, series_derivatives, wronskian_scalar,
)
from rabispec.rabi_eps import heun_params

REF = heun_params(1.0, 0.4, 0.7, 0.2)


def ode_residual(hp, s, y):
    v, d1, d2 = series_derivatives(s, y, 2)
    p, q = hp.coefficients(y)
    scale = max(abs(d2), abs(p * d1), abs(q * v), 1e-300)
    return abs(d2 + p * d1 + q * v) / scale


def rk4_doubling(hp, y0, v0, d0, y1, tol=1e-13):
    """Adaptive RK4 with step doubling for v'' + p v' + q v = 0."""

    def f(y, s):
        p, q = hp.coefficients(y)
        return np.array([s[1], -p * s[1] - q * s[0]])

    def step(y, s, h):
        k1 = f(y, s)
        k2 = f(y + h / 2, s + h / 2 * k1)
        k3 = f(y + h / 2, s + h / 2 * k2)
        k4 = f(y + h, s + h * k3)
        return s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    y, s, h = y0, np.array([v0, d0], dtype=float), 1e-5
    while y < y1:
        h = min(h, y1 - y)
        big = step(y, s, h)
        half = step(y + h / 2, step(y, s, h / 2), h / 2)
        err = np.max(np.abs(half - big)) / max(1.0, np.max(np.abs(half)))
        if err <= tol:
            y, s = y + h, half + (half - big) / 15
            h *= 1.5 if err < tol / 20 else 1.0
        else:
            h /= 2
    return s


def test_parameter_map_reference_point():
    assert (REF.alpha, REF.beta, REF.gamma) == pytest.approx((0.64, -0.8, -2.2), abs=1e-14)
    assert (REF.delta, REF.eta) == pytest.approx((0.192, 0.514), abs=1e-14)


def test_normalisation_at_centres():
    h1 = heun_series(REF, 0)
    h2 = heun_series(REF, 1)
    assert heun_eval(h1, 0.0)[0] == 1.0
    assert heun_eval(h2, 1.0)[0] == 1.0
    assert h1.coeffs[0] == 1.0 and h2.coeffs[0] == 1.0


def test_trivial_series_evaluation():
    const = LocalSeries(0.0, 0.0, np.array([1.0]))
    assert heun_eval(const, 0.3) == (1.0, 0.0)
    lin = LocalSeries(0.0, 0.0, np.array([1.0, 2.0]))
    assert heun_eval(lin, 0.25) == (1.5, 2.0)
    with pytest.raises(OutOfDisk):
        heun_eval(lin, 0.96)


def test_series_length_at_half():
    s = heun_series(REF, 0, policy=TruncationPolicy(eval_radius=0.5))
    assert s.coeffs.size <= 200


@pytest.mark.parametrize("y1", [0.3, 0.5])
def test_h1_matches_ode_integration(y1):
    h1 = heun_series(REF, 0)
    y0 = 1e-3
    v0, d0 = heun_eval(h1, y0)
    v, d = rk4_doubling(REF, y0, v0, d0, y1)
    sv, sd = heun_eval(h1, y1)
    assert abs(sv - v) <= 1e-9 * abs(v)
    assert abs(sd - d) <= 1e-9 * max(abs(d), abs(v))


@pytest.mark.parametrize("center,branch", [(0, Branch.ZERO_EXPONENT), (1, Branch.ZERO_EXPONENT),
                                           (0, Branch.LARGE_EXPONENT), (1, Branch.LARGE_EXPONENT)])
def test_local_solutions_solve_heun(center, branch):
    s = heun_series(REF, center, branch)
    ys = center + 0.5 * np.exp(2j * np.pi * (np.arange(20) + 0.5) / 20) * np.linspace(0.3, 1, 20)
    assert max(ode_residual(REF, s, y) for y in ys) < 1e-10


generic = st.tuples(st.floats(-1.0, 6.0), st.floats(0.15, 1.2), st.floats(0.0, 1.2),
                    st.floats(0.0, 0.9)).filter(
    lambda t: min(abs((t[0] - t[3]) - round(t[0] - t[3])),
                  abs((1 + t[0] + t[3]) - round(1 + t[0] + t[3]))) > 1e-3)


@settings(max_examples=40, deadline=None)
@given(generic)
def test_residual_property(t):
    x, lam, mu, eps = t
    hp = heun_params(x, lam, mu, eps)
    for center in (0, 1):
        s = heun_series(hp, center)
        ys = center + 0.5 * np.exp(2j * np.pi * np.arange(20) / 20)
        assert max(ode_residual(hp, s, y) for y in ys) < 1e-10


@settings(max_examples=40, deadline=None)
@given(generic)
def test_abel_identity(t):
    x, lam, mu, eps = t
    hp = heun_params(x, lam, mu, eps)
    h1, h2 = heun_series(hp, 0), heun_series(hp, 1)
    ys = np.linspace(0.3, 0.7, 9)
    weight = [math.exp(hp.alpha * y) * y ** (hp.beta + 1) * (1 - y) ** (hp.gamma + 1) for y in ys]
    prod = [wronskian_scalar(h1, h2, y) * w for y, w in zip(ys, weight)]
    # relative to the size of the two products forming the Wronskian
    terms = []
    for y, w in zip(ys, weight):
        v1, d1 = heun_eval(h1, y)
        v2, d2 = heun_eval(h2, y)
        terms.append((abs(v1 * d2) + abs(d1 * v2)) * w)
    assert max(abs(p - prod[4]) for p in prod) <= 1e-9 * max(terms)


@settings(max_examples=30, deadline=None)
@given(generic)
def test_mirrored_parameters_solve_original_equation(t):
    x, lam, mu, eps = t
    hp = heun_params(x, lam, mu, eps)
    s = heun_series(hp, 1)
    for y in (0.6, 0.75, 0.9 + 0.2j):
        assert ode_residual(hp, s, y) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(0.1, 0.9))
def test_mu_nu_bracket_identities(a, b, c, d, e, y):
    hp = HeunParams(a, b, c, d, e)
    assert hp.mu_tilde + hp.nu_tilde == pytest.approx(a * (1 + (b + c) / 2) + d, abs=1e-13 * (1 + abs(a) * (abs(b) + abs(c))))
    ode = hp.ode()
    p, q = hp.coefficients(y)
    assert ode.p(y) == pytest.approx(p, rel=1e-13, abs=1e-13)
    assert ode.q(y) == pytest.approx(q, rel=1e-12, abs=1e-12)


def test_wronskian_of_identical_series_is_zero():
    h1 = heun_series(REF, 0)
    assert wronskian_scalar(h1, h1, 0.4) == 0.0


def test_wronskian_zero_set_independent_of_evaluation_point():
    xs = np.linspace(-0.9, 5.9, 400)
    xs = xs[np.minimum(np.abs((xs - 0.2) - np.round(xs - 0.2)),
                       np.abs((1.2 + xs) - np.round(1.2 + xs))) > 1e-3]
    signs = {}
    for y in (0.4, 0.5, 0.6):
        vals = []
        for x in xs:
            hp = heun_params(x, 0.4, 0.7, 0.2)
            vals.append(wronskian_scalar(heun_series(hp, 0), heun_series(hp, 1), y))
        signs[y] = np.sign(vals)
    assert np.array_equal(signs[0.4], signs[0.5]) and np.array_equal(signs[0.6], signs[0.5])


def test_resonant_zero_exponent_needs_routing():
    hp = heun_params(1.2, 0.4, 0.7, 0.2)  # x - eps = 1
    with pytest.raises(ResonantWithoutBranch):
        heun_series(hp, 0)
    with pytest.raises(GapMismatch):
        log_obstruction(hp, 0, 2)


def test_divergent_when_capped():
    with pytest.raises(Divergent):
        heun_series(REF, 0, policy=TruncationPolicy(max_terms=5, eval_radius=0.5))


def test_judd_point_from_obstruction_scan():
    mu = 0.4
    lams = np.linspace(0.3, 0.6, 61)
    obs = [log_obstruction(heun_params(1.0, l, mu, 0.0), 0, 1) for l in lams]
    i = int(np.nonzero(np.diff(np.sign(obs)))[0][0])
    lo, hi = lams[i], lams[i + 1]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.sign(log_obstruction(heun_params(1.0, mid, mu, 0.0), 0, 1)) == np.sign(obs[i]):
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    assert lam == pytest.approx(math.sqrt(1 - mu * mu) / 2, abs=1e-12)
    hp = heun_params(1.0, lam, mu, 0.0)
    assert obstruction_vanishes(hp, 0) and obstruction_vanishes(hp, 1)
    ev = eigenvalues(build_hamiltonian("RabiEps", {"lam": lam, "mu": mu, "eps": 0.0}, 120), 6)
    close = np.abs(ev - (1.0 - lam * lam)) < 1e-8
    assert close.sum() == 2


def test_decoupled_terminating_solution_is_large_exponent_branch():
    # mu = 0, x = 1 + eps: psi1 = (z + lam) exp(-lam z) is the exponent-1 solution
    # at z = -lam; the zero-exponent recurrence still carries a logarithm there.
    lam, eps = 0.5, 0.2
    hp = heun_params(1.0 + eps, lam, 0.0, eps)
    assert abs(log_obstruction(hp, 0, 1, relative=True)) > 1e-2
    h3 = heun_series(hp, 0, Branch.LARGE_EXPONENT)
    for y in (0.2, 0.5, 0.7):
        z = lam * (2 * y - 1)
        closed = (z + lam) * math.exp(-lam * z)
        series = math.exp(2 * lam * lam * y) * heun_eval(h3, y)[0]
        assert series == pytest.approx(closed / (2 * lam * math.exp(lam * lam)), rel=1e-12)


def test_generic_gap_two_has_logarithm():
    hp = heun_params(2.2, 0.6, 0.7, 0.2)
    assert abs(log_obstruction(hp, 0, 2, relative=True)) > 1e-3
    assert not obstruction_vanishes(hp, 0)


def test_log_companion_solves_equation():
    hp = heun_params(1.2, 0.4, 0.7, 0.2)
    s = heun_log_series(hp, 0)
    assert abs(s.log_coeff) > 1e-3
    for y in (0.2, 0.5, 0.3 + 0.3j):
        assert ode_residual(hp, s, y) < 1e-10


def test_log_companion_vanishes_at_judd_point():
    lam = math.sqrt(1 - 0.16) / 2
    s = heun_log_series(heun_params(1.0, lam, 0.4, 0.0), 0)
    assert abs(s.log_coeff) < 1e-12
