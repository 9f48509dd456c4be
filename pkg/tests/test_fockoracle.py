import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabispec.fockoracle import (
    Model, build_hamiltonian, convergence_check, eigenpairs, eigenvalues, oracle_window,
)


def test_basis_ordering_and_symmetry():
    op = build_hamiltonian(Model.RABI_EPS, {"lam": 0.3, "mu": 0.7, "eps": 0.2}, 6)
    H = op.matrix
    assert op.dim == 12 and H.shape == (12, 12)
    assert np.max(np.abs(H - H.T)) <= 1e-14
    # index 2n + spin: diagonal n + mu for spin up, n - mu for spin down
    assert H[4, 4] == pytest.approx(2.7) and H[5, 5] == pytest.approx(1.3)
    assert H[4, 5] == pytest.approx(0.2)  # eps couples the spins at equal n
    assert H[4, 7] == pytest.approx(0.3 * math.sqrt(3))  # lambda a^dag sigma_x


def test_decoupled_diagonals():
    H = build_hamiltonian("RabiEps", {"lam": 0.0, "mu": 0.7, "eps": 0.0}, 5).matrix
    assert np.array_equal(H, np.diag(np.diag(H)))
    assert np.allclose(np.diag(H), [n + s for n in range(5) for s in (0.7, -0.7)], atol=1e-15)
    H = build_hamiltonian("NonlinearU", {"omega": 2.0, "omega0": 1.0, "g": 0.0, "U": -2.0}, 5).matrix
    assert np.array_equal(H, np.diag(np.diag(H)))
    expected = [n * (2.0 + s * -1.0) + s * 0.5 for n in range(5) for s in (1, -1)]
    assert np.allclose(np.diag(H), expected, atol=1e-15)


def test_unbiased_decoupled_rabi_doubly_degenerate():
    lam = 0.6
    ev = eigenvalues(build_hamiltonian("RabiEps", {"lam": lam, "mu": 0.0, "eps": 0.0}, 120), 8)
    expected = np.repeat(np.arange(4) - lam * lam, 2)
    assert np.max(np.abs(ev - expected)) < 1e-10


def test_zero_coupling_levels():
    ev = eigenvalues(build_hamiltonian("RabiEps", {"lam": 0.0, "mu": 0.7, "eps": 0.2}, 20), 12)
    r = math.sqrt(0.53)
    expected = sorted(n + s * r for n in range(20) for s in (1, -1))[:12]
    assert np.max(np.abs(ev - expected)) < 1e-10


def test_diagonal_and_two_by_two():
    assert eigenvalues(np.diag([3.0, -1.0, 2.0])).tolist() == [-1.0, 2.0, 3.0]
    mu, eps = 0.7, 0.2
    ev = eigenvalues(np.array([[mu, eps], [eps, -mu]]))
    assert ev == pytest.approx([-math.hypot(mu, eps), math.hypot(mu, eps)], abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 31 - 1))
def test_matches_reference_eigensolver(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    A = A + A.T
    if n > 3:
        A[:, 1] = A[1, :] = 0.0
        A[1, 1] = A[0, 0]  # force a repeated eigenvalue sometimes
    lam, V = eigenpairs(A)
    ref = np.linalg.eigvalsh(A)
    scale = np.max(np.sum(np.abs(A), axis=1))
    assert np.max(np.abs(lam - ref)) <= 1e-12 * scale
    assert np.max(np.abs(V.T @ V - np.eye(n))) < 1e-9
    assert np.max(np.linalg.norm(A @ V - V * lam, axis=0)) <= 1e-10 * scale


def test_partial_spectrum_is_lowest():
    H = build_hamiltonian("RabiEps", {"lam": 0.7, "mu": 0.4, "eps": 0.1}, 60).matrix
    assert np.allclose(eigenvalues(H, 7), np.linalg.eigvalsh(H)[:7], atol=1e-12)
    with pytest.raises(ValueError):
        eigenvalues(H, 0)


def test_nonlinear_reduces_to_rabi():
    lam, mu = 0.45, 0.35
    a = build_hamiltonian("NonlinearU", {"omega": 1.0, "omega0": 2 * mu, "g": lam, "U": 0.0}, 30)
    b = build_hamiltonian("RabiEps", {"lam": lam, "mu": mu, "eps": 0.0}, 30)
    assert np.array_equal(a.matrix, b.matrix)


def test_basis_permutation_invariance():
    H = build_hamiltonian("NonlinearU", {"omega": 2.0, "omega0": 1.0, "g": 0.8, "U": -2.0}, 50).matrix
    N = 50
    perm = np.array([2 * n + s for s in (0, 1) for n in range(N)])  # spin-major order
    P = H[np.ix_(perm, perm)]
    assert np.max(np.abs(eigenvalues(H, 12) - eigenvalues(P, 12))) < 1e-10


def test_decoupled_drift_is_zero():
    rows = convergence_check("RabiEps", {"lam": 0.0, "mu": 0.7, "eps": 0.0}, [8, 20, 40], 8)
    assert all(r.drift == 0.0 for r in rows)


def test_rabi_self_convergence():
    rows = convergence_check("RabiEps", {"lam": 0.7, "mu": 0.4, "eps": 0.0}, [120, 160], 8)
    assert rows[0].drift < 1e-8


def test_nonlinear_self_convergence():
    rows = convergence_check("NonlinearU", {"omega": 2.0, "omega0": 1.0, "g": 1.0, "U": -2.0},
                             [160, 200], 8)
    assert rows[0].drift < 1e-6
    with pytest.raises(ValueError):
        convergence_check("RabiEps", {"lam": 0.1, "mu": 0.1, "eps": 0.0}, [40, 20], 4)


def test_window_selection():
    vals = oracle_window("RabiEps", {"lam": 0.0, "mu": 0.3, "eps": 0.4}, 40, 0.0, 3.0)
    assert vals == pytest.approx([0.5, 0.5, 1.5, 1.5, 2.5, 2.5])


def test_unknown_model_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian("Other", {}, 10)
    with pytest.raises(ValueError):
        build_hamiltonian("RabiEps", {"lam": 0.1, "mu": 0.1, "eps": 0.0}, 1)

