"""Truncated number-basis Hamiltonians and a small dense symmetric eigensolver.

Basis index ``2 n + spin`` with ``spin = 0`` for sigma_z = +1.  The solver
reduces the matrix to tridiagonal form with Householder reflections, finds
the lowest eigenvalues by Sturm-count bisection, recovers eigenvectors by
inverse iteration and checks every pair against the residual bound.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import ConvergenceFailure

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
RESIDUAL_RTOL = 1e-10


class Model(enum.Enum):
    RABI_EPS = "RabiEps"
    NONLINEAR_U = "NonlinearU"


@dataclass(frozen=True)
class FockOperator:
    n_trunc: int
    matrix: np.ndarray = field(repr=False)
    model: Model
    params: Mapping[str, float]

    @property
    def dim(self) -> int:
        return 2 * self.n_trunc


def _ladder(N: int):
    a = np.diag(np.sqrt(np.arange(1.0, N)), 1)
    return a, np.diag(np.arange(N, dtype=float))


def build_hamiltonian(model: Model | str, params: Mapping[str, float], N: int) -> FockOperator:
    """Dense Hamiltonian truncated to photon numbers ``0 .. N-1``.

    RabiEps takes ``lam, mu, eps``; NonlinearU takes ``omega, omega0, g, U``.
    """
    model = Model(model)
    if N < 2:
        raise ValueError("N must be at least 2")
    a, num = _ladder(N)
    I2, IN = np.eye(2), np.eye(N)
    field_op = np.kron(a + a.T, SIGMA_X)
    if model is Model.RABI_EPS:
        lam, mu, eps = (float(params[k]) for k in ("lam", "mu", "eps"))
        H = np.kron(num, I2) + mu * np.kron(IN, SIGMA_Z) + lam * field_op \
            + eps * np.kron(IN, SIGMA_X)
    else:
        w, w0, g, U = (float(params[k]) for k in ("omega", "omega0", "g", "U"))
        H = np.kron(num, w * I2 + 0.5 * U * SIGMA_Z) + 0.5 * w0 * np.kron(IN, SIGMA_Z) \
            + g * field_op
    return FockOperator(N, H, model, dict(params))


# --- eigensolver ------------------------------------------------------------

def _tridiagonalize(A: np.ndarray):
    """Householder reduction ``Q^T A Q = T``; returns diag, offdiag, reflectors."""
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    refl = []
    for k in range(n - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0 or np.all(x[1:] == 0.0):
            refl.append(None)
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        S = A[k + 1:, k + 1:]
        p = 2.0 * (S @ v)
        w = p - (v @ p) * v
        S -= np.outer(v, w) + np.outer(w, v)
        A[k + 1:, k] = 0.0
        A[k, k + 1:] = 0.0
        A[k + 1, k] = A[k, k + 1] = alpha
        refl.append(v)
    return np.diag(A).copy(), np.diag(A, 1).copy(), refl


def _apply_q(refl, X: np.ndarray) -> np.ndarray:
    """``Q X`` for ``Q = H_0 H_1 ... H_{n-3}``."""
    X = X.copy()
    for k in range(len(refl) - 1, -1, -1):
        v = refl[k]
        if v is None:
            continue
        blk = X[k + 1:]
        blk -= 2.0 * np.outer(v, v @ blk)
    return X


def _sturm_count(d, e2, sigma, pivmin):
    """Number of eigenvalues below each entry of ``sigma``."""
    q = d[0] - sigma
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0).astype(int)
    for i in range(1, d.size):
        q = d[i] - sigma - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def _bisect(d, e, k, iters=200):
    n = d.size
    r = np.zeros(n)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    lo0, hi0 = np.min(d - r), np.max(d + r)
    span = max(hi0 - lo0, 1.0)
    lo0 -= 1e-3 * span
    hi0 += 1e-3 * span
    e2 = e * e
    pivmin = np.finfo(float).tiny * max(1.0, np.max(e2) if e2.size else 1.0) / np.finfo(float).eps
    j = np.arange(k)
    lo = np.full(k, lo0)
    hi = np.full(k, hi0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = _sturm_count(d, e2, mid, pivmin)
        go_up = below <= j
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi)) + 1e-300):
            break
    return 0.5 * (lo + hi)


def _tridiag_solve(d, e, sigma, B, tiny):
    """Solve ``(T - sigma) X = B`` lane-wise with partial pivoting."""
    n = d.size
    dd = d[:, None] - sigma[None, :]
    du = np.repeat(e[:, None], sigma.size, axis=1).astype(float)
    dl = du.copy()
    du2 = np.zeros((max(n - 2, 0), sigma.size))
    b = B.copy()
    for i in range(n - 1):
        swap = np.abs(dd[i]) < np.abs(dl[i])
        safe_d = np.where(dd[i] == 0.0, tiny, dd[i])
        f_ns = dl[i] / safe_d
        f_sw = dd[i] / np.where(dl[i] == 0.0, tiny, dl[i])
        di1 = dd[i + 1].copy()
        dui = du[i].copy()
        dui1 = du[i + 1].copy() if i < n - 2 else None
        bi, bi1 = b[i].copy(), b[i + 1].copy()
        # no interchange
        nd1 = di1 - f_ns * dui
        nb1 = bi1 - f_ns * bi
        # interchange rows i and i+1
        sd_i = dl[i]
        sd1 = dui - f_sw * di1
        sb_i, sb1 = bi1, bi - f_sw * bi1
        dd[i] = np.where(swap, sd_i, dd[i])
        dd[i + 1] = np.where(swap, sd1, nd1)
        du[i] = np.where(swap, di1, dui)
        b[i] = np.where(swap, sb_i, bi)
        b[i + 1] = np.where(swap, sb1, nb1)
        if i < n - 2:
            du2[i] = np.where(swap, dui1, 0.0)
            du[i + 1] = np.where(swap, -f_sw * dui1, dui1)
    dd = np.where(np.abs(dd) < tiny, tiny, dd)
    X = np.zeros_like(b)
    X[n - 1] = b[n - 1] / dd[n - 1]
    if n >= 2:
        X[n - 2] = (b[n - 2] - du[n - 2] * X[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        X[i] = (b[i] - du[i] * X[i + 1] - du2[i] * X[i + 2]) / dd[i]
    return X


def _inverse_iteration(d, e, lams, norm, iters=4):
    n, k = d.size, lams.size
    tiny = np.finfo(float).eps * max(norm, 1e-300)
    ramp = np.linspace(1.0, 2.0, n)
    V = np.tile(ramp[:, None], (1, k)) + 0.01 * np.cos(np.outer(np.arange(n), np.arange(1, k + 1)))
    V /= np.linalg.norm(V, axis=0)
    # clusters of (numerically) equal eigenvalues need explicit orthogonalisation
    gap = 1e-9 * max(norm, 1.0)
    cluster_start = np.zeros(k, dtype=int)
    for j in range(1, k):
        cluster_start[j] = cluster_start[j - 1] if lams[j] - lams[j - 1] < gap else j
    for _ in range(iters):
        V = _tridiag_solve(d, e, lams, V, tiny)
        for j in range(k):
            for i in range(cluster_start[j], j):
                V[:, j] -= (V[:, i] @ V[:, j]) * V[:, i]
            V[:, j] /= np.linalg.norm(V[:, j])
    return V


def eigenpairs(H: np.ndarray, k: int | None = None, *, check: bool = True):
    """Lowest ``k`` eigenvalues (ascending) and orthonormal eigenvectors."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError("matrix must be square")
    k = n if k is None else int(k)
    if not 0 < k <= n:
        raise ValueError("need 0 < k <= dim")
    if n == 1:
        return H[0, :1].copy(), np.ones((1, 1))
    if not np.any(H - np.diag(np.diag(H))):
        # diagonal input: exact answer, independent of the truncation size
        order = np.argsort(np.diag(H), kind="stable")[:k]
        return np.diag(H)[order].copy(), np.eye(n)[:, order]
    d, e, refl = _tridiagonalize(H)
    lams = _bisect(d, e, k)
    norm = float(np.max(np.sum(np.abs(H), axis=1)))
    Vt = _inverse_iteration(d, e, lams, norm)
    V = _apply_q(refl, Vt)
    if check:
        res = np.linalg.norm(H @ V - V * lams[None, :], axis=0)
        bad = res > RESIDUAL_RTOL * max(norm, 1e-300)
        if np.any(bad):
            Vt = _inverse_iteration(d, e, lams, norm, iters=8)
            V = _apply_q(refl, Vt)
            res = np.linalg.norm(H @ V - V * lams[None, :], axis=0)
            if np.any(res > RESIDUAL_RTOL * max(norm, 1e-300)):
                raise ConvergenceFailure(
                    f"eigenpair residual {res.max():.3g} exceeds bound after iteration cap")
    return lams, V


def eigenvalues(op: FockOperator | np.ndarray, k: int | None = None) -> np.ndarray:
    """Sorted lowest ``k`` eigenvalues, each certified by its residual."""
    H = op.matrix if isinstance(op, FockOperator) else op
    return eigenpairs(H, k)[0]


@dataclass(frozen=True)
class ConvergenceRow:
    n_trunc: int
    drift: float


def convergence_check(model: Model | str, params: Mapping[str, float],
                      N_list: Sequence[int], k: int) -> list[ConvergenceRow]:
    """Max drift of the ``k`` lowest levels relative to the largest truncation."""
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    spectra = [eigenvalues(build_hamiltonian(model, params, N), k) for N in N_list]
    ref = spectra[-1]
    return [ConvergenceRow(N, float(np.max(np.abs(s - ref)))) for N, s in zip(N_list, spectra)]


def oracle_window(model: Model | str, params: Mapping[str, float], N: int,
                  lo: float, hi: float) -> np.ndarray:
    """Oracle energies in ``[lo, hi]``, computing just enough levels."""
    op = build_hamiltonian(model, params, N)
    k = min(op.dim, 16)
    while True:
        vals = eigenvalues(op, k)
        if vals[-1] > hi or k == op.dim:
            return vals[(vals >= lo) & (vals <= hi)]
        k = min(op.dim, 2 * k)
