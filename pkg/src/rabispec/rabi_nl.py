"""Exact spectrum of the Rabi model with a nonlinear (spin-dependent) cavity term.

Hamiltonian ``(omega + U/2 sigma_z) a^dag a + omega0/2 sigma_z + g sigma_x (a^dag + a)``
in the sigma_z basis.  In the Bargmann variable rescaled to ``y = kappa z``,
``kappa = sqrt(4 omega^2 - U^2) / (2 g)``, the two components obey a first
order system ``psi' = A(y) psi`` with simple poles at ``y = +-1``.  Writing
``A = B(y) / (y^2 - 1)`` with ``B`` quadratic in ``y``, local solutions around
``s = +-1`` are vector Frobenius series in ``t = y - s`` generated by

    (A_s - (n + rho)) a_n = [((n - 1 + rho) - B1) a_{n-1} - B2 a_{n-2}] / (2 s)

where ``B(s + t) = B0 + B1 t + B2 t^2`` and ``A_s = B0 / (2 s)`` is the residue
matrix, whose eigenvalues are ``0`` and the spectral parameter ``x``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import Divergent, IntegerX, ResonantStep, SingularY, UnsupportedRegime
from .odecore import AsymptoticData, RationalODE, Verdict, bargmann_admissibility
from .odecore import irregular_infinity_data
from .spectral import Kind, ScanResult, SpectrumPoint, SpectrumSet, scan_zeros

INT_TOL = 1e-12
ZERO_RTOL = 1e-9
JUDD_RTOL = 1e-9
SERIES_TOL = 1e-15
MAX_TERMS = 4000


@dataclass(frozen=True)
class Model2Params:
    E: float
    omega: float
    omega0: float
    g: float
    U: float

    def __post_init__(self):
        for name in ("E", "omega", "omega0", "g", "U"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        check_regime(self.omega, self.U)
        if self.g == 0:
            raise ValueError("g = 0 decouples the system; use the closed form")

    @property
    def K(self) -> float:
        return math.sqrt(4 * self.omega ** 2 - self.U ** 2)

    @property
    def x(self) -> float:
        return x_of_E(self.E, self.omega, self.omega0, self.g, self.U)

    @property
    def kappa(self) -> float:
        return self.K / (2 * self.g)

    @classmethod
    def from_x(cls, x, omega, omega0, g, U) -> "Model2Params":
        return cls(E_of_x(x, omega, omega0, g, U), omega, omega0, g, U)


def check_regime(omega: float, U: float) -> None:
    """Only ``omega > |U|/2`` gives a Hamiltonian bounded from below."""
    if not omega > abs(U) / 2:
        raise UnsupportedRegime(
            "need omega > |U|/2; 4 omega^2 = U^2 is out of scope and below it "
            "the spectrum is unbounded")


def x_of_E(E, omega, omega0, g, U):
    return (4 * g * g + 4 * omega * E + omega0 * U) / (4 * omega ** 2 - U ** 2)


def E_of_x(x, omega, omega0, g, U):
    return (x * (4 * omega ** 2 - U ** 2) - 4 * g * g - omega0 * U) / (4 * omega)


# --- coefficient matrix -----------------------------------------------------

def coeff_matrix_A(p: Model2Params, y) -> np.ndarray:
    """The 2x2 system matrix at ``y`` (entries written out directly)."""
    y = complex(y)
    if abs(y * y - 1) < 1e-14:
        raise SingularY("A(y) has poles at y = +-1")
    g, U, w, w0, E, K = p.g, p.U, p.omega, p.omega0, p.E, p.K
    den = (U * U - 4 * w * w) * (y * y - 1)
    a11 = y * (-4 * g * g + (U - 2 * w) * (2 * E - w0)) / den
    a12 = -(4 * g * g * y * y + (U + 2 * w) * (2 * E + w0)) / ((U + 2 * w) * K * (y * y - 1))
    a21 = (4 * g * g * y * y - (U - 2 * w) * (2 * E - w0)) / ((U - 2 * w) * K * (y * y - 1))
    a22 = -y * (4 * g * g + (U + 2 * w) * (2 * E + w0)) / den
    return np.array([[a11, a12], [a21, a22]])


@dataclass(frozen=True)
class _BCoeffs:
    """Scalar (or array-valued) pieces of ``B(y) = (y^2 - 1) A(y)``."""

    b11: np.ndarray
    b22: np.ndarray
    c12: np.ndarray
    d12: np.ndarray
    c21: np.ndarray
    d21: np.ndarray

    def expansion(self, s: int):
        """``(B0, B1, B2)`` of ``B(s + t)`` as nested 2x2 lists."""
        B0 = [[self.b11 * s, self.c12 + self.d12], [self.c21 + self.d21, self.b22 * s]]
        B1 = [[self.b11, 2 * s * self.c12], [2 * s * self.c21, self.b22]]
        B2 = [[0.0 * self.b11, self.c12], [self.c21, 0.0 * self.b22]]
        return B0, B1, B2


def _bcoeffs(E, omega, omega0, g, U) -> _BCoeffs:
    E = np.asarray(E, dtype=float)
    omega0 = np.asarray(omega0, dtype=float)
    g = np.asarray(g, dtype=float)
    K = math.sqrt(4 * omega ** 2 - U ** 2)
    D = U * U - 4 * omega ** 2
    g2 = g * g
    return _BCoeffs(
        b11=(-4 * g2 + (U - 2 * omega) * (2 * E - omega0)) / D,
        b22=-(4 * g2 + (U + 2 * omega) * (2 * E + omega0)) / D,
        c12=-4 * g2 / ((U + 2 * omega) * K) + 0 * E,
        d12=-(2 * E + omega0) / K + 0 * g2,
        c21=4 * g2 / ((U - 2 * omega) * K) + 0 * E,
        d21=-(2 * E - omega0) / K + 0 * g2,
    )


def residue_matrix(p: Model2Params, s: int) -> np.ndarray:
    """``A_s``, the residue of ``A`` at ``y = s``."""
    B0, _, _ = _bcoeffs(p.E, p.omega, p.omega0, p.g, p.U).expansion(s)
    return np.array(B0, dtype=float) / (2 * s)


def model2_ode(p: Model2Params) -> RationalODE:
    """Scalar second-order equation for the first component in the Bargmann variable."""
    z = Polynomial([0.0, 1.0])
    y = p.kappa * z
    bc = _bcoeffs(p.E, p.omega, p.omega0, p.g, p.U)
    k = p.kappa
    d = y * y - 1
    # kappa * A(kappa z) = N_ij / d
    n11 = k * float(bc.b11) * y
    n22 = k * float(bc.b22) * y
    n12 = k * (float(bc.c12) * y * y + float(bc.d12))
    n21 = k * (float(bc.c21) * y * y + float(bc.d21))
    dd = d.deriv()
    n12d = n12.deriv()
    # P = -(a11 + a22 + a12'/a12), Q = -(a11' + a12 a21 - a11 a22 - a11 a12'/a12)
    p_num = -((n11 + n22) * n12 + n12d * d - n12 * dd)
    p_den = d * n12
    a11d_num = n11.deriv() * d - n11 * dd  # over d^2
    q_num = -(a11d_num * n12 + n12 * n12 * n21 - n11 * n22 * n12
              - n11 * (n12d * d - n12 * dd))
    q_den = d * d * n12
    return RationalODE(p_num.coef, p_den.coef, q_num.coef, q_den.coef)


def model2_asymptotics(p: Model2Params) -> tuple[AsymptoticData, Verdict]:
    """Rates ``+-2g/sqrt(4 omega^2 - U^2)`` with power ``x`` at infinity."""
    try:
        data = irregular_infinity_data(model2_ode(p), tol=1e-10)
    except Exception:  # noqa: BLE001 - fall back to the known closed form
        sigma = 2 * abs(p.g) / p.K
        data = AsymptoticData(((sigma, p.x), (-sigma, p.x)), 1, 1.0, sigma)
    return data, bargmann_admissibility(data)


# --- vector Frobenius series ------------------------------------------------

class VBranch(enum.Enum):
    ZERO_EXPONENT = "ZeroExponent"
    EXPONENT_X = "ExponentX"
    LOG_DERIVATIVE = "LogDerivative"


@dataclass(frozen=True)
class VectorSeries:
    """``(y - s)**exponent * sum a_n (y - s)**n`` plus an optional
    ``log(y - s) * sum l_n (y - s)**n`` companion.

    Truncation is chosen so the tail is negligible for ``|y - s|`` up to
    ``certified_radius``; the series still converges out to ``radius``.
    """

    point: int
    exponent: float
    coeffs: np.ndarray
    radius: float = 2.0
    log_coeffs: np.ndarray | None = None
    certified_radius: float = 1.0

    def eval(self, y, nder: int = 0):
        """Value (and first derivative if ``nder = 1``) as 2-vectors."""
        t = complex(y) - self.point
        if abs(t) >= 0.98 * self.radius:
            raise SingularY(f"|y - {self.point}| outside the convergence disk")
        out = _vec_horner(self.coeffs, t, self.exponent)
        if self.log_coeffs is not None:
            lv, ld = _vec_horner(self.log_coeffs, t, 0.0)
            lt = np.log(t)
            out = (out[0] + lt * lv, out[1] + lv / t + lt * ld)
        if np.isreal(y) and self.exponent == int(self.exponent) and self.log_coeffs is None:
            out = (out[0].real, out[1].real)
        return out if nder else out[0]

    __call__ = eval


def _vec_horner(coeffs, t, rho):
    v = np.zeros(2, dtype=complex)
    d = np.zeros(2, dtype=complex)
    for a in coeffs[::-1]:
        d = d * t + v
        v = v * t + a
    if rho:
        tr = t ** rho
        return tr * v, tr * (d + rho * v / t)
    return v, d


def _solve2(m, r):
    """Solve ``m a = r`` for nested-list 2x2 ``m`` and length-2 ``r`` (arrays ok)."""
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return [(m[1][1] * r[0] - m[0][1] * r[1]) / det,
            (m[0][0] * r[1] - m[1][0] * r[0]) / det]


def _matvec(m, v):
    return [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]


def _rhs(n, rho, B1, B2, a1, a2, s):
    """``[((n-1+rho) - B1) a_{n-1} - B2 a_{n-2}] / (2s)``."""
    k = n - 1 + rho
    t1 = _matvec(B1, a1)
    t2 = _matvec(B2, a2)
    return [((k * a1[i]) - t1[i] - t2[i]) / (2 * s) for i in range(2)]


def _null_vector(As, lam):
    """A unit eigenvector of ``As`` for eigenvalue ``lam``, continuous in the entries."""
    a11, a12 = As[0][0] - lam, As[0][1]
    a21, a22 = As[1][0], As[1][1] - lam
    v1 = [a22, -a21]
    v2 = [a12, -a11]
    n1 = np.hypot(v1[0], v1[1])
    n2 = np.hypot(v2[0], v2[1])
    use1 = n1 >= n2 * 1e-3
    vx = np.where(use1, v1[0], v2[0])
    vy = np.where(use1, v1[1], v2[1])
    nn = np.hypot(vx, vy)
    nn = np.where(nn == 0, 1.0, nn)
    return [vx / nn, vy / nn]


def _series_loop(As, B1, B2, s, rho, a0, *, resonant_check=True, r_eval=1.0,
                 tol=SERIES_TOL, max_terms=MAX_TERMS):
    shape = np.shape(a0[0])
    coeffs = [np.array(a0)]
    a2 = [np.zeros(shape), np.zeros(shape)]
    a1 = [np.asarray(a0[0], float), np.asarray(a0[1], float)]
    mag = np.hypot(a1[0], a1[1])
    small = np.zeros(shape, dtype=int)
    rn = 1.0
    n = 1
    while True:
        M = [[As[0][0] - (n + rho), As[0][1]], [As[1][0], As[1][1] - (n + rho)]]
        R = _rhs(n, rho, B1, B2, a1, a2, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            an = _solve2(M, R)
        if resonant_check:
            det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
            if np.any(np.abs(det) < 1e-13 * (1 + np.abs(M[0][0]) * np.abs(M[1][1]))):
                raise ResonantStep(f"singular recurrence matrix at step {n}")
        coeffs.append(np.array(an))
        rn *= r_eval
        term = np.hypot(an[0], an[1]) * rn
        mag = mag + term
        done = (term < tol * mag) | ~np.isfinite(term)
        small = np.where(done, small + 1, 0)
        if np.all(small >= 3):
            break
        n += 1
        if n >= max_terms:
            raise Divergent(f"vector series not converged after {max_terms} terms")
        a2, a1 = a1, an
    return np.array(coeffs)  # (N, 2, *shape)


def _is_pos_int(v, tol=INT_TOL):
    return abs(v - round(v)) <= tol and round(v) >= 1


def vector_frobenius(p: Model2Params, s: int = 1,
                     branch: VBranch = VBranch.ZERO_EXPONENT,
                     N: int = MAX_TERMS, *, r_eval: float = 1.0) -> VectorSeries:
    """Local vector solution at ``y = s``.

    ZERO_EXPONENT is the holomorphic series started from the residue-matrix
    null vector; it hits a singular step when ``x`` is a positive integer.
    EXPONENT_X starts ``(y - s)**m`` with the eigenvector for ``m = x`` and is
    always holomorphic.  LOG_DERIVATIVE is the Frobenius derivative
    ``dF/drho`` at ``rho = 0`` whose logarithmic part is proportional to the
    exponent-``x`` solution with the factor J_m.
    """
    if s not in (1, -1):
        raise ValueError("s must be +1 or -1")
    bc = _bcoeffs(p.E, p.omega, p.omega0, p.g, p.U)
    B0, B1, B2 = bc.expansion(s)
    As = [[B0[i][j] / (2 * s) for j in range(2)] for i in range(2)]
    x = p.x
    if branch is VBranch.ZERO_EXPONENT:
        if _is_pos_int(x):
            raise ResonantStep(f"x = {x:g} is a positive integer; use EXPONENT_X or LOG_DERIVATIVE")
        a0 = _null_vector(As, 0.0)
        c = _series_loop(As, B1, B2, s, 0.0, a0, resonant_check=False, r_eval=r_eval,
                         max_terms=N)
        return VectorSeries(s, 0.0, c, certified_radius=r_eval)
    if not _is_pos_int(x):
        raise IntegerX(f"branch {branch.value} needs a positive integer x, got {x:g}")
    m = int(round(x))
    if branch is VBranch.EXPONENT_X:
        v = [As[0][1], m - As[0][0]]
        if math.hypot(*v) < 1e-12:
            v = [m - As[1][1], As[1][0]]
        nv = math.hypot(*v)
        a0 = [v[0] / nv, v[1] / nv]
        c = _series_loop(As, B1, B2, s, float(m), a0, resonant_check=False, r_eval=r_eval,
                         max_terms=N)
        return VectorSeries(s, float(m), c, certified_radius=r_eval)
    return _log_series(As, B1, B2, s, m, r_eval=r_eval, max_terms=N)


def _log_series(As, B1, B2, s, m, *, r_eval=1.0, max_terms=MAX_TERMS):
    """``dF/drho`` at ``rho = 0`` with jets ``c0 + c1 rho + c2 rho^2``."""
    A = np.array(As, dtype=float)
    B1 = np.array(B1, dtype=float)
    B2 = np.array(B2, dtype=float)
    v0 = np.array([A[1, 1], -A[1, 0]])
    if np.linalg.norm(v0) < 1e-12:
        v0 = np.array([A[0, 1], -A[0, 0]])
    v0 = v0 / np.linalg.norm(v0)
    # eigen-projectors of A - m (eigenvalues 0 and -m)
    vr = np.array([A[0, 1], m - A[0, 0]])
    if np.linalg.norm(vr) < 1e-12:
        vr = np.array([m - A[1, 1], A[1, 0]])
    ul = np.array([A[1, 0], m - A[0, 0]])
    if np.linalg.norm(ul) < 1e-12:
        ul = np.array([m - A[1, 1], A[0, 1]])
    P0 = np.outer(vr, ul) / (ul @ vr)
    Pm = np.eye(2) - P0
    I2 = np.eye(2)
    jets = [np.array([np.zeros(2), v0, np.zeros(2)])]  # a_0(rho) = rho v0
    prev2 = np.zeros((3, 2))
    prev1 = jets[0]
    mag, small, rn, n = 1.0, 0, 1.0, 1
    while True:
        # R(rho) = [((n-1+rho) - B1) a_{n-1} - B2 a_{n-2}] / (2s)
        R = np.zeros((3, 2))
        for d in range(3):
            R[d] = (n - 1) * prev1[d] - B1 @ prev1[d] - B2 @ prev2[d]
            if d >= 1:
                R[d] += prev1[d - 1]
        R /= 2 * s
        M0 = A - n * I2
        a = np.zeros((3, 2))
        if n == m:
            # (M0 - rho) a = R with R = O(rho); pole of the inverse cancels
            a[0] = -P0 @ R[1]
            a[1] = -P0 @ R[2] - Pm @ R[1] / m
        else:
            Minv = np.linalg.inv(M0)
            a[0] = Minv @ R[0]
            a[1] = Minv @ (R[1] + a[0])
            a[2] = Minv @ (R[2] + a[1])
        jets.append(a)
        rn *= r_eval
        term = (np.linalg.norm(a[0]) + np.linalg.norm(a[1])) * rn
        mag += term
        small = small + 1 if (term < SERIES_TOL * mag and n > m) else 0
        if small >= 3:
            break
        n += 1
        if n >= max_terms:
            raise Divergent("log-derivative series did not converge")
        prev2, prev1 = prev1, a
    jets = np.array(jets)
    return VectorSeries(s, 0.0, jets[:, 1, :], log_coeffs=jets[:, 0, :],
                        certified_radius=r_eval)


def mirror(series: VectorSeries) -> VectorSeries:
    """The solution ``sigma_z psi(-y)`` expanded around ``-s``."""
    n = np.arange(series.coeffs.shape[0])
    sign = (-1.0) ** n
    if series.log_coeffs is not None:
        raise NotImplementedError("mirror of a logarithmic series is not supported")
    c = series.coeffs * sign[:, None] * np.array([1.0, -1.0])
    return VectorSeries(-series.point, series.exponent, c, series.radius,
                        certified_radius=series.certified_radius)


# --- gluing conditions ------------------------------------------------------

def _zero_series_at_origin(E, omega, omega0, g, U, s=1):
    """``psi(0)`` of the zero-exponent series at ``s`` for an array of energies."""
    E = np.asarray(E, dtype=float)
    bc = _bcoeffs(E, omega, omega0, g, U)
    B0, B1, B2 = bc.expansion(s)
    As = [[B0[i][j] / (2 * s) for j in range(2)] for i in range(2)]
    a0 = _null_vector(As, 0.0)
    c = _series_loop(As, B1, B2, s, 0.0, a0, resonant_check=False)
    t = -s
    powers = t ** np.arange(c.shape[0])
    powers = powers.reshape((-1,) + (1,) * (c.ndim - 1))
    return np.sum(c * powers, axis=0)


def wronskian_model2(p: Model2Params, y: float = 0.0) -> float:
    """``det[psi(y), sigma_z psi(-y)]`` for the zero-exponent solution at ``s = 1``."""
    if _is_pos_int(p.x):
        raise IntegerX(f"x = {p.x:g} is a positive integer; use integer_x_condition")
    ser = vector_frobenius(p, 1, VBranch.ZERO_EXPONENT, r_eval=max(1.0, 1.0 + abs(y)))
    a = np.real_if_close(ser.eval(y))
    b = np.real_if_close(ser.eval(-y)) * np.array([1.0, -1.0])
    return float(np.real(a[0] * b[1] - a[1] * b[0]))


def _generic_w(E, omega, omega0, g, U):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = _zero_series_at_origin(E, omega, omega0, g, U)
        return -2.0 * v[0] * v[1]


def judd_factor(m: int, omega: float, U: float, omega0, g, *, relative: bool = False):
    """Obstruction J_m to a log-free solution at ``x = m`` (vectorized in omega0, g).

    The zero-exponent recurrence is run from the (unnormalized) null vector of
    the residue matrix; at step ``m`` the right-hand side must lie in the range
    of ``A_s - m``, and J_m is its component along the left null vector.
    With ``relative=True`` the value is divided by the size of the terms it is
    built from.
    """
    check_regime(omega, U)
    omega0, g = np.broadcast_arrays(np.asarray(omega0, float), np.asarray(g, float))
    E = E_of_x(m, omega, omega0, g, U)
    s = 1
    bc = _bcoeffs(E, omega, omega0, g, U)
    B0, B1, B2 = bc.expansion(s)
    As = [[B0[i][j] / (2 * s) for j in range(2)] for i in range(2)]
    a1 = [As[1][1], -As[1][0]]
    a2 = [np.zeros_like(E), np.zeros_like(E)]
    for n in range(1, m):
        M = [[As[0][0] - n, As[0][1]], [As[1][0], As[1][1] - n]]
        an = _solve2(M, _rhs(n, 0.0, B1, B2, a1, a2, s))
        a2, a1 = a1, an
    R = _rhs(m, 0.0, B1, B2, a1, a2, s)
    u = [As[1][0], m - As[0][0]]
    J = u[0] * R[0] + u[1] * R[1]
    if not relative:
        return J
    t1 = _matvec(B1, a1)
    t2 = _matvec(B2, a2)
    parts = [np.hypot((m - 1) * a1[0], (m - 1) * a1[1]), np.hypot(*t1), np.hypot(*t2)]
    scale = np.hypot(*u) * sum(parts) / 2
    return J / np.where(scale == 0, 1.0, scale)


def closed_form_J1(omega, U, omega0, g):
    """Closed-form J_1 as a product of its two factors."""
    D = U * U - 4 * omega ** 2
    f1 = 4 * g ** 2 * U + D * (U + omega0)
    f2 = (16 * g ** 4 * U ** 2 + D ** 2 * ((U + omega0) ** 2 - 4 * omega ** 2)
          + 8 * g ** 2 * D * (U * (U + omega0) - 8 * omega ** 2))
    return f1 * f2


def closed_form_J1_factor_roots(omega, U, g, factor: int):
    """``omega0`` values on the zero set of one factor of the closed-form J_1."""
    D = U * U - 4 * omega ** 2
    if factor == 1:
        return np.array([-U - 4 * g ** 2 * U / D])
    # quadratic in t = U + omega0
    a = D ** 2
    b = 8 * g ** 2 * D * U
    c = 16 * g ** 4 * U ** 2 - 4 * omega ** 2 * D ** 2 - 64 * g ** 2 * D * omega ** 2
    disc = b * b - 4 * a * c
    if disc < 0:
        return np.array([])
    r = np.sqrt(disc)
    return np.array([(-b - r) / (2 * a), (-b + r) / (2 * a)]) - U


def parabola_omega0(m, omega, U, g):
    """The parabola in ``(omega0, g)`` on which the system decouples at ``x = m``."""
    return 4 * np.asarray(g) ** 2 * U / (4 * omega ** 2 - U ** 2) - U * m


@dataclass(frozen=True)
class ParabolaSolutions:
    """Closed-form pair of solutions on the decoupling parabola.

    ``psi = S phi`` with ``S = diag(sqrt(2w - U), sqrt(2w + U)) [[1, 1], [1, -1]]``
    and ``phi = (exp(-c y)(y+1)^x, exp(c y)(y-1)^x)``, ``c = 4g^2/(4w^2 - U^2)``.
    """

    params: Model2Params

    @property
    def rate(self) -> float:
        p = self.params
        return 4 * p.g ** 2 / (4 * p.omega ** 2 - p.U ** 2)

    @property
    def basis(self) -> np.ndarray:
        p = self.params
        return np.diag([math.sqrt(2 * p.omega - p.U), math.sqrt(2 * p.omega + p.U)]) @ \
            np.array([[1.0, 1.0], [1.0, -1.0]])

    def __call__(self, y):
        """Both solutions as columns, with their y-derivatives."""
        y = complex(y)
        c, x = self.rate, self.params.x
        f1 = np.exp(-c * y) * (y + 1) ** x
        f2 = np.exp(c * y) * (y - 1) ** x
        d1 = f1 * (-c + x / (y + 1))
        d2 = f2 * (c + x / (y - 1))
        S = self.basis
        return S @ np.diag([f1, f2]), S @ np.diag([d1, d2])

    def residual(self, y) -> float:
        """Largest relative residual of ``psi' - A psi`` over both columns."""
        P, dP = self(y)
        R = dP - coeff_matrix_A(self.params, y) @ P
        return float(np.max(np.abs(R)) / max(np.max(np.abs(dP)), np.max(np.abs(P))))


def parabola_solutions(m: int, omega: float, U: float, g: float) -> ParabolaSolutions:
    """Parameters on the decoupling parabola at ``x = m`` and their solutions."""
    w0 = float(parabola_omega0(m, omega, U, g))
    return ParabolaSolutions(Model2Params.from_x(m, omega, w0, g, U))


@dataclass(frozen=True)
class IntegerXOutcome:
    m: int
    wronskian: float
    relative: float
    judd: float
    judd_relative: float

    @property
    def judd_vanishes(self) -> bool:
        return abs(self.judd_relative) < JUDD_RTOL

    @property
    def is_spectrum_point(self) -> bool:
        return self.judd_vanishes or self.relative < ZERO_RTOL

    @property
    def kind(self) -> Kind:
        if self.judd_vanishes:
            return Kind.DOUBLY_DEGENERATE
        return Kind.DEGENERATE_SINGLE


def integer_x_condition(p: Model2Params) -> IntegerXOutcome:
    """Membership test at ``x = m``: the higher-exponent Wronskian and J_m."""
    x = p.x
    if not _is_pos_int(x, 1e-9):
        raise IntegerX(f"x = {x:g} is not a positive integer")
    m = int(round(x))
    q = Model2Params.from_x(m, p.omega, p.omega0, p.g, p.U)
    ser = vector_frobenius(q, 1, VBranch.EXPONENT_X)
    v = np.real(ser.eval(0.0))
    w = -2.0 * v[0] * v[1]
    rel = 2 * abs(v[0] * v[1]) / max(v[0] ** 2 + v[1] ** 2, 1e-300)
    J = float(judd_factor(m, q.omega, q.U, q.omega0, q.g))
    Jr = float(judd_factor(m, q.omega, q.U, q.omega0, q.g, relative=True))
    return IntegerXOutcome(m, float(w), float(rel), J, Jr)


# --- Juddian curves ---------------------------------------------------------

@dataclass
class JuddCurves:
    m: int
    parabola: np.ndarray  # (k, 2) columns omega0, g
    other: np.ndarray  # (k, 2) traced zero set of the remaining factors


def judd_curves(m: int, omega: float, U: float, omega0_grid, g_grid, *,
                bisect_steps: int = 50, parabola_gap: float = 1e-6) -> JuddCurves:
    """Zero sets of J_m on an ``(omega0, g)`` grid.

    The decoupling parabola is returned in closed form.  The other factors are
    traced by marching squares on ``J_m / (omega0 - parabola(g))``: every grid
    edge with a sign change is bisected to a curve point.
    """
    check_regime(omega, U)
    w0s = np.asarray(omega0_grid, float)
    gs = np.asarray(g_grid, float)
    par = np.column_stack([parabola_omega0(m, omega, U, gs), gs])
    lo, hi = w0s.min(), w0s.max()
    par = par[(par[:, 0] >= lo) & (par[:, 0] <= hi)]

    def reduced(w0, g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return judd_factor(m, omega, U, w0, g) / (w0 - parabola_omega0(m, omega, U, g))

    W0, G = np.meshgrid(w0s, gs, indexing="ij")
    F = reduced(W0, G)
    pts = []

    def edge(wa, ga, wb, gb, fa):
        for _ in range(bisect_steps):
            wm, gm = 0.5 * (wa + wb), 0.5 * (ga + gb)
            fm = reduced(np.array(wm), np.array(gm))
            if not np.isfinite(fm):
                break
            if (fm < 0) == (fa < 0):
                wa, ga, fa = wm, gm, fm
            else:
                wb, gb = wm, gm
        return 0.5 * (wa + wb), 0.5 * (ga + gb)

    for axis in (0, 1):
        fa = F[:-1, :] if axis == 0 else F[:, :-1]
        fb = F[1:, :] if axis == 0 else F[:, 1:]
        ok = np.isfinite(fa) & np.isfinite(fb) & (np.sign(fa) * np.sign(fb) < 0)
        for i, j in zip(*np.nonzero(ok)):
            i2, j2 = (i + 1, j) if axis == 0 else (i, j + 1)
            pts.append(edge(W0[i, j], G[i, j], W0[i2, j2], G[i2, j2], F[i, j]))
    other = np.array(sorted(set(pts))) if pts else np.zeros((0, 2))
    if other.size:
        d = np.abs(other[:, 0] - parabola_omega0(m, omega, U, other[:, 1]))
        other = other[d > parabola_gap]
    return JuddCurves(m, par, other)


# --- spectrum ---------------------------------------------------------------

def _closed_form_g0(omega, omega0, U, lo, hi):
    vals = []
    for sgn in (1, -1):
        slope = omega + sgn * U / 2
        n = 0
        while True:
            e = n * slope + sgn * omega0 / 2
            if e > hi + 1e-12:
                break
            if e >= lo - 1e-12:
                vals.append(e)
            n += 1
    vals.sort()
    merged: list[list] = []
    for v in vals:
        if merged and abs(v - merged[-1][0]) <= 1e-12:
            merged[-1][1] += 1
        else:
            merged.append([v, 1])
    return merged


def spectrum_model2(omega: float, omega0: float, g: float, U: float, E_range=(-1.0, 6.0),
                    scan_step: float = 0.005, refine_tol: float = 1e-10, *,
                    exclusion_halfwidth: float | None = None, pole_filter: bool = True,
                    max_workers: int | None = None) -> SpectrumSet:
    """Spectrum points with energy in ``E_range``, scanned directly in E."""
    lo, hi = map(float, E_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("E_range must be a finite increasing pair")
    if scan_step <= 0:
        raise ValueError("scan_step must be positive")
    check_regime(omega, U)
    g = abs(float(g))
    params = {"omega": omega, "omega0": omega0, "g": g, "U": U}
    if g == 0:
        pts = []
        for e, mult in _closed_form_g0(omega, omega0, U, lo, hi):
            kind = Kind.DOUBLY_DEGENERATE if mult == 2 else Kind.GENERIC
            xv = x_of_E(e, omega, omega0, 0.0, U)
            pts.append(SpectrumPoint(float(xv), float(e), kind, min(mult, 2)))
        return SpectrumSet(pts, "model2", params)

    xlo, xhi = x_of_E(lo, omega, omega0, g, U), x_of_E(hi, omega, omega0, g, U)
    ms = [m for m in range(max(1, math.ceil(xlo - 1)), math.floor(xhi + 1) + 1)]
    poles = [E_of_x(m, omega, omega0, g, U) for m in ms]
    half = 10 * refine_tol if exclusion_halfwidth is None else exclusion_halfwidth
    excl = [(e - half, e + half) for e in poles]

    def f(E):
        E = np.asarray(E, dtype=float)
        w = _generic_w(E, omega, omega0, g, U)
        xv = x_of_E(E, omega, omega0, g, U)
        for m in ms:
            w = w * (xv - m) ** 2
        return w

    def scan(piece) -> ScanResult:
        return scan_zeros(f, piece, scan_step, refine_tol, pole_filter,
                          exclusions=excl, vectorized=True)

    cuts = [lo] + [e for e in poles if lo < e < hi] + [hi]
    pieces = [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            results = list(ex.map(scan, pieces))
    else:
        results = [scan(pc) for pc in pieces]
    roots = sorted(b.refined_root for r in results for b in r.roots)
    rejected = sorted((b for r in results for b in r.rejected), key=lambda b: b.refined_root)

    points: list[SpectrumPoint] = []
    for m, e in zip(ms, poles):
        if not lo <= e <= hi:
            continue
        out = integer_x_condition(Model2Params.from_x(m, omega, omega0, g, U))
        if out.is_spectrum_point:
            kind = out.kind
            points.append(SpectrumPoint(float(m), float(e), kind,
                                        2 if kind is Kind.DOUBLY_DEGENERATE else 1))
    merge = max(10 * refine_tol, 2 * half)
    for r in roots:
        if any(abs(r - p.energy) <= merge for p in points):
            continue
        points.append(SpectrumPoint(float(x_of_E(r, omega, omega0, g, U)), float(r)))
    points.sort(key=lambda p: p.energy)
    asym, verdict = model2_asymptotics(Model2Params(0.5 * (lo + hi), omega, omega0, g, U))
    return SpectrumSet(points, "model2", params, rejected, asym, verdict)
