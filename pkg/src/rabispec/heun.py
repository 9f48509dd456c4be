"""Local Frobenius solutions of the confluent Heun equation.

The equation, in the non-symmetric (Maple ``HeunC``) form used throughout::

    v'' + (alpha + (beta+1)/y + (gamma+1)/(y-1)) v'
        + (mu_t/y + nu_t/(y-1)) v = 0

Multiplying by ``y(y-1)`` and inserting ``v = sum a_n y**(n+rho)`` gives the
three-term recurrence

    (n+1+rho)(n+1+rho+beta) a_{n+1}
        = [(n+rho)(n+rho+1+beta+gamma-alpha) - mu_t] a_n
          + [alpha (n+rho-1) + mu_t + nu_t] a_{n-1}

which every series below is generated from.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import Divergent, GapMismatch, OutOfDisk, ResonantWithoutBranch
from .odecore import RationalODE

INT_TOL = 1e-12
GUARD = 0.95


@dataclass(frozen=True)
class HeunParams:
    alpha: float
    beta: float
    gamma: float
    delta: float
    eta: float

    @property
    def mu_tilde(self) -> float:
        a, b, c = self.alpha, self.beta, self.gamma
        return 0.5 * (a - b - c + a * b - b * c) - self.eta

    @property
    def nu_tilde(self) -> float:
        a, b, c = self.alpha, self.beta, self.gamma
        return 0.5 * (a + b + c + a * c + b * c) + self.delta + self.eta

    def mirrored(self) -> "HeunParams":
        """Parameters of the same equation written in ``1 - y``."""
        return HeunParams(-self.alpha, self.gamma, self.beta, -self.delta,
                          self.delta + self.eta)

    def shifted(self) -> "HeunParams":
        """Parameters after the gauge ``y**-beta (y-1)**-gamma``."""
        return HeunParams(self.alpha, -self.beta, -self.gamma, self.delta, self.eta)

    def shifted_mirrored(self) -> "HeunParams":
        return HeunParams(-self.alpha, -self.gamma, self.beta, -self.delta,
                          self.delta + self.eta)

    def coefficients(self, y):
        """``(p(y), q(y))`` of ``v'' + p v' + q v = 0``."""
        p = self.alpha + (self.beta + 1) / y + (self.gamma + 1) / (y - 1)
        q = self.mu_tilde / y + self.nu_tilde / (y - 1)
        return p, q

    def ode(self) -> RationalODE:
        a, b, c = self.alpha, self.beta, self.gamma
        # common denominator y(y-1) = -y + y^2
        den = [0.0, -1.0, 1.0]
        p_num = [-(b + 1), -a + (b + 1) + (c + 1), a]
        q_num = [-self.mu_tilde, self.mu_tilde + self.nu_tilde]
        return RationalODE(p_num, den, q_num, den)


class Branch(enum.Enum):
    ZERO_EXPONENT = "zero"
    LARGE_EXPONENT = "large"


@dataclass(frozen=True)
class TruncationPolicy:
    """Stop once three consecutive terms fall below ``tol`` times the running
    magnitude sum, measured at ``|t| = eval_radius`` (in units of the disk radius)."""

    tol: float = 1e-14
    max_terms: int = 2000
    eval_radius: float = 0.75


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class LocalSeries:
    """``t**exponent * sum(coeffs[n] t**n) [+ log(t) * sum(log_coeffs[n] t**n)]``.

    ``t = orientation * (y - point)``, so ``orientation = -1`` expands in
    ``1 - y`` around ``y = 1``.
    """

    point: float
    exponent: float
    coeffs: np.ndarray
    radius: float = 1.0
    orientation: int = 1
    log_coeff: complex | None = None
    log_coeffs: np.ndarray | None = None
    truncation_error_estimate: float = 0.0

    def __call__(self, y):
        return heun_eval(self, y)[0]


def is_nonneg_integer(v: float, tol: float = INT_TOL) -> bool:
    return abs(v - round(v)) <= tol and round(v) >= 0


def nearest_int(v: float) -> int:
    return int(round(v))


def _recurrence(alpha, beta, gamma, mu_t, nu_t, policy, *, rho=0.0,
                resonant_at=None, min_terms=0):
    """Coefficient array (n_terms, *shape) for broadcastable parameter arrays.

    ``resonant_at`` names a step whose zero denominator is skipped by setting
    that coefficient to zero (the free coefficient of a log-free branch).
    """
    alpha, beta, gamma, mu_t, nu_t = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (alpha, beta, gamma, mu_t, nu_t)))
    shape = alpha.shape
    r = policy.eval_radius
    s1 = beta + gamma - alpha
    munu = mu_t + nu_t
    a_prev = np.zeros(shape)
    a_cur = np.ones(shape)
    coeffs = [a_cur]
    mag = np.ones(shape)
    small = np.zeros(shape, dtype=int)
    rn = 1.0
    n = 0
    while True:
        k = n + rho
        num = (k * (k + 1 + s1) - mu_t) * a_cur + (alpha * (k - 1) + munu) * a_prev
        den = (k + 1) * (k + 1 + beta)
        if resonant_at is not None and n + 1 == resonant_at:
            a_next = np.zeros(shape)
        else:
            a_next = num / den
        coeffs.append(a_next)
        n += 1
        rn *= r
        term = np.abs(a_next) * rn
        mag = mag + term
        # non-finite lanes (exact poles in a batch) count as finished
        done = (term < policy.tol * mag) | ~np.isfinite(term)
        small = np.where(done, small + 1, 0)
        if n + 1 >= min_terms and np.all(small >= 3):
            break
        if n + 1 >= policy.max_terms:
            raise Divergent(
                f"series not converged after {policy.max_terms} terms at radius {r}")
        a_prev, a_cur = a_cur, a_next
    ok = np.isfinite(term)
    err = float(np.max(term[ok] / mag[ok])) if np.any(ok) else float("nan")
    return np.array(coeffs), err


def heunc_coefficients(params: HeunParams, policy: TruncationPolicy = DEFAULT_POLICY,
                       **kw) -> tuple[np.ndarray, float]:
    """Taylor coefficients of ``HeunC(params; y)`` at ``y = 0`` with ``a_0 = 1``."""
    return _recurrence(params.alpha, params.beta, params.gamma,
                       params.mu_tilde, params.nu_tilde, policy, **kw)


def _binomial_series(gamma: float, n: int) -> np.ndarray:
    """Coefficients of ``(1 - y)**(-gamma)`` up to ``y**(n-1)``."""
    out = np.empty(n)
    out[0] = 1.0
    for k in range(1, n):
        out[k] = out[k - 1] * (gamma + k - 1) / k
    return out


def _tail_estimate(coeffs: np.ndarray, r: float) -> float:
    terms = np.abs(coeffs) * r ** np.arange(coeffs.size)
    return float(np.max(terms[-3:]) / max(np.sum(terms), 1e-300))


def _gap(params: HeunParams, center: int) -> float:
    return -params.beta if center == 0 else -params.gamma


def heun_series(params: HeunParams, center: int, branch: Branch = Branch.ZERO_EXPONENT,
                policy: TruncationPolicy = DEFAULT_POLICY, *,
                allow_resonant: bool = False) -> LocalSeries:
    """Frobenius solution of the Heun equation ``params`` around ``y = center``.

    ZERO_EXPONENT gives ``H1 = HeunC(a0; y)`` (center 0) or
    ``H2 = HeunC(a1; 1-y)`` (center 1).  LARGE_EXPONENT gives
    ``H3 = y**-beta (1-y)**-gamma HeunC(c0; y)`` or
    ``H4 = (1-y)**-gamma HeunC(c1; 1-y)``.

    When the exponent gap is a positive integer the zero-exponent recurrence
    hits a vanishing denominator; this raises ResonantWithoutBranch unless
    ``allow_resonant`` is set, in which case the free coefficient is put to
    zero (only meaningful when the log obstruction vanishes).
    """
    if center not in (0, 1):
        raise ValueError("center must be 0 or 1")
    orientation = 1 if center == 0 else -1
    local = params if center == 0 else params.mirrored()
    gap = _gap(params, center)
    if branch is Branch.ZERO_EXPONENT:
        resonant_at = None
        if is_nonneg_integer(gap) and nearest_int(gap) >= 1:
            if not allow_resonant:
                raise ResonantWithoutBranch(
                    f"exponent gap {gap:g} at y={center} is a positive integer")
            resonant_at = nearest_int(gap)
        coeffs, err = heunc_coefficients(local, policy, resonant_at=resonant_at)
        return LocalSeries(float(center), 0.0, coeffs, 1.0, orientation,
                           truncation_error_estimate=err)
    if center == 0:
        base, err = heunc_coefficients(params.shifted(), policy)
        n = base.size
        while True:
            coeffs = np.convolve(base, _binomial_series(params.gamma, n))[:n]
            err = _tail_estimate(coeffs, policy.eval_radius)
            if err < policy.tol or n >= policy.max_terms:
                break
            n = min(2 * n, policy.max_terms)
            base, _ = heunc_coefficients(params.shifted(), policy, min_terms=n)
            n = base.size
        if err >= policy.tol:
            raise Divergent("large-exponent series product did not converge")
        return LocalSeries(0.0, -params.beta, coeffs, 1.0, 1,
                           truncation_error_estimate=err)
    coeffs, err = heunc_coefficients(params.shifted_mirrored(), policy)
    return LocalSeries(1.0, -params.gamma, coeffs, 1.0, -1,
                       truncation_error_estimate=err)


def _horner(coeffs, t, nder: int):
    """Value and first ``nder`` t-derivatives of ``sum coeffs[k] t**k``.

    ``coeffs`` may carry trailing batch axes matching ``t``.
    """
    out = [np.zeros_like(t * coeffs[0]) for _ in range(nder + 1)]
    for a in coeffs[::-1]:
        for j in range(nder, 0, -1):
            out[j] = out[j] * t + j * out[j - 1]
        out[0] = out[0] * t + a
    return out


def _power_jets(t, rho: float, nder: int):
    """``t**rho`` and its derivatives divided by ``t**rho`` (i.e. rho/t, ...)."""
    if rho == 0:
        return 1.0, [1.0, 0.0, 0.0][: nder + 1]
    if np.iscomplexobj(t) or np.any(np.real(t) <= 0):
        base = np.power(np.asarray(t, dtype=complex), rho)
    else:
        base = np.power(t, rho)
    facs = [1.0, rho / t, rho * (rho - 1) / t ** 2]
    return base, facs[: nder + 1]


def series_derivatives(s: LocalSeries, y, nder: int = 1, *, guard: bool = True):
    """Value and y-derivatives (up to ``nder <= 2``) of a local series."""
    y = np.asarray(y)
    t = s.orientation * (y - s.point)
    if guard and np.any(np.abs(t) >= GUARD * s.radius):
        raise OutOfDisk(f"|y - {s.point}| must stay below {GUARD} * radius")
    P = _horner(s.coeffs, t, nder)
    base, facs = _power_jets(t, s.exponent, nder)
    vals = [P[0]]
    if nder >= 1:
        vals.append(P[1] + facs[1] * P[0])
    if nder >= 2:
        vals.append(P[2] + 2 * facs[1] * P[1] + facs[2] * P[0])
    vals = [base * v for v in vals]
    if s.log_coeffs is not None:
        L = _horner(s.log_coeffs, t, nder)
        lt = np.log(t.astype(complex) if np.any(np.real(t) <= 0) or np.iscomplexobj(t) else t)
        vals[0] = vals[0] + lt * L[0]
        if nder >= 1:
            vals[1] = vals[1] + L[0] / t + lt * L[1]
        if nder >= 2:
            vals[2] = vals[2] - L[0] / t ** 2 + 2 * L[1] / t + lt * L[2]
    if nder >= 1:
        vals[1] = s.orientation * vals[1]
    if np.ndim(y) == 0:
        vals = [v[()] if isinstance(v, np.ndarray) else v for v in vals]
    return tuple(vals)


def heun_eval(s: LocalSeries, y):
    """``(value, d/dy value)`` of the local series at ``y``."""
    r = abs(np.max(np.abs(np.asarray(y) - s.point))) / s.radius
    if r > DEFAULT_POLICY.eval_radius and s.truncation_error_estimate > 0:
        tail = np.abs(s.coeffs[-1]) * r ** (s.coeffs.size - 1)
        if tail > 1e-8 * max(np.max(np.abs(s.coeffs)), 1.0):
            warnings.warn("series evaluated beyond its certified radius", RuntimeWarning)
    v, d = series_derivatives(s, y, 1)
    return v, d


def log_obstruction(params: HeunParams, center: int, n: int, *,
                    relative: bool = False, tol: float = INT_TOL):
    """Inconsistency of the zero-exponent recurrence at the resonant step ``n``.

    Zero means no logarithm: both local solutions at ``center`` are
    holomorphic.  With ``relative=True`` the value is divided by the size of
    the terms of the final step, with ``mu_t`` and ``mu_t + nu_t`` replaced
    by the sum of magnitudes of their parameter contributions.
    """
    gap = _gap(params, center)
    if n < 1 or abs(gap - n) > tol:
        raise GapMismatch(f"exponent gap at y={center} is {gap:g}, not {n}")
    p = params if center == 0 else params.mirrored()
    a, b, c = abs(p.alpha), abs(p.beta), abs(p.gamma)
    mu_abs = 0.5 * (a + b + c + a * b + b * c) + abs(p.eta)
    munu_abs = a + 0.5 * (a * b + a * c) + abs(p.delta)
    a_prev, a_cur = 0.0, 1.0
    s1 = p.beta + p.gamma - p.alpha
    munu = p.mu_tilde + p.nu_tilde
    for k in range(n):
        o = (k * (k + 1 + s1) - p.mu_tilde) * a_cur + (p.alpha * (k - 1) + munu) * a_prev
        if k == n - 1:
            if relative:
                scale = (abs(k * (k + 1 + s1)) + mu_abs) * abs(a_cur) \
                    + (a * abs(k - 1) + munu_abs) * abs(a_prev)
                return o / scale if scale > 0 else 0.0
            return o
        a_prev, a_cur = a_cur, o / ((k + 1) * (k + 1 + p.beta))
    raise AssertionError("unreachable")


def obstruction_vanishes(params: HeunParams, center: int, rtol: float = 1e-9) -> bool:
    """True when the exponent gap at ``center`` is a positive integer and the
    logarithmic companion is absent."""
    gap = _gap(params, center)
    if not is_nonneg_integer(gap) or nearest_int(gap) < 1:
        return False
    return abs(log_obstruction(params, center, nearest_int(gap), relative=True)) <= rtol


# --- jets in the exponent: c0 + c1*rho + c2*rho**2 -------------------------

def _jmul(a, b):
    return np.array([a[0] * b[0],
                     a[0] * b[1] + a[1] * b[0],
                     a[0] * b[2] + a[1] * b[1] + a[2] * b[0]])


def _jdiv(num, den, resonant: bool):
    if not resonant:
        c0 = num[0] / den[0]
        c1 = (num[1] - c0 * den[1]) / den[0]
        c2 = (num[2] - c0 * den[2] - c1 * den[1]) / den[0]
        return np.array([c0, c1, c2])
    # den = rho (d1 + d2 rho); num = rho (n1 + n2 rho) + O(rho^3)
    c0 = num[1] / den[1]
    c1 = (num[2] - c0 * den[2]) / den[1]
    return np.array([c0, c1, 0.0])


def heun_log_series(params: HeunParams, center: int,
                    policy: TruncationPolicy = DEFAULT_POLICY) -> LocalSeries:
    """Zero-exponent solution with its logarithmic companion at an integer gap.

    Built as ``d/drho F(rho, t)`` at ``rho = 0`` with ``a_0(rho) = rho`` so
    that the first ``gap`` terms of ``F(0, t)`` vanish.  The result is
    ``log(t) F(0, t) + sum a_n'(0) t**n``; ``log_coeff`` is the leading
    coefficient of ``F(0, t)`` (zero exactly when the log is absent).
    """
    gap = _gap(params, center)
    if not is_nonneg_integer(gap) or nearest_int(gap) < 1:
        raise GapMismatch("log companion needs a positive integer exponent gap")
    m = nearest_int(gap)
    p = params if center == 0 else params.mirrored()
    al, be = p.alpha, p.beta
    s1 = p.beta + p.gamma - p.alpha
    munu = p.mu_tilde + p.nu_tilde
    a_prev = np.zeros(3)
    a_cur = np.array([0.0, 1.0, 0.0])
    jets = [a_cur]
    r = policy.eval_radius
    mag, small, rn, k = 1.0, 0, 1.0, 0
    while True:
        P = np.array([k * (k + 1 + s1) - p.mu_tilde, 2 * k + 1 + s1, 1.0])
        Q = np.array([al * (k - 1) + munu, al, 0.0])
        D = np.array([(k + 1) * (k + 1 + be), 2 * k + 2 + be, 1.0])
        num = _jmul(P, a_cur) + _jmul(Q, a_prev)
        a_next = _jdiv(num, D, resonant=(k + 1 == m))
        jets.append(a_next)
        k += 1
        rn *= r
        term = (abs(a_next[0]) + abs(a_next[1])) * rn
        mag += term
        small = small + 1 if (term < policy.tol * mag and k > m) else 0
        if small >= 3:
            break
        if k + 1 >= policy.max_terms:
            raise Divergent("log series did not converge")
        a_prev, a_cur = a_cur, a_next
    jets = np.array(jets)
    return LocalSeries(float(center), 0.0, jets[:, 1], 1.0, 1 if center == 0 else -1,
                       log_coeff=float(jets[m, 0]), log_coeffs=jets[:, 0],
                       truncation_error_estimate=term / mag)


def wronskian_scalar(s1: LocalSeries, s2: LocalSeries, y) -> complex:
    """``v1' v2 - v1 v2'``."""
    v1, d1 = heun_eval(s1, y)
    v2, d2 = heun_eval(s2, y)
    return d1 * v2 - v1 * d2


def with_policy(policy: TruncationPolicy, **changes) -> TruncationPolicy:
    return replace(policy, **changes)
