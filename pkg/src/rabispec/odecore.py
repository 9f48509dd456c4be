"""Second-order linear ODEs with rational coefficients.

An equation ``phi'' + p(z) phi' + q(z) phi = 0`` is stored as four dense
polynomials (ascending coefficient order, :class:`numpy.polynomial.Polynomial`).
The functions here locate the finite singular points, compute indicial
exponents at the regular ones, extract the leading ``exp(c z) z**rho``
behaviour at an irregular point at infinity of Poincare rank one, and turn
that into a verdict on membership in the Bargmann space.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import IrregularFinitePoint, NotIrregular, UnsupportedRank

DEFAULT_TOL = 1e-12
# roots of a multiple factor split by ~sqrt(machine eps); cluster them back
_ROOT_CLUSTER = 1e-6


def _as_poly(c) -> Polynomial:
    if isinstance(c, Polynomial):
        return Polynomial(c.coef)
    return Polynomial(np.atleast_1d(np.asarray(c, dtype=float)))


def _trim(p: Polynomial, tol: float = 0.0) -> Polynomial:
    coef = np.trim_zeros(np.asarray(p.coef), "b")
    if coef.size == 0:
        coef = np.zeros(1)
    if tol > 0:
        scale = np.max(np.abs(coef))
        if scale > 0:
            coef = np.where(np.abs(coef) <= tol * scale, 0.0, coef)
            coef = np.trim_zeros(coef, "b")
            if coef.size == 0:
                coef = np.zeros(1)
    return Polynomial(coef)


def _is_zero(p: Polynomial) -> bool:
    return not np.any(p.coef)


def _cluster_roots(roots) -> list[tuple[complex, int]]:
    """Group numerically split multiple roots; returns (location, multiplicity)."""
    pts: list[list[complex]] = []
    for r in sorted(np.atleast_1d(roots), key=lambda c: (c.real, c.imag)):
        for grp in pts:
            c = np.mean(grp)
            if abs(r - c) <= _ROOT_CLUSTER * max(1.0, abs(c)):
                grp.append(r)
                break
        else:
            pts.append([r])
    out = []
    for grp in pts:
        c = complex(np.mean(grp))
        if abs(c.imag) < 1e-14 * max(1.0, abs(c)):
            c = complex(c.real, 0.0)
        out.append((c, len(grp)))
    return out


def _divide_root(p: Polynomial, r: complex) -> Polynomial:
    """Divide by (z - r), or by the real quadratic of the pair (r, conj r)."""
    if r.imag == 0:
        quo, _ = divmod(p, Polynomial([-r.real, 1.0]))
    else:
        quo, _ = divmod(p, Polynomial([abs(r) ** 2, -2 * r.real, 1.0]))
    return quo


def _root_scale(p: Polynomial, r: complex) -> float:
    return float(np.sum(np.abs(p.coef) * np.abs(r) ** np.arange(p.coef.size)))


def _reduce(num: Polynomial, den: Polynomial, tol: float):
    """Cancel common factors of ``num/den`` (detected through shared roots)."""
    num, den = _trim(num), _trim(den)
    changed = True
    while changed and den.degree() > 0 and not _is_zero(num):
        changed = False
        for r, _ in _cluster_roots(den.roots()):
            if abs(num(r)) <= 1e3 * tol * max(_root_scale(num, r), 1.0):
                num, den = _divide_root(num, r), _divide_root(den, r)
                changed = True
                break
    if _is_zero(num):
        den = Polynomial([1.0])
    lead = den.coef[-1]
    return _trim(num / lead), _trim(den / lead)


@dataclass(frozen=True)
class RationalODE:
    """``phi'' + p(z) phi' + q(z) phi = 0`` with ``p = p_num/p_den``, ``q = q_num/q_den``.

    Construction cancels common numerator/denominator factors, so stored
    fractions are always in reduced form.
    """

    p_num: Polynomial
    p_den: Polynomial
    q_num: Polynomial
    q_den: Polynomial
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        p_num, p_den = _as_poly(self.p_num), _as_poly(self.p_den)
        q_num, q_den = _as_poly(self.q_num), _as_poly(self.q_den)
        if _is_zero(_trim(p_den)) or _is_zero(_trim(q_den)):
            raise ValueError("denominator polynomial must not be zero")
        p_num, p_den = _reduce(p_num, p_den, self.tol)
        q_num, q_den = _reduce(q_num, q_den, self.tol)
        object.__setattr__(self, "p_num", p_num)
        object.__setattr__(self, "p_den", p_den)
        object.__setattr__(self, "q_num", q_num)
        object.__setattr__(self, "q_den", q_den)

    def p(self, z):
        return self.p_num(z) / self.p_den(z)

    def q(self, z):
        return self.q_num(z) / self.q_den(z)

    def residual(self, phi, dphi, d2phi, z):
        return d2phi + self.p(z) * dphi + self.q(z) * phi


@dataclass(frozen=True)
class SingularPointInfo:
    location: complex
    is_regular: bool
    exponents: tuple[complex, complex]
    exponent_gap_integer: bool
    pole_orders: tuple[int, int] = (0, 0)


def _laurent_leading(num: Polynomial, den: Polynomial, s: complex, order: int):
    """Coefficient of (z-s)**(-order) in num/den, given den has a root of that order at s."""
    rest = den
    k = 0
    for r, m in _cluster_roots(den.roots()):
        if abs(r - s) <= _ROOT_CLUSTER * max(1.0, abs(s)):
            k = m
            break
    # divide (z - s)^k out with complex arithmetic to keep it exact for complex s
    coef = np.asarray(rest.coef, dtype=complex)
    for _ in range(k):
        coef, _rem = _synthetic_division(coef, s)
    if k < order:
        return 0.0
    return complex(num(s)) / complex(np.polynomial.polynomial.polyval(s, coef))


def _synthetic_division(coef, r):
    """Divide ascending coefficients by (z - r); returns (quotient, remainder)."""
    desc = coef[::-1]
    out = np.empty(desc.size - 1, dtype=complex)
    acc = 0j
    for i, c in enumerate(desc[:-1]):
        acc = acc * r + c
        out[i] = acc
    rem = acc * r + desc[-1]
    return out[::-1], rem


def _pole_order(den: Polynomial, s: complex) -> int:
    if den.degree() == 0:
        return 0
    for r, m in _cluster_roots(den.roots()):
        if abs(r - s) <= _ROOT_CLUSTER * max(1.0, abs(s)):
            return m
    return 0


def indicial_roots(p_m1: complex, q_m2: complex) -> tuple[complex, complex]:
    """Roots of rho(rho-1) + p_m1 rho + q_m2, larger real part first."""
    b = p_m1 - 1.0
    disc = np.sqrt(complex(b * b - 4.0 * q_m2))
    r1, r2 = (-b + disc) / 2.0, (-b - disc) / 2.0
    if (r2.real, r2.imag) > (r1.real, r1.imag):
        r1, r2 = r2, r1
    return complex(r1), complex(r2)


def _gap_is_integer(r1: complex, r2: complex, tol: float) -> bool:
    d = r1 - r2
    return abs(d.imag) <= tol and abs(d.real - round(d.real)) <= tol


def classify_singularities(ode: RationalODE, *, strict: bool = False,
                           tol: float | None = None) -> list[SingularPointInfo]:
    """List the finite singular points of ``ode`` with their exponents.

    With ``strict=True`` an irregular finite point raises
    :class:`IrregularFinitePoint`; otherwise it is reported with
    ``is_regular=False`` and NaN exponents.
    """
    tol = ode.tol if tol is None else tol
    pts: list[complex] = []
    for den in (ode.p_den, ode.q_den):
        if den.degree() > 0:
            for r, _ in _cluster_roots(den.roots()):
                if not any(abs(r - s) <= _ROOT_CLUSTER * max(1.0, abs(s)) for s in pts):
                    pts.append(r)
    out = []
    for s in sorted(pts, key=lambda c: (c.real, c.imag)):
        kp, kq = _pole_order(ode.p_den, s), _pole_order(ode.q_den, s)
        regular = kp <= 1 and kq <= 2
        if not regular:
            if strict:
                raise IrregularFinitePoint(
                    f"z={s}: pole orders p:{kp}, q:{kq} exceed (1, 2)")
            nan = complex(np.nan, np.nan)
            out.append(SingularPointInfo(s, False, (nan, nan), False, (kp, kq)))
            continue
        p_m1 = _laurent_leading(ode.p_num, ode.p_den, s, 1) if kp == 1 else 0.0
        q_m2 = _laurent_leading(ode.q_num, ode.q_den, s, 2) if kq == 2 else 0.0
        r1, r2 = indicial_roots(p_m1, q_m2)
        out.append(SingularPointInfo(s, True, (r1, r2), _gap_is_integer(r1, r2, tol), (kp, kq)))
    return out


@dataclass(frozen=True)
class AsymptoticData:
    """Leading behaviour ``exp(c z) z**rho`` of solutions near infinity."""

    pairs: tuple[tuple[complex, complex], ...]
    poincare_rank: int
    growth_order: float
    growth_type: float | None = field(default=None)


def _expand_at_infinity(num: Polynomial, den: Polynomial, nterms: int) -> np.ndarray:
    """Coefficients c_0, c_1, ... of num/den = sum c_k z**(-k) for large z.

    Raises UnsupportedRank when the fraction grows at infinity.
    """
    dn, dd = num.degree(), den.degree()
    if _is_zero(num):
        return np.zeros(nterms)
    if dn > dd:
        raise UnsupportedRank("coefficient grows at infinity (Poincare rank > 1)")
    # in zeta = 1/z: num/den = zeta**(dd-dn) * N(zeta) / D(zeta)
    nz = np.asarray(num.coef[::-1], dtype=float)
    dz = np.asarray(den.coef[::-1], dtype=float)
    shift = dd - dn
    out = np.zeros(nterms + shift)
    series = np.zeros(nterms + shift)
    nzp = np.zeros(nterms + shift)
    nzp[: min(nz.size, nterms + shift)] = nz[: nterms + shift]
    for k in range(nterms + shift):
        acc = nzp[k]
        for j in range(1, min(k, dz.size - 1) + 1):
            acc -= dz[j] * series[k - j]
        series[k] = acc / dz[0]
    out[shift:] = series[: nterms]
    return out[:nterms]


def irregular_infinity_data(ode: RationalODE, *, tol: float | None = None) -> AsymptoticData:
    """Rank-one asymptotic data at infinity.

    With ``p ~ p0 + p1/z`` and ``q ~ q0 + q1/z``, each rate ``c`` solves
    ``c**2 + p0 c + q0 = 0`` and the accompanying power is
    ``rho = -(p1 c + q1) / (2 c + p0)``.
    """
    tol = ode.tol if tol is None else tol
    pc = _expand_at_infinity(ode.p_num, ode.p_den, 3)
    qc = _expand_at_infinity(ode.q_num, ode.q_den, 3)
    p0, p1 = pc[0], pc[1]
    q0, q1 = qc[0], qc[1]
    if abs(p0) <= tol and abs(q0) <= tol:
        if abs(q1) <= tol:
            raise NotIrregular("infinity is a regular singular point",
                               AsymptoticData((), 0, 0.0, 0.0))
        raise UnsupportedRank("q ~ 1/z at infinity: fractional Poincare rank")
    disc = np.sqrt(complex(p0 * p0 - 4.0 * q0))
    pairs = []
    for c in ((-p0 + disc) / 2.0, (-p0 - disc) / 2.0):
        denom = 2.0 * c + p0
        if abs(denom) <= tol:
            raise UnsupportedRank("coincident exponential rates (2c + p_inf = 0)")
        rho = -(p1 * c + q1) / denom
        pairs.append((complex(c), complex(rho)))
    pairs.sort(key=lambda pr: (-pr[0].real, -pr[0].imag))
    rates = [abs(c) for c, _ in pairs]
    order = 1.0 if max(rates) > tol else 0.0
    return AsymptoticData(tuple(pairs), 1, order, max(rates))


class Verdict(enum.Enum):
    ADMISSIBLE = "Admissible"
    INCONCLUSIVE = "Inconclusive"
    NOT_ADMISSIBLE = "NotAdmissible"


def bargmann_admissibility(a: AsymptoticData, *, tol: float = DEFAULT_TOL) -> Verdict:
    """Decide Bargmann-space membership of entire solutions from order and type."""
    rho, sigma = a.growth_order, a.growth_type
    if rho < 2.0 - tol:
        return Verdict.ADMISSIBLE
    if abs(rho - 2.0) <= tol:
        if sigma is None:
            return Verdict.INCONCLUSIVE
        if sigma < 0.5 - tol:
            return Verdict.ADMISSIBLE
        if abs(sigma - 0.5) <= tol:
            return Verdict.INCONCLUSIVE
    return Verdict.NOT_ADMISSIBLE
