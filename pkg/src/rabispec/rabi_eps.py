"""Exact spectrum of the Rabi model with a symmetry-breaking bias.

Hamiltonian ``a^dag a + mu sigma_z + lambda sigma_x (a^dag + a) + eps sigma_x``.
In the sigma_x basis and Bargmann variables the two components satisfy

    (z + lambda) psi1' = (E - eps - lambda z) psi1 - mu psi2
    (z - lambda) psi2' = (E + eps + lambda z) psi2 - mu psi1

Eliminating ``psi2`` and substituting ``psi1 = exp(2 lambda^2 y) v(y)``,
``y = (z/lambda + 1)/2`` turns the problem into a confluent Heun equation
for ``v`` with regular singular points at ``y = 0, 1``.  Spectrum points are
the values of ``x = E + lambda^2`` for which the holomorphic local solutions
at both points continue each other.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import DegenerateExponent, MuZero, OutOfDisk
from .heun import (
    Branch, HeunParams, TruncationPolicy, _horner, heun_series, heunc_coefficients,
    is_nonneg_integer, log_obstruction, nearest_int, series_derivatives,
)
from .odecore import (
    AsymptoticData, RationalODE, Verdict, bargmann_admissibility, irregular_infinity_data,
)
from .spectral import Kind, ScanResult, SpectrumPoint, SpectrumSet, scan_zeros

INT_TOL = 1e-12
DELTA_RTOL = 1e-9
ZERO_RTOL = 1e-9


@dataclass(frozen=True)
class Model1Params:
    """Model parameters at a trial value of ``x = E + lambda**2``."""

    x: float
    lam: float
    mu: float
    eps: float

    def __post_init__(self):
        for name in ("x", "lam", "mu", "eps"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.lam == 0:
            raise ValueError("lambda = 0 merges the singular points; use the closed form")

    @property
    def E(self) -> float:
        return self.x - self.lam ** 2

    def canonical(self) -> "Model1Params":
        """Equivalent problem with non-negative couplings (same spectrum)."""
        return Model1Params(self.x, abs(self.lam), abs(self.mu), abs(self.eps))

    @property
    def heun(self) -> HeunParams:
        return heun_params(self.x, self.lam, self.mu, self.eps)

    @property
    def gaps(self) -> tuple[float, float]:
        """Exponent gaps ``x - eps`` at y=0 and ``1 + x + eps`` at y=1."""
        return self.x - self.eps, 1.0 + self.x + self.eps


def heun_params(x, lam, mu, eps) -> HeunParams:
    """Confluent Heun parameters; ``x`` may be an array."""
    l2 = lam * lam
    eta = 0.5 * (1 - 2 * mu * mu + (1 + x) * (x - 4 * l2) + eps * (1 + 4 * l2) - eps * eps)
    return HeunParams(4 * l2, -x + eps, -1 - x - eps, 2 * (1 - 2 * eps) * l2, eta)


def model1_ode(p: Model1Params) -> RationalODE:
    """Second-order equation satisfied by ``psi1`` in the Bargmann variable z."""
    lam, E, eps, mu = p.lam, p.E, p.eps, p.mu
    z = Polynomial([0.0, 1.0])
    a = E - eps - lam * z
    b = E + eps + lam * z
    den = z * z - lam * lam
    p_num = -((z - lam) * (a - 1) + b * (z + lam))
    q_num = lam * (z - lam) + b * a - mu * mu
    return RationalODE(p_num.coef, den.coef, q_num.coef, den.coef)


def model1_asymptotics(p: Model1Params) -> tuple[AsymptoticData, Verdict]:
    data = irregular_infinity_data(model1_ode(p))
    return data, bargmann_admissibility(data)


def _policy(y_eval: float) -> TruncationPolicy:
    return TruncationPolicy(eval_radius=max(abs(y_eval), abs(1 - y_eval)))


def _generic_w(x, lam, mu, eps, y_eval=0.5):
    """``H1 H2' - H1' H2`` at ``y_eval`` for an array of ``x`` (no checks)."""
    x = np.asarray(x, dtype=float)
    hp = heun_params(x, lam, mu, eps)
    pol = _policy(y_eval)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c1, _ = heunc_coefficients(hp, pol)
        c2, _ = heunc_coefficients(hp.mirrored(), pol)
        v1, d1 = _horner(c1, y_eval, 1)
        v2, d2 = _horner(c2, 1.0 - y_eval, 1)
        return -v1 * d2 - d1 * v2


def wronskian_W(p: Model1Params, y_eval: float = 0.5) -> float:
    """Generic gluing condition ``w[H1, H2]`` with H1 regular at 0, H2 at 1."""
    g0, g1 = p.gaps
    if is_nonneg_integer(g0, INT_TOL) or is_nonneg_integer(g1, INT_TOL):
        raise DegenerateExponent(
            f"integer exponent gap at x={p.x!r}; use degenerate_case_W")
    return float(_generic_w(np.array([p.x]), p.lam, p.mu, p.eps, y_eval)[0])


def pole_locations(lo: float, hi: float, eps: float) -> list[tuple[float, int]]:
    """Poles of the generic condition in ``[lo, hi]`` with their orders."""
    pts = []
    n0 = max(1, math.ceil(lo - eps))
    pts += [eps + n for n in range(n0, math.floor(hi - eps) + 1)]
    n1 = max(0, math.ceil(lo + eps))
    pts += [n - eps for n in range(n1, math.floor(hi + eps) + 1)]
    return _merge_close(sorted(pts))


def candidate_points(lo: float, hi: float, eps: float) -> list[float]:
    """Integer-gap values ``x = eps + n`` and ``x = n - 1 - eps`` in ``[lo, hi]``."""
    pts = [eps + n for n in range(max(0, math.ceil(lo - eps)), math.floor(hi - eps) + 1)]
    pts += [n - 1 - eps for n in range(max(0, math.ceil(lo + 1 + eps)),
                                       math.floor(hi + 1 + eps) + 1)]
    return [v for v, _ in _merge_close(sorted(pts))]


def _merge_close(xs, tol=1e-12):
    out: list[list] = []
    for v in xs:
        if out and abs(v - out[-1][0]) <= tol:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return [(v, m) for v, m in out]


def deflated_w(lam, mu, eps, poles, y_eval=0.5):
    """``x -> W(x) * prod (x - x_k)**m_k``; same sign changes as W minus its poles."""

    def f(x):
        x = np.asarray(x, dtype=float)
        w = _generic_w(x, lam, mu, eps, y_eval)
        for xk, m in poles:
            w = w * (x - xk) ** m
        return w

    return f


# --- integer-gap points -----------------------------------------------------

@dataclass(frozen=True)
class DegenerateOutcome:
    """Result of the integer-gap analysis at one ``x``.

    ``case`` is 1 (one integer gap), 2 (both) or 3 (a log obstruction
    vanishes, so a holomorphic pair exists and no Wronskian is needed).
    """

    case: int
    wronskian: float | None
    relative: float | None
    entire_by_delta: bool
    deltas: tuple[float | None, float | None]
    solutions: tuple[str, str] | None = None

    @property
    def is_spectrum_point(self) -> bool:
        if self.entire_by_delta:
            return True
        return self.relative is not None and self.relative < ZERO_RTOL

    @property
    def both_deltas_vanish(self) -> bool:
        return all(d is not None and abs(d) <= DELTA_RTOL for d in self.deltas)


def _delta(hp: HeunParams, center: int, gap: float):
    if is_nonneg_integer(gap, INT_TOL) and nearest_int(gap) >= 1:
        return float(log_obstruction(hp, center, nearest_int(gap), relative=True,
                                     tol=1e-9))
    return None


def _holomorphic_at(hp, center, gap, delta, pol):
    """A local solution holomorphic at ``center`` (the large-exponent one when
    the gap is a positive integer and a log is present)."""
    if is_nonneg_integer(gap, INT_TOL) and nearest_int(gap) >= 1:
        if delta is not None and abs(delta) <= DELTA_RTOL:
            return heun_series(hp, center, Branch.ZERO_EXPONENT, pol, allow_resonant=True)
        return heun_series(hp, center, Branch.LARGE_EXPONENT, pol)
    return heun_series(hp, center, Branch.ZERO_EXPONENT, pol)


def _w_pair(s1, s2, y):
    v1, d1 = series_derivatives(s1, y, 1)
    v2, d2 = series_derivatives(s2, y, 1)
    v1, d1, v2, d2 = (float(np.real(v)) for v in (v1, d1, v2, d2))
    w = v1 * d2 - d1 * v2
    scale = abs(v1 * d2) + abs(d1 * v2)
    return w, (abs(w) / scale if scale > 0 else 0.0)


def degenerate_case_W(p: Model1Params, y_eval: float = 0.5) -> DegenerateOutcome:
    """Gluing condition at a point where some exponent gap is an integer."""
    g0, g1 = p.gaps
    int0 = is_nonneg_integer(g0, INT_TOL)
    int1 = is_nonneg_integer(g1, INT_TOL)
    if not (int0 or int1):
        raise DegenerateExponent(f"no integer exponent gap at x={p.x!r}")
    hp = p.heun
    pol = _policy(y_eval)
    d0 = _delta(hp, 0, g0)
    d1 = _delta(hp, 1, g1)
    if any(d is not None and abs(d) <= DELTA_RTOL for d in (d0, d1)):
        return DegenerateOutcome(3, None, None, True, (d0, d1))
    if int0 and int1:
        a = heun_series(hp, 0, Branch.LARGE_EXPONENT, pol)
        b = heun_series(hp, 1, Branch.LARGE_EXPONENT, pol)
        names, case = ("H3", "H4"), 2
    elif int0:
        a = heun_series(hp, 0, Branch.LARGE_EXPONENT, pol)
        b = heun_series(hp, 1, Branch.ZERO_EXPONENT, pol)
        names, case = ("H3", "H2"), 1
    else:
        a = heun_series(hp, 0, Branch.ZERO_EXPONENT, pol)
        b = heun_series(hp, 1, Branch.LARGE_EXPONENT, pol)
        names, case = ("H1", "H4"), 1
    w, rel = _w_pair(a, b, y_eval)
    return DegenerateOutcome(case, w, rel, False, (d0, d1), names)


# --- eigenfunctions ---------------------------------------------------------

_EF_POLICY = TruncationPolicy(eval_radius=0.9)
_EF_REACH = 0.9


@dataclass
class Model1Eigenfunction:
    """Evaluators for ``(psi1, psi2)`` built from the glued local solutions.

    Valid for ``y`` (equivalently ``z = lambda (2y - 1)``) within 0.9 of
    either singular point.
    """

    params: Model1Params
    near0: list = field(repr=False)
    near1: list = field(repr=False)
    parity: int | None = None

    def _v(self, y):
        y = complex(y)
        if abs(y) < _EF_REACH:
            parts = self.near0
        elif abs(1 - y) < _EF_REACH:
            parts = self.near1
        else:
            raise OutOfDisk(f"y={y} lies outside both local disks")
        v = dv = d2v = 0.0
        for c, s in parts:
            a, b, d = series_derivatives(s, y, 2)
            v, dv, d2v = v + c * a, dv + c * b, d2v + c * d
        return v, dv, d2v

    def jets(self, z):
        """``(psi1, psi1', psi2, psi2')`` at ``z``."""
        p = self.params
        lam, mu = p.lam, p.mu
        y = (z / lam + 1) / 2
        v, dv, d2v = self._v(y)
        e = np.exp(2 * lam * lam * y)
        vz, vzz = dv / (2 * lam), d2v / (4 * lam * lam)
        f = e * v
        df = e * (lam * v + vz)
        d2f = e * (lam * lam * v + 2 * lam * vz + vzz)
        a = p.E - p.eps - lam * z
        g = (a * f - (z + lam) * df) / mu
        dg = (-lam * f + (a - 1) * df - (z + lam) * d2f) / mu
        return f, df, g, dg

    def psi1(self, z):
        return self.jets(z)[0]

    def psi2(self, z):
        return self.jets(z)[2]

    def residuals(self, z) -> tuple[complex, complex]:
        """Residuals of both first-order equations at ``z``."""
        p = self.params
        f, df, g, dg = self.jets(z)
        r1 = (z + p.lam) * df - (p.E - p.eps - p.lam * z) * f + p.mu * g
        r2 = (z - p.lam) * dg - (p.E + p.eps + p.lam * z) * g + p.mu * f
        return r1, r2


def _parity(ef: Model1Eigenfunction, rtol: float = 1e-6) -> int | None:
    lam = ef.params.lam
    zs = lam * np.array([0.1, 0.23, 0.37, 0.45, 0.2 + 0.15j, -0.3j])
    vals = [(ef.jets(z), ef.jets(-z)) for z in zs]
    k = int(np.argmax([abs(a[0]) for a, _ in vals]))
    ratio = vals[k][1][2] / vals[k][0][0]
    sigma = 1 if ratio.real > 0 else -1
    scale = max(max(abs(a[0]), abs(a[2])) for a, _ in vals)
    for a, b in vals:
        if abs(b[2] - sigma * a[0]) > rtol * scale or abs(b[0] - sigma * a[2]) > rtol * scale:
            return None
    return sigma


def eigenfunction_model1(p: Model1Params, *, compute_parity: bool = True) -> Model1Eigenfunction:
    """Reconstruct ``(psi1, psi2)`` at a spectrum point ``p.x``."""
    if p.mu == 0:
        raise MuZero("mu = 0 decouples the system; use the closed form")
    hp = p.heun
    pol = _EF_POLICY
    g0, g1 = p.gaps
    d0, d1 = _delta(hp, 0, g0), _delta(hp, 1, g1)
    zero0 = d0 is not None and abs(d0) <= DELTA_RTOL
    zero1 = d1 is not None and abs(d1) <= DELTA_RTOL
    far = _holomorphic_at(hp, 1, g1, d1, pol)
    if zero0 and not zero1:
        h1 = heun_series(hp, 0, Branch.ZERO_EXPONENT, pol, allow_resonant=True)
        h3 = heun_series(hp, 0, Branch.LARGE_EXPONENT, pol)
        c1, _ = _w_pair(h3, far, 0.5)
        c3, _ = _w_pair(h1, far, 0.5)
        near0 = [(c1, h1), (-c3, h3)]
    else:
        near0 = [(1.0, _holomorphic_at(hp, 0, g0, d0, pol))]
    v0 = sum(c * series_derivatives(s, 0.5, 1)[0] for c, s in near0)
    if zero1 and zero0:
        # two-dimensional eigenspace: represent near 1 in the holomorphic pair
        h2 = heun_series(hp, 1, Branch.ZERO_EXPONENT, pol, allow_resonant=True)
        h4 = heun_series(hp, 1, Branch.LARGE_EXPONENT, pol)
        dv0 = sum(c * series_derivatives(s, 0.5, 1)[1] for c, s in near0)
        m = np.array([[series_derivatives(h, 0.5, 1)[k] for h in (h2, h4)] for k in (0, 1)],
                     dtype=float)
        c2, c4 = np.linalg.solve(m, [float(v0), float(dv0)])
        near1 = [(c2, h2), (c4, h4)]
    else:
        near1 = [(float(v0) / float(series_derivatives(far, 0.5, 1)[0]), far)]
    ef = Model1Eigenfunction(p, near0, near1)
    if compute_parity and p.eps == 0 and not (zero0 and zero1):
        ef.parity = _parity(ef)
    return ef


# --- spectrum assembly ------------------------------------------------------

def _closed_form_lambda0(mu, eps, lo, hi) -> list[tuple[float, int]]:
    r = math.hypot(mu, eps)
    vals = [n + s * r for n in range(0, math.floor(hi + r) + 2) for s in (1, -1)]
    vals = sorted(v for v in vals if lo - 1e-12 <= v <= hi + 1e-12)
    return _merge_close(vals, 1e-12)


def _point(x, lam, kind, mult=1, parity=None):
    if mult == 2:
        kind = Kind.DOUBLY_DEGENERATE
    return SpectrumPoint(float(x), float(x - lam * lam), kind, mult, parity)


def _kind_of(outcome: DegenerateOutcome) -> tuple[Kind, int]:
    if outcome.entire_by_delta:
        if outcome.both_deltas_vanish:
            return Kind.DOUBLY_DEGENERATE, 2
        return Kind.JUDDIAN_ENTIRE, 1
    return Kind.DEGENERATE_SINGLE, 1


def spectrum_model1(lam: float, mu: float, eps: float, x_range=(0.0, 6.0),
                    scan_step: float = 0.005, refine_tol: float = 1e-10, *,
                    y_eval: float = 0.5, exclusion_halfwidth: float | None = None,
                    pole_filter: bool = True, max_workers: int | None = None,
                    parities: bool = True) -> SpectrumSet:
    """All spectrum points with ``x = E + lambda**2`` in ``x_range``.

    Signs of the couplings are irrelevant and are dropped.  Generic points
    come from sign changes of the pole-deflated Wronskian, integer-gap points
    from :func:`degenerate_case_W`.
    """
    lo, hi = map(float, x_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("x_range must be a finite increasing pair")
    if scan_step <= 0:
        raise ValueError("scan_step must be positive")
    lam, mu, eps = abs(float(lam)), abs(float(mu)), abs(float(eps))
    params = {"lambda": lam, "mu": mu, "eps": eps}
    if lam == 0:
        pts = [_point(v, 0.0, Kind.GENERIC, m) for v, m in _closed_form_lambda0(mu, eps, lo, hi)]
        return SpectrumSet(pts, "model1", params)

    half = 10 * refine_tol if exclusion_halfwidth is None else exclusion_halfwidth
    poles = pole_locations(lo - 1, hi + 1, eps)
    f = deflated_w(lam, mu, eps, poles, y_eval)
    excl = [(c - half, c + half) for c, _ in poles]

    def scan(piece) -> ScanResult:
        return scan_zeros(f, piece, scan_step, refine_tol, pole_filter,
                          exclusions=excl, vectorized=True)

    cuts = [lo] + [c for c, _ in poles if lo < c < hi] + [hi]
    pieces = [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            results = list(ex.map(scan, pieces))
    else:
        results = [scan(pc) for pc in pieces]
    roots = sorted(b.refined_root for r in results for b in r.roots)
    rejected = sorted((b for r in results for b in r.rejected), key=lambda b: b.refined_root)

    merge = max(10 * refine_tol, 2 * half)
    cands = candidate_points(lo, hi, eps)
    points: list[SpectrumPoint] = []
    for c in cands:
        pc = Model1Params(c, lam, mu, eps)
        out = degenerate_case_W(pc, y_eval)
        if mu == 0:
            # decoupled: psi2-only states are invisible to the psi1 equation,
            # so membership and multiplicity follow the displaced-oscillator form
            both = is_nonneg_integer(c - eps, INT_TOL) and is_nonneg_integer(c + eps, INT_TOL)
            points.append(_point(c, lam, Kind.DEGENERATE_SINGLE, 2 if both else 1))
            continue
        if out.is_spectrum_point:
            kind, mult = _kind_of(out)
            points.append(_point(c, lam, kind, mult))
    for r in roots:
        if any(abs(r - p.x_value) <= merge for p in points):
            continue
        points.append(_point(r, lam, Kind.GENERIC))
    points.sort(key=lambda p: p.x_value)

    if parities and eps == 0 and mu != 0:
        labelled = []
        for p in points:
            par = None
            if p.multiplicity == 1:
                try:
                    par = eigenfunction_model1(Model1Params(p.x_value, lam, mu, eps)).parity
                except Exception:  # noqa: BLE001 - parity is best effort
                    par = None
            labelled.append(SpectrumPoint(p.x_value, p.energy, p.kind, p.multiplicity, par))
        points = labelled

    asym, verdict = model1_asymptotics(Model1Params(0.5 * (lo + hi), lam, mu, eps))
    return SpectrumSet(points, "model1", params, rejected, asym, verdict)
