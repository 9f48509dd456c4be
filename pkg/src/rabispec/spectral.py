"""Sign-change root scanning for real spectral conditions, and parameter sweeps."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import NoEvaluations


class Kind(enum.Enum):
    GENERIC = "Generic"
    JUDDIAN_ENTIRE = "JuddianEntire"
    DEGENERATE_SINGLE = "DegenerateSingle"
    DOUBLY_DEGENERATE = "DoublyDegenerate"


@dataclass(frozen=True)
class SpectrumPoint:
    x_value: float
    energy: float
    kind: Kind = Kind.GENERIC
    multiplicity: int = 1
    parity: int | None = None

    def __post_init__(self):
        if self.multiplicity == 2 and self.kind is not Kind.DOUBLY_DEGENERATE:
            raise ValueError("multiplicity 2 is reserved for DoublyDegenerate points")


@dataclass(frozen=True)
class ZeroBracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    refined_root: float
    residual: float


@dataclass
class SpectrumSet:
    points: list[SpectrumPoint]
    model: str
    params: dict
    rejected: list[ZeroBracket] = field(default_factory=list)
    asymptotics: object | None = None
    verdict: object | None = None

    def energies(self, expand: bool = True) -> np.ndarray:
        """Sorted energies, repeated by multiplicity unless ``expand=False``."""
        out = []
        for p in self.points:
            out.extend([p.energy] * (p.multiplicity if expand else 1))
        return np.array(sorted(out))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


@dataclass(frozen=True)
class ScanConfig:
    step: float = 0.005
    refine_tol: float = 1e-10
    pole_filter: bool = True
    secant_steps: int = 4


@dataclass
class ScanResult:
    roots: list[ZeroBracket]
    rejected: list[ZeroBracket]
    n_evals: int

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)

    @property
    def values(self) -> list[float]:
        return [b.refined_root for b in self.roots]


def _subintervals(lo: float, hi: float, exclusions: Iterable[tuple[float, float]]):
    pieces = [(lo, hi)]
    for a, b in sorted(exclusions):
        nxt = []
        for u, v in pieces:
            if b <= u or a >= v:
                nxt.append((u, v))
                continue
            if a > u:
                nxt.append((u, a))
            if b < v:
                nxt.append((b, v))
        pieces = nxt
    return [(u, v) for u, v in pieces if v > u]


def _grid(u: float, v: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil((v - u) / step - 1e-9)))
    return np.linspace(u, v, n + 1)


def _refine(f, lo, hi, flo, fhi, tol, secant_steps):
    seen = [abs(flo), abs(fhi)]
    evals = 0
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = float(f(mid))
        evals += 1
        seen.append(abs(fm))
        if fm == 0.0:
            return mid, mid, fm, fm, mid, seen, evals
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    # secant polish, always kept inside the sign-change bracket
    root = lo - flo * (hi - lo) / (fhi - flo)
    for _ in range(secant_steps):
        if not lo < root < hi:
            root = 0.5 * (lo + hi)
        fr = float(f(root))
        evals += 1
        seen.append(abs(fr))
        if fr == 0.0:
            return lo, hi, flo, fhi, root, seen, evals
        if (fr < 0) == (flo < 0):
            lo, flo = root, fr
        else:
            hi, fhi = root, fr
        nxt = lo - flo * (hi - lo) / (fhi - flo)
        if nxt == root or not lo < nxt < hi:
            break
        root = nxt
    if not lo < root < hi:
        root = 0.5 * (lo + hi)
    return lo, hi, flo, fhi, root, seen, evals


def scan_zeros(f: Callable, interval: tuple[float, float], step: float = 0.005,
               refine_tol: float = 1e-10, pole_filter: bool = True, *,
               exclusions: Sequence[tuple[float, float]] = (),
               vectorized: bool = False, secant_steps: int = 4,
               pole_ratio: float = 1.0) -> ScanResult:
    """Locate sign changes of ``f`` on a grid and refine them.

    Each sign change is bisected down to ``refine_tol`` and then polished by
    a few secant steps that never leave the bracket.  With ``pole_filter``
    a bracket whose residual exceeds ``pole_ratio`` times the median |f| seen
    while refining is treated as a pole and moved to ``rejected``.
    Open ``exclusions`` are removed from the interval before gridding.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    lo, hi = map(float, interval)
    pieces = _subintervals(lo, hi, exclusions)
    if not pieces:
        raise NoEvaluations("interval fully excluded")
    roots, rejected, evals = [], [], 0
    scalar = (lambda t: f(t)) if not vectorized else (lambda t: f(np.array([t]))[0])
    for u, v in pieces:
        xs = _grid(u, v, step)
        fs = np.asarray(f(xs) if vectorized else [f(t) for t in xs], dtype=float)
        evals += xs.size
        for i in range(xs.size - 1):
            a, b, fa, fb = xs[i], xs[i + 1], fs[i], fs[i + 1]
            if not (np.isfinite(fa) and np.isfinite(fb)):
                continue
            if fa == 0.0:
                if i == 0 or fs[i - 1] != 0.0:
                    roots.append(ZeroBracket(a, a, fa, fa, a, 0.0))
                continue
            if (fa < 0) == (fb < 0) or fb == 0.0:
                continue
            l, h, fl, fh, r, seen, k = _refine(scalar, a, b, fa, fb, refine_tol, secant_steps)
            evals += k + 1
            res = abs(float(scalar(r)))
            br = ZeroBracket(l, h, fl, fh, r, res)
            if pole_filter and res > pole_ratio * float(np.median(seen)):
                rejected.append(br)
            else:
                roots.append(br)
        if fs.size and fs[-1] == 0.0:
            roots.append(ZeroBracket(xs[-1], xs[-1], 0.0, 0.0, xs[-1], 0.0))
    roots.sort(key=lambda b: b.refined_root)
    return ScanResult(roots, rejected, evals)


@dataclass(frozen=True)
class SweepRow:
    parameter: float
    root: float
    kind: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    failures: list[tuple[float, str]]


def _collect(grid, work, max_workers):
    grid = list(grid)
    if not grid:
        raise ValueError("empty parameter grid")
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            outs = list(ex.map(work, grid))
    else:
        outs = [work(g) for g in grid]
    rows, fails = [], []
    for g, (ok, payload) in zip(grid, outs):
        if ok:
            rows.extend(payload)
        else:
            fails.append((g, payload))
    rows.sort(key=lambda r: (r.parameter, r.root))
    fails.sort(key=lambda t: t[0])
    return SweepResult(rows, fails)


def sweep(family: Callable[[float], Callable], grid: Iterable[float],
          config: ScanConfig, interval: tuple[float, float], *,
          vectorized: bool = False, max_workers: int | None = None) -> SweepResult:
    """Scan ``family(param)`` on ``interval`` for each parameter of ``grid``."""

    def work(g):
        try:
            res = scan_zeros(family(g), interval, config.step, config.refine_tol,
                             config.pole_filter, vectorized=vectorized,
                             secant_steps=config.secant_steps)
        except Exception as exc:  # noqa: BLE001 - reported as a diagnostic
            return False, f"{type(exc).__name__}: {exc}"
        return True, [SweepRow(float(g), b.refined_root, Kind.GENERIC.value) for b in res]

    return _collect(grid, work, max_workers)


def sweep_spectra(solver: Callable[[float], SpectrumSet], grid: Iterable[float], *,
                  max_workers: int | None = None) -> tuple[SweepResult, dict]:
    """Run a full spectrum solver per parameter; also returns the SpectrumSets."""
    sets: dict[float, SpectrumSet] = {}

    def work(g):
        try:
            spec = solver(g)
        except Exception as exc:  # noqa: BLE001
            return False, f"{type(exc).__name__}: {exc}"
        sets[float(g)] = spec
        return True, [SweepRow(float(g), p.x_value, p.kind.value) for p in spec.points]

    return _collect(grid, work, max_workers), sets
