"""Command-line front end: spectra, Wronskian traces, oracle comparisons, Juddian curves.

All tables are written as CSV (LF line endings, 17 significant digits).
Exit codes: 0 success, 1 invalid configuration, 2 partial failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rabi_eps, rabi_nl
from .exceptions import RabiSpecError, UnsupportedRegime
from .fockoracle import Model, build_hamiltonian, eigenvalues
from .spectral import SpectrumSet, sweep_spectra

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

EPS_PARAMS = ("lambda", "mu", "eps")
NL_PARAMS = ("omega", "omega0", "g", "bigu")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


@dataclass(frozen=True)
class Range:
    start: float
    end: float
    step: float | None = None

    def values(self) -> np.ndarray:
        if self.step is None:
            return np.array([self.start]) if self.start == self.end else np.array([self.start, self.end])
        n = int(math.floor((self.end - self.start) / self.step + 1e-9))
        return self.start + self.step * np.arange(n + 1)


def parse_range(text: str, *, need_step: bool = False, allow_scalar: bool = True) -> Range:
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"cannot parse range {text!r}") from None
    if not all(math.isfinite(v) for v in nums):
        raise ConfigError(f"range {text!r} must be finite")
    if len(nums) == 1:
        if not allow_scalar:
            raise ConfigError(f"expected start:end, got {text!r}")
        return Range(nums[0], nums[0])
    if len(nums) == 2:
        if need_step:
            raise ConfigError(f"expected start:end:step, got {text!r}")
        if nums[1] <= nums[0]:
            raise ConfigError(f"empty range {text!r}")
        return Range(nums[0], nums[1])
    if len(nums) == 3:
        if nums[2] <= 0 or nums[1] < nums[0]:
            raise ConfigError(f"empty range {text!r}")
        return Range(*nums)
    raise ConfigError(f"cannot parse range {text!r}")


def _write(rows: Sequence[Sequence], header: Sequence[str], out: str | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    data = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(data)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)


def _positive(name: str, v: float) -> float:
    if not v > 0:
        raise ConfigError(f"{name} must be positive")
    return v


# --- parameter handling -----------------------------------------------------

def _model_params(args) -> tuple[dict[str, str], tuple[str, ...]]:
    names = EPS_PARAMS if args.model == "rabi-eps" else NL_PARAMS
    raw = {}
    for n in names:
        v = getattr(args, n)
        if v is None:
            raise ConfigError(f"--{n} is required for model {args.model}")
        raw[n] = v
    return raw, names


def _split_sweep(raw: dict[str, str], allow_sweep: bool):
    fixed, sweep_name, sweep_vals = {}, None, None
    for n, text in raw.items():
        r = parse_range(text)
        if r.start == r.end and r.step is None:
            fixed[n] = r.start
            continue
        if not allow_sweep:
            raise ConfigError(f"--{n} must be a single value here")
        if sweep_name is not None:
            raise ConfigError("at most one parameter may be swept")
        if r.step is None:
            raise ConfigError(f"sweep over --{n} needs start:end:step")
        sweep_name, sweep_vals = n, r.values()
    return fixed, sweep_name, sweep_vals


def _solver(args, fixed: dict[str, float], sweep_name: str | None, window: Range,
            step: float, tol: float) -> Callable[[float], SpectrumSet]:
    def solve(v):
        p = dict(fixed)
        if sweep_name is not None:
            p[sweep_name] = float(v)
        if args.model == "rabi-eps":
            return rabi_eps.spectrum_model1(p["lambda"], p["mu"], p["eps"],
                                            (window.start, window.end), step, tol)
        return rabi_nl.spectrum_model2(p["omega"], p["omega0"], p["g"], p["bigu"],
                                       (window.start, window.end), step, tol)
    return solve


def _window(args) -> Range:
    text = args.x if args.model == "rabi-eps" else args.e
    flag = "--x" if args.model == "rabi-eps" else "--e"
    if text is None:
        raise ConfigError(f"{flag} start:end is required")
    r = parse_range(text, allow_scalar=False)
    return Range(r.start, r.end)


def _check_regime(args, fixed, sweep_name, sweep_vals):
    if args.model != "rabi-nl":
        return
    vals = sweep_vals if sweep_name in ("omega", "bigu") else [None]
    for v in vals:
        p = dict(fixed)
        if v is not None:
            p[sweep_name] = v
        try:
            rabi_nl.check_regime(p["omega"], p["bigu"])
        except UnsupportedRegime as exc:
            raise ConfigError(str(exc)) from None


# --- subcommands ------------------------------------------------------------

def cmd_spectrum(args) -> int:
    raw, _ = _model_params(args)
    fixed, sweep_name, sweep_vals = _split_sweep(raw, True)
    window = _window(args)
    step = _positive("--step", args.step)
    tol = _positive("--refine-tol", args.refine_tol)
    _check_regime(args, fixed, sweep_name, sweep_vals)
    solve = _solver(args, fixed, sweep_name, window, step, tol)
    grid = sweep_vals if sweep_name is not None else [0.0]
    table, sets = sweep_spectra(solve, grid, max_workers=args.workers)
    rows = []
    for g in grid:
        spec = sets.get(float(g))
        if spec is None:
            continue
        for p in spec.points:
            rows.append((sweep_name or "none", float(g) if sweep_name else None,
                         p.x_value, p.energy, p.kind.value, p.multiplicity, p.parity))
    rows.sort(key=lambda r: (r[1] if r[1] is not None else 0.0, r[2]))
    _write(rows, ["sweep_param", "sweep_value", "x", "E", "kind", "multiplicity", "parity"],
           args.out)
    for g, msg in table.failures:
        print(f"{sweep_name}={fmt(float(g))}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if table.failures else EXIT_OK


def cmd_wtrace(args) -> int:
    raw, _ = _model_params(args)
    fixed, _, _ = _split_sweep(raw, False)
    flag = "x" if args.model == "rabi-eps" else "e"
    text = getattr(args, flag)
    if text is None:
        raise ConfigError(f"--{flag} start:end:step is required")
    grid = parse_range(text, need_step=True).values()
    half = 10 * _positive("--refine-tol", args.refine_tol)
    if args.model == "rabi-eps":
        lam, mu, eps = fixed["lambda"], fixed["mu"], fixed["eps"]
        if lam == 0:
            raise ConfigError("--lambda must be nonzero for a Wronskian trace")
        W = rabi_eps._generic_w(grid, abs(lam), mu, eps, args.y_eval)
        g0, g1 = grid - eps, 1 + grid + eps
        bad = np.zeros(grid.size, dtype=bool)
        for gap in (g0, g1):
            bad |= (np.abs(gap - np.round(gap)) <= half) & (np.round(gap) >= 0)
        header = ["x", "W"]
    else:
        try:
            rabi_nl.check_regime(fixed["omega"], fixed["bigu"])
        except UnsupportedRegime as exc:
            raise ConfigError(str(exc)) from None
        w, w0, g, U = fixed["omega"], fixed["omega0"], fixed["g"], fixed["bigu"]
        if g == 0:
            raise ConfigError("--g must be nonzero for a Wronskian trace")
        W = rabi_nl._generic_w(grid, w, w0, abs(g), U)
        xv = rabi_nl.x_of_E(grid, w, w0, g, U)
        bad = (np.abs(xv - np.round(xv)) <= half) & (np.round(xv) >= 1)
        header = ["E", "W"]
    W = np.where(bad | ~np.isfinite(W), np.nan, W)
    _write(list(zip(grid, W)), header, args.out)
    return EXIT_OK


def _match(oracle: np.ndarray, method: np.ndarray, tol: float):
    used = np.zeros(method.size, dtype=bool)
    rows, bad = [], 0
    for i, e in enumerate(oracle):
        cand = np.where(~used)[0]
        if cand.size:
            j = cand[np.argmin(np.abs(method[cand] - e))]
            d = abs(method[j] - e)
            if d <= max(1e3 * tol, 1e-3):
                used[j] = True
                rows.append((i, e, method[j], d))
                bad += d > tol
                continue
        rows.append((i, e, None, None))
        bad += 1
    for j in np.where(~used)[0]:
        rows.append((None, None, method[j], None))
        bad += 1
    return rows, bad


def cmd_oracle(args) -> int:
    raw, _ = _model_params(args)
    fixed, _, _ = _split_sweep(raw, False)
    if args.n < 2 or args.k < 1 or args.k >= 2 * args.n:
        raise ConfigError("need --n >= 2 and 1 <= --k < 2N")
    tol = _positive("--tol", args.tol)
    if args.model == "rabi-eps":
        params = {"lam": fixed["lambda"], "mu": fixed["mu"], "eps": fixed["eps"]}
        model = Model.RABI_EPS
    else:
        try:
            rabi_nl.check_regime(fixed["omega"], fixed["bigu"])
        except UnsupportedRegime as exc:
            raise ConfigError(str(exc)) from None
        params = {"omega": fixed["omega"], "omega0": fixed["omega0"], "g": fixed["g"],
                  "U": fixed["bigu"]}
        model = Model.NONLINEAR_U
    ev = eigenvalues(build_hamiltonian(model, params, args.n), args.k + 1)
    oracle, nxt = ev[: args.k], ev[args.k]
    lo = oracle[0] - 1.0
    hi = 0.5 * (oracle[-1] + nxt) if nxt - oracle[-1] > 1e-9 else oracle[-1] + 1e-7
    if args.model == "rabi-eps":
        l2 = fixed["lambda"] ** 2
        spec = rabi_eps.spectrum_model1(fixed["lambda"], fixed["mu"], fixed["eps"],
                                        (lo + l2, hi + l2), args.step, args.refine_tol)
    else:
        spec = rabi_nl.spectrum_model2(fixed["omega"], fixed["omega0"], fixed["g"],
                                       fixed["bigu"], (lo, hi), args.step, args.refine_tol)
    method = spec.energies()
    method = method[method <= hi]
    rows, bad = _match(oracle, method, tol)
    _write(rows, ["index", "E_oracle", "E_method", "abs_diff"], args.out)
    if bad:
        print(f"{bad} oracle/method entries unmatched or above tolerance {fmt(tol)}",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_judd(args) -> int:
    try:
        rabi_nl.check_regime(args.omega, args.bigu)
    except UnsupportedRegime as exc:
        raise ConfigError(str(exc)) from None
    if args.m < 1:
        raise ConfigError("--m must be a positive integer")
    w0s = parse_range(args.omega0, need_step=True).values()
    gs = parse_range(args.g, need_step=True).values()
    curves = rabi_nl.judd_curves(args.m, args.omega, args.bigu, w0s, gs)
    rows = [(args.m, w0, g, "parabola") for w0, g in curves.parabola]
    rows += [(args.m, w0, g, "contour") for w0, g in curves.other]
    _write(rows, ["m", "omega0", "g", "branch"], args.out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _add_model_args(p, *, window: str):
    p.add_argument("--model", required=True, choices=("rabi-eps", "rabi-nl"))
    for name in EPS_PARAMS + NL_PARAMS:
        p.add_argument(f"--{name}", dest=name, default=None,
                       help="value, or start:end:step to sweep (spectrum only)")
    p.add_argument("--x", default=None, help=f"x window ({window}) for rabi-eps")
    p.add_argument("--e", default=None, help=f"energy window ({window}) for rabi-nl")
    p.add_argument("--step", type=float, default=0.005, help="scan grid step")
    p.add_argument("--refine-tol", dest="refine_tol", type=float, default=1e-10)
    p.add_argument("--out", default=None, help="output CSV path (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rabispec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="spectrum table, optionally swept over one parameter")
    _add_model_args(sp, window="start:end")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_spectrum)

    wp = sub.add_parser("wtrace", help="Wronskian condition on a grid")
    _add_model_args(wp, window="start:end:step")
    wp.add_argument("--y-eval", dest="y_eval", type=float, default=0.5)
    wp.set_defaults(func=cmd_wtrace)

    op = sub.add_parser("oracle", help="compare the lowest levels with Fock diagonalization")
    _add_model_args(op, window="unused")
    op.add_argument("--n", type=int, default=120, help="photon-number truncation")
    op.add_argument("--k", type=int, default=8, help="number of lowest levels")
    op.add_argument("--tol", type=float, default=1e-6)
    op.set_defaults(func=cmd_oracle)

    jp = sub.add_parser("judd", help="Juddian curves J_m = 0 in the (omega0, g) plane")
    jp.add_argument("--m", type=int, required=True)
    jp.add_argument("--omega", type=float, required=True)
    jp.add_argument("--bigu", type=float, required=True)
    jp.add_argument("--omega0", required=True, help="start:end:step")
    jp.add_argument("--g", required=True, help="start:end:step")
    jp.add_argument("--out", default=None)
    jp.set_defaults(func=cmd_judd)
    return parser


def _attach_negative_values(argv: Sequence[str]) -> list[str]:
    """Join ``--flag -1:2`` into ``--flag=-1:2`` so ranges may start negative."""
    out: list[str] = []
    for tok in argv:
        if (out and out[-1].startswith("--") and "=" not in out[-1]
                and len(tok) > 1 and tok[0] == "-" and (tok[1].isdigit() or tok[1] == ".")):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"rabispec: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RabiSpecError) as exc:
        print(f"rabispec: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
