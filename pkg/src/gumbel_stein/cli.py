"""Command-line front end.

Exit codes: 0 pass, 1 a check failed, 2 bad configuration, 3 quadrature did
not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import suites
from .coupon import Budget, main_identity_sides
from .distance import (
    Metric,
    calibrate_envelope,
    coupon_rate,
    decomposition_terms,
    envelope_shape,
    envelope_violations,
    format_number,
    gap_profile,
    report_csv,
    report_json,
)
from .errors import BudgetExceeded, DegenerateInput, DomainError, NonConvergence, WindowTooSmall
from .functions import by_name
from .quad import QuadConfig
from .rng import RngStream
from .semigroup import perturbed_gamma

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2, 3

COMMANDS = ("verify-semigroup", "verify-stein", "verify-identity", "coupon-rate", "gap-profile")


@dataclass
class RunConfig:
    command: str
    n_min: int = 16
    n_max: int = 4096
    n_spacing: str = "log2"
    seed: int = 20240601
    samples: int = 10 ** 5
    tolerances: QuadConfig = field(default_factory=QuadConfig)
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self):
        floor = 2 if self.command in ("verify-identity", "gap-profile") else 1
        if self.n_min < floor:
            raise DomainError(f"{self.command} needs n >= {floor}, got {self.n_min}")
        if self.n_max < self.n_min:
            raise DomainError("n-max must not be below n-min")
        if self.samples < 1:
            raise DomainError("samples must be >= 1")
        if self.n_spacing not in ("linear", "log2"):
            raise DomainError(f"unknown spacing {self.n_spacing!r}")
        if self.format not in ("csv", "json"):
            raise DomainError(f"unknown format {self.format!r}")

    def n_grid(self) -> list[int]:
        if self.n_spacing == "linear":
            return list(range(self.n_min, self.n_max + 1))
        out, n = [], self.n_min
        while n <= self.n_max:
            out.append(n)
            n *= 2
        return out


# --------------------------------------------------------------------- output

def _table(columns: Sequence[str], rows: Sequence[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: r[c] for c in columns} for r in rows], indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_number(r[c]) for c in columns])
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _suite_rows(results):
    rows = []
    for r in results:
        rows.append({
            "suite": r.name,
            "defect": r.defect,
            "threshold": r.threshold,
            "passed": "yes" if r.passed else "no",
            "worst_case": json.dumps(r.worst_case, sort_keys=True),
        })
    return rows


def _finish_suites(results, cfg: RunConfig) -> int:
    text = _table(["suite", "defect", "threshold", "passed", "worst_case"], _suite_rows(results), cfg.format)
    if cfg.output_path is not None:
        _emit(text, cfg.output_path)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: defect {r.defect:.3e} (threshold {r.threshold:.1e})")
        if not r.passed:
            print(f"     failing case: {json.dumps(r.worst_case, sort_keys=True)}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ------------------------------------------------------------------- commands

def cmd_verify_semigroup(cfg: RunConfig, times=None, inject_bug: bool = False) -> int:
    times = suites.DEFAULT_TIMES if times is None else tuple(times)
    q = cfg.tolerances
    scale = 1.01 if inject_bug else 1.0
    with perturbed_gamma(scale):
        results = [suites.semigroup_law(times=times, cfg=q)]
        live = tuple(t for t in times if t > 0)
        if live:
            results += [
                suites.stationarity(times=live, cfg=q),
                suites.ergodicity(cfg=q),
                suites.derivative_formula(times=live, cfg=q),
            ]
        results.append(suites.generator_forms(RngStream(cfg.seed, 1), cases=200, cfg=q))
    return _finish_suites(results, cfg)


def cmd_verify_stein(cfg: RunConfig) -> int:
    q = cfg.tolerances
    results = [suites.stein_residuals(cfg=q), suites.stein_property(cfg=q), suites.stein_counterexample(cfg=q)]
    return _finish_suites(results, cfg)


# f' and an envelope |f'(x)| <= a + b|x| valid on the support of the identity's arguments
def _identity_functions(n: int):
    return [
        ("one", lambda x: np.ones_like(np.asarray(x, dtype=float)), (1.0, 0.0)),
        ("x", lambda x: np.asarray(x, dtype=float), (0.0, 1.0)),
        ("exp", lambda x: np.exp(-np.asarray(x, dtype=float)), (float(n), 0.0)),
        ("sin", lambda x: np.sin(np.asarray(x, dtype=float)), (1.0, 0.0)),
    ]


def cmd_verify_identity(cfg: RunConfig, mode: str = "enumerate") -> int:
    budget = Budget(samples=cfg.samples)
    rows = []
    ok = True
    for n in cfg.n_grid():
        for name, fp, growth in _identity_functions(n):
            rng = RngStream(cfg.seed, n)
            s = main_identity_sides(n, fp, mode, budget, rng, growth)
            if mode == "enumerate":
                bound = 1e-8 + s.lhs_err + s.rhs_err
            else:
                bound = 4.0 * math.hypot(s.lhs_err, s.rhs_err)
            passed = s.gap <= bound
            ok &= passed
            rows.append({"n": n, "f_prime": name, "mode": mode, "lhs": s.lhs, "rhs": s.rhs,
                         "lhs_err": s.lhs_err, "rhs_err": s.rhs_err, "bound": bound,
                         "passed": "yes" if passed else "no"})
            rel = "<=" if passed else ">"
            print(f"{'PASS' if passed else 'FAIL'} n={n} f'={name}: lhs {s.lhs:.10g} rhs {s.rhs:.10g} "
                  f"|diff| {s.gap:.2e} {rel} {bound:.2e}")
    cols = ["n", "f_prime", "mode", "lhs", "rhs", "lhs_err", "rhs_err", "bound", "passed"]
    if cfg.output_path is not None:
        _emit(_table(cols, rows, cfg.format), cfg.output_path)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_coupon_rate(cfg: RunConfig, metric: str = "kolmogorov", mode: str = "exact_atoms") -> int:
    grid = cfg.n_grid()
    budget = Budget(samples=cfg.samples)
    report = coupon_rate(grid, metric, mode, budget, RngStream(cfg.seed, 0), cfg.tolerances)
    text = report_json(report) if cfg.format == "json" else report_csv(report)
    _emit(text, cfg.output_path)
    print(f"fit_exponent {report.fit_exponent:.6f}", file=sys.stderr if cfg.output_path is None else sys.stdout)
    print(f"fit_constant {report.fit_constant:.6f}", file=sys.stderr if cfg.output_path is None else sys.stdout)
    return EXIT_OK


DEFAULT_T_GRID = tuple(np.round(np.concatenate([np.linspace(0.0, 1.0, 11), np.linspace(1.5, 10.0, 18)]), 10))


def cmd_gap_profile(cfg: RunConfig, h_name: str = "x", n: int = 16, calibrate_n: int = 16,
                    c_hat: float | None = None, t_grid=DEFAULT_T_GRID, mode: str = "exact_atoms") -> int:
    if n < 2 or calibrate_n < 2:
        raise DomainError("gap-profile needs n >= 2")
    h = by_name(h_name)
    if not (math.isfinite(h.lip_f) and math.isfinite(h.lip_fprime)):
        raise DomainError(f"{h_name} is not in Lip2")
    t = np.asarray(t_grid, dtype=float)
    if not (np.any((t > 0) & (t <= 1)) and np.any(t >= 1) and t.max() >= 10):
        raise DomainError("t grid must reach into (0, 1] and span [1, 10]")
    q = cfg.tolerances
    budget = Budget(samples=cfg.samples)
    rng = RngStream(cfg.seed, 0)
    if c_hat is None:
        c_hat = calibrate_envelope(gap_profile(calibrate_n, h, t, budget, rng, q, mode))
    prof = gap_profile(n, h, t, budget, rng, q, mode)
    rate = math.log(n) / n
    env = c_hat * envelope_shape(t) * rate
    bad = envelope_violations(prof, c_hat)
    rows = []
    for i, ti in enumerate(t):
        d = decomposition_terms(n, h, float(ti), budget, rng.spawn(1000 + i), q, mode)
        rows.append({"t": float(ti), "gap": float(prof.gap[i]), "A1": d.A1, "A2": d.A2, "A3": d.A3,
                     "envelope": float(env[i])})
    _emit(_table(["t", "gap", "A1", "A2", "A3", "envelope"], rows, cfg.format), cfg.output_path)
    out = sys.stdout if cfg.output_path is not None else sys.stderr
    print(f"c_hat {c_hat:.6g} (calibrated at n={calibrate_n})", file=out)
    if np.any(bad):
        for i in np.flatnonzero(bad):
            print(f"FAIL envelope at t={t[i]:g}: |gap| {abs(prof.gap[i]):.3e} > 1.25 x {env[i]:.3e}", file=out)
        return EXIT_FAIL
    print("PASS envelope", file=out)
    return EXIT_OK


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gumbel-stein", description="Gumbel semigroup and coupon-collector checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, n_min=16, n_max=4096, samples=10 ** 5, spacing="log2"):
        sp.add_argument("--n-min", type=int, default=n_min)
        sp.add_argument("--n-max", type=int, default=n_max)
        sp.add_argument("--spacing", choices=["linear", "log2"], default=spacing)
        sp.add_argument("--seed", type=int, default=20240601)
        sp.add_argument("--samples", type=int, default=samples)
        sp.add_argument("--out", default=None, help="output file (stdout when omitted)")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--abs-tol", type=float, default=1e-10)
        sp.add_argument("--rel-tol", type=float, default=1e-10)

    sp = sub.add_parser("verify-semigroup", help="semigroup law, stationarity, ergodicity, derivative, generator forms")
    common(sp, 1, 1)
    sp.add_argument("--t", type=float, nargs="+", default=None, help="times for the semigroup-law grid")
    sp.add_argument("--inject-bug", action="store_true", help="scale g_t by 1.01 (negative control)")

    sp = sub.add_parser("verify-stein", help="Stein identity residuals")
    common(sp, 1, 1)

    sp = sub.add_parser("verify-identity", help="both sides of the change-of-probability identity")
    common(sp, 2, 3, 10 ** 6, "linear")
    sp.add_argument("--mode", choices=["enumerate", "monte_carlo"], default="enumerate")

    sp = sub.add_parser("coupon-rate", help="distance of Z_n to the Gumbel law and rate fit")
    common(sp)
    sp.add_argument("--metric", choices=[m.value for m in Metric], default="kolmogorov")
    sp.add_argument("--mode", choices=["exact_atoms", "monte_carlo"], default="exact_atoms")

    sp = sub.add_parser("gap-profile", help="E[L P_t h(Z_n)] over t with its three-term decomposition")
    common(sp, 16, 16)
    sp.add_argument("--h", default="x", help="test function (x, sin, cos, softplus, hyp, zero, one)")
    sp.add_argument("--n", type=int, default=None, help="n for the profile (defaults to --n-min)")
    sp.add_argument("--calibrate-n", type=int, default=16)
    sp.add_argument("--c-hat", type=float, default=None, help="override the calibrated constant")
    sp.add_argument("--mode", choices=["exact_atoms", "monte_carlo"], default="exact_atoms")
    return p


def _run(args) -> int:
    q = QuadConfig(abs_tol=args.abs_tol, rel_tol=args.rel_tol)
    cfg = RunConfig(args.command, args.n_min, args.n_max, args.spacing, args.seed, args.samples, q, args.out,
                    args.format)
    if args.command == "verify-semigroup":
        return cmd_verify_semigroup(cfg, args.t, args.inject_bug)
    if args.command == "verify-stein":
        return cmd_verify_stein(cfg)
    if args.command == "verify-identity":
        return cmd_verify_identity(cfg, args.mode)
    if args.command == "coupon-rate":
        return cmd_coupon_rate(cfg, args.metric, args.mode)
    n = args.n if args.n is not None else args.n_min
    return cmd_gap_profile(cfg, args.h, n, args.calibrate_n, args.c_hat, mode=args.mode)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (DomainError, DegenerateInput, WindowTooSmall, BudgetExceeded, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
