"""Verification suites shared by the command line and the test-suite.

Each suite returns a :class:`SuiteResult`: the worst defect it saw, the
threshold it was held to, and the case where the worst defect occurred.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .functions import TestFunction, dictionary, exp_neg
from .gumbel import gumbel_expectation
from .quad import DEFAULT_QUAD, QuadConfig
from .rng import RngStream
from .semigroup import (
    GeneratorForm,
    apply_semigroup,
    generator,
    semigroup_derivative,
    semigroup_function,
    stein_residual,
)

__all__ = [
    "SuiteResult",
    "semigroup_law",
    "stationarity",
    "ergodicity",
    "derivative_formula",
    "generator_forms",
    "generator_time_derivative",
    "stein_residuals",
    "stein_property",
    "stein_counterexample",
    "DEFAULT_TIMES",
    "DEFAULT_XS",
]

DEFAULT_TIMES = (0.1, 0.5, 1.0, 2.0)
DEFAULT_XS = tuple(np.linspace(-5.0, 5.0, 21))


@dataclass
class SuiteResult:
    name: str
    defect: float
    threshold: float
    worst_case: dict = field(default_factory=dict)
    higher_is_better: bool = False

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.defect):
            return False
        if self.higher_is_better:
            return self.defect >= self.threshold
        return self.defect < self.threshold

    def as_dict(self) -> dict:
        return {
            "suite": self.name,
            "defect": self.defect,
            "threshold": self.threshold,
            "passed": self.passed,
            "worst_case": self.worst_case,
        }


def _track(result: SuiteResult, value: float, **case):
    if value > result.defect or (not math.isfinite(value) and math.isfinite(result.defect)):
        result.defect = float(value)
        result.worst_case = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in case.items()}


def semigroup_law(
    fs: Sequence[TestFunction] | None = None,
    times: Sequence[float] = DEFAULT_TIMES,
    xs: Sequence[float] = DEFAULT_XS,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-6,
) -> SuiteResult:
    """``max |P_t P_s f - P_{t+s} f|`` over ``t, s`` in ``times``."""
    fs = dictionary() if fs is None else fs
    ts = np.asarray(times, dtype=float)
    x = np.asarray(xs, dtype=float)
    res = SuiteResult("semigroup_law", 0.0, threshold)
    for f in fs:
        for s in ts:
            inner = semigroup_function(f, float(s), cfg)
            lhs = np.asarray(apply_semigroup(inner, ts[:, None], x[None, :], cfg))
            rhs = np.asarray(apply_semigroup(f, ts[:, None] + s, x[None, :], cfg))
            d = np.abs(lhs - rhs)
            i, j = np.unravel_index(np.argmax(d), d.shape)
            _track(res, d[i, j], f=f.name, t=ts[i], s=s, x=x[j])
    return res


def stationarity(
    fs: Sequence[TestFunction] | None = None,
    times: Sequence[float] = DEFAULT_TIMES,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-8,
) -> SuiteResult:
    """``|E P_t f(Z) - E f(Z)|`` for Gumbel ``Z``."""
    fs = list(dictionary()) + [exp_neg()] if fs is None else fs
    res = SuiteResult("stationarity", 0.0, threshold)
    for f in fs:
        mu = gumbel_expectation(f, cfg)
        for t in times:
            moved = gumbel_expectation(lambda x, t=t: apply_semigroup(f, t, x, cfg), cfg)
            _track(res, abs(moved - mu), f=f.name, t=t)
    return res


def ergodicity(
    fs: Sequence[TestFunction] | None = None,
    t: float = 20.0,
    xs: Sequence[float] = DEFAULT_XS,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-6,
) -> SuiteResult:
    """``|P_t f(x) - E f(Z)|`` at a large time."""
    fs = dictionary() if fs is None else fs
    x = np.asarray(xs, dtype=float)
    res = SuiteResult("ergodicity", 0.0, threshold)
    for f in fs:
        mu = gumbel_expectation(f, cfg)
        d = np.abs(np.asarray(apply_semigroup(f, t, x, cfg)) - mu)
        j = int(np.argmax(d))
        _track(res, d[j], f=f.name, t=t, x=x[j])
    return res


def derivative_formula(
    fs: Sequence[TestFunction] | None = None,
    times: Sequence[float] = DEFAULT_TIMES,
    xs: Sequence[float] = DEFAULT_XS,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-6,
) -> SuiteResult:
    """Closed-form ``(P_t f)'`` against centred differences with step ``1e-5 max(1, |x|)``."""
    fs = dictionary() if fs is None else fs
    x = np.asarray(xs, dtype=float)
    step = 1e-5 * np.maximum(1.0, np.abs(x))
    res = SuiteResult("derivative_formula", 0.0, threshold)
    for f in fs:
        for t in times:
            up = np.asarray(apply_semigroup(f, t, x + step, cfg))
            down = np.asarray(apply_semigroup(f, t, x - step, cfg))
            fd = (up - down) / (2 * step)
            d = np.abs(fd - np.asarray(semigroup_derivative(f, t, x)))
            j = int(np.argmax(d))
            _track(res, d[j], f=f.name, t=t, x=x[j])
    return res


def generator_forms(
    rng: RngStream,
    cases: int = 1000,
    fs: Sequence[TestFunction] | None = None,
    span: float = 5.0,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-8,
) -> SuiteResult:
    """Pairwise agreement of the three generator forms on random ``(f, x)``."""
    fs = list(dictionary()) + [exp_neg()] if fs is None else list(fs)
    which = np.floor(rng.uniforms(cases) * len(fs)).astype(int)
    x = (2.0 * rng.uniforms(cases) - 1.0) * span
    res = SuiteResult("generator_forms", 0.0, threshold)
    for i, f in enumerate(fs):
        pts = x[which == i]
        if pts.size == 0:
            continue
        vals = [np.asarray(generator(f, pts, form, cfg)) for form in GeneratorForm]
        spread = np.max(vals, axis=0) - np.min(vals, axis=0)
        j = int(np.argmax(spread))
        _track(res, spread[j], f=f.name, x=pts[j])
    return res


def generator_time_derivative(
    fs: Sequence[TestFunction] | None = None,
    xs: Sequence[float] = (-2.0, -0.5, 0.0, 1.0, 3.0),
    steps: Sequence[float] = (1e-2, 1e-3, 1e-4),
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 0.9,
) -> SuiteResult:
    """Observed order of ``(P_h f - f)/h - L f`` as ``h`` shrinks (worst case over ``f, x``)."""
    fs = dictionary() if fs is None else fs
    x = np.asarray(xs, dtype=float)
    h = np.asarray(steps, dtype=float)
    res = SuiteResult("generator_time_derivative", math.inf, threshold, higher_is_better=True)
    for f in fs:
        lf = np.asarray(generator(f, x, GeneratorForm.EXPECTATION, cfg))
        fx = np.asarray(f(x))
        err = np.array([np.abs((np.asarray(apply_semigroup(f, hh, x, cfg)) - fx) / hh - lf) for hh in h])
        # errors below the quadrature floor say nothing about the order
        live = err[0] > 1e-7
        if not np.any(live):
            continue
        order = np.log(err[:-1, live] / err[1:, live]) / np.log(h[:-1, None] / h[1:, None])
        j = np.unravel_index(np.argmin(order), order.shape)
        if order[j] < res.defect:
            res.defect = float(order[j])
            res.worst_case = {"f": f.name, "x": float(x[live][j[1]]), "h": float(h[j[0] + 1])}
    if res.defect == math.inf:
        res.defect = float("nan")
    return res


def stein_residuals(
    fs: Sequence[TestFunction] | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-8,
) -> SuiteResult:
    """``|E f'(Z) - E[e^{-Z} f'(Z + Y)]|`` for Gumbel ``Z``."""
    fs = dictionary() if fs is None else fs
    res = SuiteResult("stein_residual", 0.0, threshold)
    for f in fs:
        _track(res, stein_residual(f, cfg), f=f.name)
    return res


def stein_property(
    fs: Sequence[TestFunction] | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    threshold: float = 1e-8,
) -> SuiteResult:
    """``|E L f(Z)|`` for Gumbel ``Z``."""
    fs = dictionary() if fs is None else fs
    res = SuiteResult("stein_property", 0.0, threshold)
    for f in fs:
        v = gumbel_expectation(lambda x: generator(f, x, GeneratorForm.INTEGRAL, cfg), cfg)
        _track(res, abs(v), f=f.name)
    return res


def stein_counterexample(f: TestFunction | None = None, cfg: QuadConfig = DEFAULT_QUAD) -> SuiteResult:
    """The residual under an Exp(1) law must stay away from zero."""
    from .functions import identity

    f = identity() if f is None else f
    r = stein_residual(f, cfg, law="exponential")
    return SuiteResult("exponential_counterexample", r, 1e-3, {"f": f.name}, higher_is_better=True)
