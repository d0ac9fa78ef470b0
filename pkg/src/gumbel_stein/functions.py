"""Test functions carrying their derivative and Lipschitz constants.

Every builder returns a vectorized :class:`TestFunction`.  ``dictionary()`` is
the fixed 12-entry family with ``||f||_Lip2 <= 1`` used to bound the smooth
Wasserstein distance from below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TestFunction:
    """A function ``f`` with derivative and declared regularity constants."""

    __test__ = False  # keep pytest from collecting this class

    f: Fn
    fprime: Fn
    lip_f: float
    lip_fprime: float
    sup_fprime: float
    name: str = field(default="f", compare=False)

    def __call__(self, x):
        return self.f(x)

    @property
    def lip2_norm(self) -> float:
        return max(self.lip_f, self.lip_fprime)

    def scaled(self, c: float) -> "TestFunction":
        a = abs(c)
        return TestFunction(
            lambda x: c * self.f(x), lambda x: c * self.fprime(x),
            a * self.lip_f, a * self.lip_fprime, a * self.sup_fprime, f"{c:g}*{self.name}",
        )

    def __repr__(self) -> str:
        return f"TestFunction({self.name})"


def constant(c: float = 0.0) -> TestFunction:
    return TestFunction(
        lambda x: np.full(np.shape(x), float(c)), lambda x: np.zeros(np.shape(x)),
        0.0, 0.0, 0.0, f"const({c:g})",
    )


def identity() -> TestFunction:
    return TestFunction(
        lambda x: np.asarray(x, dtype=float) * 1.0, lambda x: np.ones(np.shape(x)),
        1.0, 0.0, 1.0, "x",
    )


def exp_neg() -> TestFunction:
    """``e^{-x}``; not globally Lipschitz, used for Laplace-type identities."""
    return TestFunction(
        lambda x: np.exp(-np.asarray(x, dtype=float)),
        lambda x: -np.exp(-np.asarray(x, dtype=float)),
        math.inf, math.inf, math.inf, "exp(-x)",
    )


def sine(scale: float = 1.0) -> TestFunction:
    """``scale * sin(x / scale)``."""
    s = float(scale)
    return TestFunction(
        lambda x: s * np.sin(np.asarray(x) / s), lambda x: np.cos(np.asarray(x) / s),
        1.0, 1.0 / s, 1.0, f"{s:g}*sin(x/{s:g})",
    )


def cosine(scale: float = 1.0) -> TestFunction:
    """``scale * cos(x / scale)``."""
    s = float(scale)
    return TestFunction(
        lambda x: s * np.cos(np.asarray(x) / s), lambda x: -np.sin(np.asarray(x) / s),
        1.0, 1.0 / s, 1.0, f"{s:g}*cos(x/{s:g})",
    )


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def smooth_ramp(lo: float, hi: float) -> TestFunction:
    """Clipped linear ramp between ``lo`` and ``hi`` with tanh-smoothed corners.

    ``f' = (tanh(x - lo) - tanh(x - hi)) / 2`` lies in ``[0, 1)`` and is
    1/2-Lipschitz.
    """
    def f(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (_logcosh(x - lo) - _logcosh(x - hi))

    def fp(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (np.tanh(x - lo) - np.tanh(x - hi))

    return TestFunction(f, fp, 1.0, 0.5, 1.0, f"ramp[{lo:g},{hi:g}]")


def softplus_exp() -> TestFunction:
    """``log(1 + e^{-x})``: equals ``e^{-x}`` to first order on the right, slope -1 on the left."""
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.logaddexp(0.0, -x)

    def fp(x):
        x = np.asarray(x, dtype=float)
        return -0.5 * (1.0 - np.tanh(0.5 * x))

    return TestFunction(f, fp, 1.0, 0.25, 1.0, "exp(-x) clamped")


def hyperbola(center: float = 0.0) -> TestFunction:
    """``sqrt((x - c)^2 + 1)``, a smoothed ``|x - c|``."""
    c = float(center)

    def f(x):
        return np.hypot(np.asarray(x, dtype=float) - c, 1.0)

    def fp(x):
        y = np.asarray(x, dtype=float) - c
        return y / np.hypot(y, 1.0)

    return TestFunction(f, fp, 1.0, 1.0, 1.0, f"hyp({c:g})")


def dictionary() -> list[TestFunction]:
    """Fixed family of 12 functions with Lip2 norm at most one."""
    return [
        identity(),
        smooth_ramp(-2.0, 0.0),
        smooth_ramp(-1.0, 1.0),
        smooth_ramp(0.0, 2.0),
        smooth_ramp(1.0, 3.0),
        sine(1.0),
        cosine(1.0),
        sine(2.0),
        cosine(2.0),
        softplus_exp(),
        hyperbola(0.0),
        hyperbola(1.0),
    ]


def by_name(name: str) -> TestFunction:
    """Resolve a command-line function name."""
    table = {
        "x": identity, "identity": identity, "exp": exp_neg, "sin": sine, "cos": cosine,
        "zero": lambda: constant(0.0), "one": lambda: constant(1.0),
        "softplus": softplus_exp, "hyp": hyperbola,
    }
    if name not in table:
        raise KeyError(f"unknown test function {name!r}; choose from {sorted(table)}")
    return table[name]()
