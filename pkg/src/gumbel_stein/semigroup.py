"""The Gumbel semigroup, its generator and the Stein identity.

``P_t f(x) = E[f(max(x - t, Z + log(1 - e^{-t})))]`` is evaluated in closed form,

    P_t f(x) = f(x - t) exp(-g_t e^{-x}) + g_t * int_x^inf f(z - t) exp(-(z + g_t e^{-z})) dz,

with ``g_t = e^t - 1``.  All functions broadcast over array-valued ``x`` (and
``t`` where noted); scalars in give floats out.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .functions import TestFunction
from .gumbel import gumbel_expectation, gumbel_pdf
from .quad import DEFAULT_QUAD, QuadConfig, adaptive_gk21, integrate_halfline, integrate_line

__all__ = [
    "TimeConstant",
    "GeneratorForm",
    "time_constant",
    "apply_semigroup",
    "semigroup_derivative",
    "semigroup_function",
    "generator",
    "generator_of_semigroup",
    "stein_residual",
    "stein_solution",
    "generator_sup_bound_check",
    "ergodic_gap",
    "perturbed_gamma",
]

# multiplies every g_t; only the negative-control hook changes it
_GAMMA_SCALE = 1.0
# below exp(-_SHIFT_CUT) the kernel mass is ignored (Gumbel tail e^{-60})
_SHIFT_CUT = 60.0
# after the shift the kernel decays no faster than exp(-60 u)
_KERNEL_BREAKS = np.array([1.0 / 64, 1.0 / 8])


@contextlib.contextmanager
def perturbed_gamma(scale: float):
    """Temporarily scale ``g_t`` (fault injection for negative controls)."""
    global _GAMMA_SCALE
    old = _GAMMA_SCALE
    _GAMMA_SCALE = float(scale)
    try:
        yield
    finally:
        _GAMMA_SCALE = old


@dataclass(frozen=True)
class TimeConstant:
    t: float
    gamma_t: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be non-negative")


def time_constant(t: float) -> TimeConstant:
    return TimeConstant(float(t), math.expm1(t))


def _gamma(t):
    return np.expm1(t) * _GAMMA_SCALE


class GeneratorForm(str, Enum):
    JUMP = "jump_form"
    EXPECTATION = "expectation_form"
    INTEGRAL = "integral_form"


def _out(arr):
    return arr if np.ndim(arr) else float(arr)


def apply_semigroup(f, t, x, cfg: QuadConfig = DEFAULT_QUAD):
    """``P_t f(x)``; ``t`` and ``x`` broadcast against each other."""
    t_arr, x_arr = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    shape = t_arr.shape
    tt = t_arr.reshape(-1)
    xx = x_arr.reshape(-1)
    out = np.empty(tt.shape)
    zero = tt == 0.0
    if np.any(zero):
        out[zero] = f(xx[zero])
    live = ~zero
    if np.any(live):
        tl, xl = tt[live], xx[live]
        g = _gamma(tl)
        with np.errstate(over="ignore"):
            head = f(xl - tl) * np.exp(-g * np.exp(-xl))
        # below z = log(g) - log(60) the kernel carries mass < e^{-60}
        lower = np.maximum(xl, np.log(g) - math.log(_SHIFT_CUT))

        def kernel(z, tz, gz):
            with np.errstate(over="ignore"):
                w = gz * np.exp(-(z + gz * np.exp(-z)))
            return f(z - tz) * w

        out[live] = head + integrate_halfline(kernel, lower, cfg, args=(tl, g), breaks=_KERNEL_BREAKS)
    return _out(out.reshape(shape))


def semigroup_derivative(f: TestFunction, t, x):
    """``(P_t f)'(x) = f'(x - t) exp(-g_t e^{-x})``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = f.fprime(x - t) * np.exp(-_gamma(t) * np.exp(-x))
    return _out(out)


def semigroup_function(f: TestFunction, t: float, cfg: QuadConfig = DEFAULT_QUAD) -> TestFunction:
    """``P_t f`` packaged as a TestFunction (closed-form derivative)."""
    return TestFunction(
        lambda x: apply_semigroup(f, t, x, cfg),
        lambda x: semigroup_derivative(f, t, x),
        f.lip_f, 2.0 * f.lip_fprime, f.sup_fprime, f"P_{t:g}[{f.name}]",
    )


def generator(f: TestFunction, x, form=GeneratorForm.EXPECTATION, cfg: QuadConfig = DEFAULT_QUAD):
    """The generator applied to ``f`` at ``x`` in one of its three equivalent forms."""
    form = GeneratorForm(form)
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if form is GeneratorForm.JUMP:
        fx = f(flat)
        tail = integrate_halfline(lambda z, fa: np.exp(-z) * (f(z) - fa), flat, cfg, args=(fx,))
        out = -f.fprime(flat) + tail
    elif form is GeneratorForm.EXPECTATION:
        tail = integrate_halfline(lambda z: np.exp(-z) * f.fprime(z), flat, cfg)
        out = -f.fprime(flat) + tail
    else:
        tail = integrate_halfline(lambda z: np.exp(-z) * f(z), flat, cfg)
        out = -f.fprime(flat) - np.exp(-flat) * f(flat) + tail
    return _out(out.reshape(x.shape))


def generator_of_semigroup(f: TestFunction, t: float, x, cfg: QuadConfig = DEFAULT_QUAD):
    """``L P_t f(x)`` through the derivative formula (one quadrature per point)."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    g = _gamma(t)

    def integrand(z):
        with np.errstate(over="ignore"):
            return np.exp(-z - g * np.exp(-z)) * f.fprime(z - t)

    tail = integrate_halfline(integrand, flat, cfg)
    out = -np.asarray(semigroup_derivative(f, t, flat)) + tail
    return _out(out.reshape(x.shape))


def stein_residual(f: TestFunction, cfg: QuadConfig = DEFAULT_QUAD, law: str = "gumbel") -> float:
    """``|E f'(X) - E[e^{-X} f'(X + Y)]|`` with ``Y ~ Exp(1)`` independent of ``X``.

    ``law="gumbel"`` (the characterized law) or ``law="exponential"`` (a
    counterexample).  Both expectations are computed by quadrature; the inner
    one, ``E f'(x + Y)``, is nested inside the outer integral.
    """
    def shifted(z):
        z = np.asarray(z, dtype=float)
        flat = z.reshape(-1)
        inner = integrate_halfline(lambda y, zz: np.exp(-y) * f.fprime(y + zz), np.zeros(flat.size), cfg,
                                   args=(flat,))
        return inner.reshape(z.shape)

    def tilted_pdf(z):
        with np.errstate(over="ignore"):
            return np.exp(-2.0 * z - np.exp(-z))

    if law == "gumbel":
        lhs = integrate_line(lambda z: f.fprime(z) * gumbel_pdf(z), cfg)
        rhs = integrate_line(lambda z: tilted_pdf(z) * shifted(z), cfg)
    elif law == "exponential":
        lhs = integrate_halfline(lambda z: f.fprime(z) * np.exp(-z), 0.0, cfg)
        rhs = integrate_halfline(lambda z: np.exp(-2.0 * z) * shifted(z), 0.0, cfg)
    else:
        raise ValueError(f"unknown law {law!r}")
    return abs(lhs - rhs)


def _tail_horizon(h: TestFunction, cfg: QuadConfig) -> float:
    # |P_t h - mu(h)| <= ||h'|| e^{-t} / (1 - e^{-t}) + (double-exponential term)
    lip = h.sup_fprime if math.isfinite(h.sup_fprime) else h.lip_f
    if not math.isfinite(lip):
        raise ValueError("stein_solution needs a test function with bounded derivative")
    if lip == 0:
        return 0.0
    return max(1.0, math.log(10.0 * lip / cfg.abs_tol))


def stein_solution(h: TestFunction, x, cfg: QuadConfig = DEFAULT_QUAD, mu_h: float | None = None):
    """``f_h(x) = int_0^inf (P_t h(x) - mu(h)) dt``, so that ``L f_h = mu(h) - h``.

    The time integral runs over ``u = e^{-t}`` on ``[e^{-T}, 1]`` where the
    neglected tail is below ``abs_tol / 10``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    if mu_h is None:
        mu_h = gumbel_expectation(h, cfg)
    horizon = _tail_horizon(h, cfg)
    if horizon == 0.0:
        return _out(np.zeros(x.shape))

    def integrand(u):
        t = -np.log(u)[:, None]
        vals = apply_semigroup(h, t, flat[None, :], cfg)
        return (vals - mu_h) / u[:, None]

    u_lo = math.exp(-horizon)
    breaks = np.exp(-np.arange(1.0, horizon, 2.0))
    value, _ = adaptive_gk21(integrand, u_lo, 1.0, cfg, breaks)
    return _out(np.asarray(value).reshape(x.shape))


def stein_solution_function(h: TestFunction, cfg: QuadConfig = DEFAULT_QUAD) -> TestFunction:
    """``f_h`` as a TestFunction; its derivative is ``int_0^inf (P_t h)'(x) dt``."""
    mu_h = gumbel_expectation(h, cfg)
    horizon = _tail_horizon(h, cfg)

    def fprime(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        if horizon == 0.0:
            return _out(np.zeros(x.shape))

        def integrand(u):
            t = -np.log(u)[:, None]
            return np.asarray(semigroup_derivative(h, t, flat[None, :])) / u[:, None]

        value, _ = adaptive_gk21(integrand, math.exp(-horizon), 1.0, cfg,
                                 np.exp(-np.arange(1.0, horizon, 2.0)))
        return _out(np.asarray(value).reshape(x.shape))

    return TestFunction(
        lambda x: stein_solution(h, x, cfg, mu_h), fprime,
        math.inf, math.inf, math.inf, f"f_[{h.name}]",
    )


def generator_sup_bound_check(f: TestFunction, t: float, grid, cfg: QuadConfig = DEFAULT_QUAD) -> bool:
    """Whether ``max_grid |L P_t f| <= 2 ||f'||_inf / (1 - e^{-t})``."""
    if not t > 0:
        raise ValueError("t must be positive")
    vals = np.asarray(generator_of_semigroup(f, t, np.asarray(grid, dtype=float), cfg))
    bound = 2.0 * f.sup_fprime / -math.expm1(-t)
    return bool(np.max(np.abs(vals)) <= bound * (1 + 1e-12) + cfg.abs_tol)


def ergodic_gap(f: TestFunction, t, x, cfg: QuadConfig = DEFAULT_QUAD, mu_f: float | None = None):
    """``|P_t f(x) - mu(f)|``."""
    if mu_f is None:
        mu_f = gumbel_expectation(f, cfg)
    return _out(np.abs(np.asarray(apply_semigroup(f, t, x, cfg)) - mu_f))
