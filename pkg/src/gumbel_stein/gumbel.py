"""Standard Gumbel and exponential primitives."""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .functions import TestFunction
from .quad import DEFAULT_QUAD, QuadConfig, integrate_line
from .rng import RngStream

__all__ = [
    "TestFunction",
    "EULER_GAMMA",
    "gumbel_cdf",
    "gumbel_pdf",
    "gumbel_sample",
    "gumbel_samples",
    "gumbel_laplace",
    "gumbel_expectation",
    "max_stability_residual",
    "geometric_from_exponential",
]

EULER_GAMMA = 0.57721566490153286061


def gumbel_cdf(x):
    """``exp(-exp(-x))``."""
    out = np.exp(-np.exp(-np.asarray(x, dtype=float)))
    return out if np.ndim(out) else float(out)


def gumbel_pdf(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(-(x + np.exp(-x)))
    return out if np.ndim(out) else float(out)


def gumbel_samples(rng: RngStream, size) -> np.ndarray:
    return -np.log(-np.log(rng.uniforms(size)))


def gumbel_sample(rng: RngStream) -> float:
    """One standard Gumbel draw by inversion of the CDF."""
    return float(gumbel_samples(rng, 1)[0])


def gumbel_laplace(lam: float) -> float:
    """``E[exp(-lam Z)] = Gamma(1 + lam)`` for ``lam > -1``."""
    if not lam > -1:
        raise DomainError(f"Laplace transform needs lambda > -1, got {lam}")
    return math.gamma(1.0 + lam)


def gumbel_expectation(f, cfg: QuadConfig = DEFAULT_QUAD):
    """``E[f(Z)]`` for standard Gumbel ``Z`` by quadrature; ``f`` may be vector-valued."""
    def integrand(x):
        fx = np.asarray(f(x), dtype=float)
        w = gumbel_pdf(x)
        return fx * np.reshape(w, np.shape(w) + (1,) * (fx.ndim - np.ndim(w)))
    return integrate_line(integrand, cfg)


def max_stability_residual(a: float, x: float) -> float:
    """Gap between the CDF of ``max(Z' + log a, Z'' + log(1-a))`` and the Gumbel CDF at ``x``."""
    if not 0.0 < a < 1.0:
        raise DomainError(f"a must lie in (0, 1), got {a}")
    e = math.exp(-x)
    lhs = math.exp(-a * e) * math.exp(-(1.0 - a) * e)
    return abs(lhs - math.exp(-e))


def geometric_from_exponential(y, p):
    """``ceil(-y / log(1 - p))``, a Geom(p) draw on {1, 2, ...} when ``y ~ Exp(1)``.

    ``y = 0`` maps to 1 (probability-zero event, fixed for determinism).
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise DomainError("p must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("y must be non-negative")
    k = np.maximum(np.ceil(-y / np.log1p(-p_arr)), 1.0).astype(np.int64)
    return k if k.ndim else int(k)
