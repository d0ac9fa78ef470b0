"""Coupon-collector machinery.

``T_n`` is the number of uniform draws from ``n`` items needed to see every
item; ``T_n = tau_1 + ... + tau_n`` with independent ``tau_i ~ Geom(p_i)`` and
``p_i = (n - i + 1) / n``.  ``Z_n = T_n / n - log n`` converges to the Gumbel law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import BudgetExceeded, DomainError
from .gumbel import geometric_from_exponential
from .rng import RngStream

__all__ = [
    "CouponConstants",
    "CoupledTauPair",
    "CollectorStat",
    "Budget",
    "McEstimate",
    "IdentitySides",
    "TnLaw",
    "constants",
    "success_probs",
    "sample_coupled",
    "sample_coupled_totals",
    "sample_tn",
    "z_n_from",
    "exact_exp_moment",
    "density_ratio",
    "main_identity_sides",
    "y_gn_l2_sq",
    "y_ceil_moment",
    "harmonic",
    "z_diff_l1",
    "z_diff_l1_bound",
    "exact_cdf_Tn",
    "tn_law",
]

# 1 - CDF of the Gumbel law and of Z_n both fall below 1e-12 once x > 28
_X_TAIL = 28.0


@dataclass(frozen=True)
class CouponConstants:
    n: int
    alpha_n: float
    beta_n: float
    delta_n: float
    K_n: float
    eps_n: float
    log_K_n: float

    @property
    def K_minus_one(self) -> float:
        """``K_n - 1`` without cancellation."""
        return math.expm1(self.log_K_n)


def constants(n: int) -> CouponConstants:
    if n < 2:
        raise DomainError(f"constants need n >= 2, got {n}")
    n = int(n)
    log_alpha = math.log1p(-1.0 / n)
    log_K = math.log(n) + (n - 1) * math.log(n - 1) * log_alpha
    return CouponConstants(
        n=n,
        alpha_n=1.0 - 1.0 / n,
        beta_n=-(n - 1) * log_alpha,
        delta_n=log_alpha - math.log(n - 1) / n,
        K_n=math.exp(log_K),
        eps_n=-n * log_alpha,
        log_K_n=log_K,
    )


def success_probs(n: int) -> np.ndarray:
    """``p_i = (n - i + 1) / n`` for ``i = 1..n``."""
    return (n - np.arange(n)) / n


@dataclass(frozen=True)
class CoupledTauPair:
    """One joint draw of ``(tau^{n-1}, tau^n)``; index 0 holds ``tau_1``."""

    tau_prev: np.ndarray
    tau_curr: np.ndarray

    @property
    def n(self) -> int:
        return len(self.tau_curr)


def _log_fail(n: int, i: np.ndarray) -> np.ndarray:
    # log(1 - p_i) = log((i - 1) / n), i >= 2
    return np.log((i - 1) / n)


def sample_coupled(n: int, rng: RngStream) -> CoupledTauPair:
    """Shared-exponential coupling: ``Y_i`` drives both ``tau_i^n`` and ``tau_{i-1}^{n-1}``.

    Since ``p_i^n <= p_{i-1}^{n-1}``, the second is never larger.
    """
    if n < 2:
        raise DomainError(f"coupling needs n >= 2, got {n}")
    y = rng.exponentials(n - 1)
    i = np.arange(2, n + 1)
    curr = np.ones(n, dtype=np.int64)
    prev = np.ones(n - 1, dtype=np.int64)
    curr[1:] = geometric_from_exponential(y, (n - i + 1) / n)
    if n > 2:
        # tau_{i-1}^{n-1} for i = 3..n; p = (n - i + 1)/(n - 1)
        prev[1:] = geometric_from_exponential(y[1:], (n - i[1:] + 1) / (n - 1))
    return CoupledTauPair(prev, curr)


def _geom_sum(y: np.ndarray, log_fail: np.ndarray) -> np.ndarray:
    k = np.maximum(np.ceil(y / -log_fail), 1.0)
    return k.sum(axis=1)


def sample_coupled_totals(n: int, rng: RngStream, size: int, chunk: int = 1 << 22):
    """``(T_n, T_{n-1})`` under the coupling, ``size`` draws each."""
    if n < 2:
        raise DomainError(f"coupling needs n >= 2, got {n}")
    i = np.arange(2, n + 1)
    lf_curr = np.log((i - 1) / n)
    lf_prev = np.log((i[1:] - 2) / (n - 1)) if n > 2 else np.empty(0)
    t_curr = np.empty(size)
    t_prev = np.empty(size)
    rows = max(1, chunk // max(n - 1, 1))
    for s in range(0, size, rows):
        m = min(rows, size - s)
        y = rng.exponentials((m, n - 1))
        t_curr[s:s + m] = 1.0 + _geom_sum(y, lf_curr[None, :])
        t_prev[s:s + m] = 1.0 + (_geom_sum(y[:, 1:], lf_prev[None, :]) if n > 2 else 0.0)
    return t_curr, t_prev


def sample_tn(n: int, rng: RngStream, size: int, chunk: int = 1 << 22) -> np.ndarray:
    """Independent draws of ``T_n``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if n == 1:
        return np.ones(size)
    lf = _log_fail(n, np.arange(2, n + 1))[None, :]
    out = np.empty(size)
    rows = max(1, chunk // (n - 1))
    for s in range(0, size, rows):
        m = min(rows, size - s)
        out[s:s + m] = 1.0 + _geom_sum(rng.exponentials((m, n - 1)), lf)
    return out


@dataclass(frozen=True)
class CollectorStat:
    n: int
    T_n: int
    Z_n: float


def z_n_from(tau) -> CollectorStat:
    tau = np.asarray(tau, dtype=np.int64)
    if tau.size == 0:
        raise DomainError("tau must be non-empty")
    n = int(tau.size)
    total = int(tau.sum())
    return CollectorStat(n, total, total / n - math.log(n))


def exact_exp_moment(n: int, lam: float) -> float:
    """``E[exp(-lam Z_n)] = n^lam prod_{k=1}^n k / (k + c)`` with ``c = n (e^{lam/n} - 1)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    c = n * math.expm1(lam / n)
    k = np.arange(1, n + 1, dtype=float)
    return math.exp(lam * math.log(n) - float(np.sum(np.log1p(c / k))))


def density_ratio(t, n: int) -> float:
    """Likelihood ratio of ``(tau_1..tau_{n-1})`` under ``n`` versus ``n - 1`` items."""
    t = np.asarray(t, dtype=float)
    if n < 2:
        raise DomainError("n must be >= 2")
    if t.shape != (n - 1,):
        raise DomainError(f"expected {n - 1} values, got shape {t.shape}")
    return math.exp(math.log(n) + float(t.sum()) * math.log1p(-1.0 / n))


@dataclass(frozen=True)
class Budget:
    """Resource caps shared by the enumeration and sampling routines."""

    samples: int = 10 ** 6
    max_atoms: int = 4 * 10 ** 6
    enumerate_max_n: int = 4
    tail_mass: float = 1e-30
    max_draws: int = 2 * 10 ** 9


DEFAULT_BUDGET = Budget()


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float


@dataclass(frozen=True)
class IdentitySides:
    """Both sides of ``E f'(Z_n) = K_n E[e^{-b Z_{n-1}} f'(a Z_{n-1} + G_n + d)]``.

    ``*_err`` is a truncation certificate (enumeration) or a standard error
    (Monte Carlo).
    """

    n: int
    lhs: float
    rhs: float
    lhs_err: float
    rhs_err: float
    mode: str

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


def _truncated_geom(p: float, tail: float):
    """pmf of Geom(p) on ``1..K`` (index 0 is k = 0) and the dropped mass ``(1-p)^K <= tail``."""
    if p >= 1.0:
        return np.array([0.0, 1.0]), 0.0
    q = 1.0 - p
    K = max(1, math.ceil(math.log(tail) / math.log(q)))
    k = np.arange(1, K + 1)
    return np.concatenate([[0.0], p * q ** (k - 1)]), q ** K


def _tn_pmf_enumerated(n: int, tail: float, budget: Budget):
    """Truncated pmf of ``T_n`` and a union bound on the mass it misses."""
    pmf = np.array([1.0])
    dropped = 0.0
    for p in success_probs(n):
        g, lost = _truncated_geom(float(p), tail)
        pmf = np.convolve(pmf, g)
        dropped += lost
        if pmf.size > budget.max_atoms:
            raise BudgetExceeded(f"enumeration of T_{n} exceeds {budget.max_atoms} atoms")
    return pmf, dropped


def _tn_moments(n: int):
    p = success_probs(n)
    mean = float(np.sum(1.0 / p))
    var = float(np.sum((1.0 - p) / p ** 2))
    return mean, var


def main_identity_sides(
    n: int,
    fprime: Callable,
    mode: str = "enumerate",
    budget: Budget = DEFAULT_BUDGET,
    rng: RngStream | None = None,
    growth: tuple[float, float] = (1.0, 1.0),
) -> IdentitySides:
    """Evaluate both sides of the change-of-probability identity.

    ``enumerate`` convolves truncated geometric pmfs (``n <= budget.enumerate_max_n``).
    Its error certificate uses Cauchy-Schwarz on the neglected mass together
    with the envelope ``|f'(x)| <= a + b |x|`` given by ``growth = (a, b)``.
    ``monte_carlo`` draws ``budget.samples`` values of ``Z_n`` and, from
    separate streams, ``Z_{n-1}`` and ``G_n``.
    """
    if n < 2:
        raise DomainError(f"main identity needs n >= 2, got {n}")
    c = constants(n)
    if mode == "enumerate":
        if n > budget.enumerate_max_n:
            raise BudgetExceeded(f"enumerate mode supports n <= {budget.enumerate_max_n}, got {n}")
        tail = budget.tail_mass
        pmf_n, lost_n = _tn_pmf_enumerated(n, tail, budget)
        k = np.arange(pmf_n.size)
        z = k / n - math.log(n)
        lhs = float(np.dot(pmf_n, fprime(z)))

        pmf_prev, lost_prev = _tn_pmf_enumerated(n - 1, tail, budget)
        g_pmf, lost_g = _truncated_geom(1.0 / n, tail)
        zp = np.arange(pmf_prev.size) / (n - 1) - math.log(n - 1)
        gv = np.arange(g_pmf.size) / n
        sp = pmf_prev > 0
        gp = g_pmf > 0
        zp, wp = zp[sp], pmf_prev[sp]
        gv, wg = gv[gp], g_pmf[gp]
        if zp.size * gv.size > budget.max_atoms:
            raise BudgetExceeded("joint enumeration exceeds the atom budget")
        arg = c.alpha_n * zp[:, None] + gv[None, :] + c.delta_n
        inner = fprime(arg.ravel()).reshape(arg.shape) @ wg
        rhs = c.K_n * float(np.dot(wp * np.exp(-c.beta_n * zp), inner))

        a, b = growth
        mean, var = _tn_moments(n)
        ez2 = var / n ** 2 + (mean / n - math.log(n)) ** 2
        lhs_err = math.sqrt(lost_n) * math.sqrt(2 * a * a + 2 * b * b * ez2)
        # arg is at most |Z_{n-1}| + G + 1 in size; e^{-b Z} <= (n-1)^b e^{-b} on the support
        mp, vp = _tn_moments(n - 1)
        ez2p = vp / (n - 1) ** 2 + (mp / (n - 1) - math.log(n - 1)) ** 2
        eg2 = (2.0 - 1.0 / n)  # E[G_n^2] = (2 - p)/(p^2 n^2) with p = 1/n
        arg2 = 3.0 * (ez2p + eg2 + 1.0)
        deficit = lost_prev + lost_g
        weight = c.K_n * math.exp(c.beta_n * (math.log(n - 1) - 1.0))
        rhs_err = weight * math.sqrt(deficit) * math.sqrt(2 * a * a + 2 * b * b * arg2)
        return IdentitySides(n, lhs, rhs, lhs_err, rhs_err, mode)

    if mode == "monte_carlo":
        if rng is None:
            raise DomainError("monte_carlo mode needs an RngStream")
        m = int(budget.samples)
        zn = sample_tn(n, rng.spawn(rng.stream_id * 8 + 1), m) / n - math.log(n)
        zp = sample_tn(n - 1, rng.spawn(rng.stream_id * 8 + 2), m) / (n - 1) - math.log(n - 1)
        y = rng.spawn(rng.stream_id * 8 + 3).exponentials(m)
        g = geometric_from_exponential(y, 1.0 / n) / n
        left = np.asarray(fprime(zn), dtype=float)
        right = c.K_n * np.exp(-c.beta_n * zp) * np.asarray(fprime(c.alpha_n * zp + g + c.delta_n), dtype=float)
        return IdentitySides(
            n, float(left.mean()), float(right.mean()),
            float(left.std(ddof=1) / math.sqrt(m)), float(right.std(ddof=1) / math.sqrt(m)), mode,
        )
    raise DomainError(f"unknown mode {mode!r}")


def y_gn_l2_sq(n: int) -> float:
    """``E|Y - G_n|^2 = 2 - 1/n + 2 (n - 1) log(1 - 1/n)`` under the ceiling coupling."""
    if n < 2:
        raise DomainError("n must be >= 2")
    x = 1.0 / n
    if x < 1e-3:
        # log1p(-x) + x + x^2/2 = -sum_{k>=3} x^k / k
        rest = -sum(x ** k / k for k in range(3, 12))
    else:
        rest = math.log1p(-x) + x + 0.5 * x * x
    return x * x + 2.0 * (n - 1) * rest


def y_ceil_moment(lam: float) -> float:
    """``E[Y ceil(Y / lam)]`` for ``Y ~ Exp(1)``."""
    if not lam > 0:
        raise DomainError("lam must be positive")
    em = -math.expm1(-lam)
    return lam * math.exp(-lam) / em ** 2 + 1.0 / em


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def z_diff_l1_bound(n: int) -> float:
    """``2/(n-1) + 2 H_{n-1} / n``."""
    return 2.0 / (n - 1) + 2.0 * harmonic(n - 1) / n


def z_diff_l1(n: int, samples: int, rng: RngStream) -> McEstimate:
    """Monte Carlo ``E|Z_n - Z_{n-1}|`` under the coupling."""
    if n < 2:
        raise DomainError("n must be >= 2")
    t_curr, t_prev = sample_coupled_totals(n, rng, samples)
    d = np.abs(t_curr / n - math.log(n) - t_prev / (n - 1) + math.log(n - 1))
    return McEstimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(samples)))


# exact law of T_n ----------------------------------------------------------

_EXACT_MAX_WORK = 4 * 10 ** 6


def _cdf_exact_int(n: int, k: int) -> float:
    num = sum((-1) ** j * math.comb(n, j) * (n - j) ** k for j in range(n + 1))
    return float(Fraction(num, n ** k))


def _cdf_upper_tail_series(n: int, k: int) -> float:
    # far in the right tail the alternating terms shrink geometrically
    total = 0.0
    for j in range(1, n + 1):
        term = math.exp(math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) + k * math.log1p(-j / n)) if j < n else 0.0
        total += (-1) ** (j + 1) * term
        if term < 1e-300:
            break
    return min(1.0, max(0.0, 1.0 - total))


@dataclass(frozen=True)
class TnLaw:
    """``P(T_n <= k)`` for ``k = 0..k_max``; ``1 - cdf[-1]`` is below ``tail``."""

    n: int
    cdf: np.ndarray
    tail: float

    @property
    def k_max(self) -> int:
        return len(self.cdf) - 1

    @property
    def pmf(self) -> np.ndarray:
        return np.diff(self.cdf, prepend=0.0)

    def atoms(self, lower_tail: float = 0.0):
        """``(z, prob)`` over ``k`` with ``P(T_n = k) > 0``; ``z = k/n - log n``."""
        pmf = self.pmf
        k = np.arange(len(pmf))
        keep = pmf > lower_tail
        return k[keep] / self.n - math.log(self.n), pmf[keep]


def _dp_cdf(n: int, k_max: int) -> np.ndarray:
    """Occupancy chain over the number of distinct items seen, with a moving window."""
    j = np.arange(n + 1, dtype=float)
    stay = j / n
    move = (n - j) / n
    q = np.zeros(n + 1)
    q[0] = 1.0
    lo = hi = 0
    cdf = np.zeros(k_max + 1)
    negligible = 1e-300
    for k in range(1, k_max + 1):
        seg = q[lo:hi + 1].copy()
        q[lo:hi + 1] = seg * stay[lo:hi + 1]
        moved = seg * move[lo:hi + 1]
        if hi == n:
            moved = moved[:-1]
        q[lo + 1:lo + 1 + moved.size] += moved
        hi = min(hi + 1, n)
        while lo < hi and q[lo] < negligible:
            q[lo] = 0.0
            lo += 1
        cdf[k] = q[n]
    return cdf


@lru_cache(maxsize=64)
def tn_law(n: int, tail: float = 1e-13) -> TnLaw:
    """Exact distribution of ``T_n`` up to the point where ``1 - P(T_n <= k) <= tail``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if n == 1:
        return TnLaw(1, np.array([0.0, 1.0]), tail)
    # P(T_n > k) <= n (1 - 1/n)^k
    k_max = int(math.ceil((math.log(n) - math.log(tail)) / -math.log1p(-1.0 / n)))
    if n * k_max <= _EXACT_MAX_WORK // 8 and n <= 40:
        cdf = np.array([_cdf_exact_int(n, k) if k >= n else 0.0 for k in range(k_max + 1)])
    else:
        cdf = _dp_cdf(n, k_max)
    return TnLaw(n, np.clip(cdf, 0.0, 1.0), tail)


def exact_cdf_Tn(n: int, k: int) -> float:
    """``P(T_n <= k) = sum_j (-1)^j C(n, j) (1 - j/n)^k``, clamped to ``[0, 1]``.

    Small cases use exact integer arithmetic; larger ones read the occupancy
    chain, since the alternating sum cancels catastrophically in floating point.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if k < n:
        return 0.0
    if n * k <= _EXACT_MAX_WORK // 16 and n <= 64:
        return min(1.0, max(0.0, _cdf_exact_int(n, k)))
    law = tn_law(n)
    if k <= law.k_max:
        return float(law.cdf[k])
    return _cdf_upper_tail_series(n, k)
