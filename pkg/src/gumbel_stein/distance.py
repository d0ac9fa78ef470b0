"""Distances between law(Z_n) and the Gumbel law, rate fits and generator gaps.

Exact modes work on the atoms ``z_k = k/n - log n`` of ``Z_n`` with the
probabilities from :func:`coupon.tn_law`.  Monte Carlo modes draw ``T_n`` and
read the same precomputed grids, so both modes share every quadrature.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .coupon import Budget, constants, sample_coupled_totals, sample_tn, tn_law
from .errors import BudgetExceeded, DegenerateInput, DomainError, WindowTooSmall
from .functions import TestFunction, dictionary as default_entries
from .gumbel import gumbel_cdf, gumbel_expectation
from .quad import DEFAULT_QUAD, KRONROD_WEIGHTS, NODES, QuadConfig, integrate_halfline
from .rng import RngStream
from .semigroup import semigroup_derivative, time_constant

__all__ = [
    "Metric",
    "Dictionary",
    "DistanceReport",
    "GapProfile",
    "Decomposition",
    "kolmogorov_distance",
    "zn_atoms",
    "expectation_zn",
    "dict_distance",
    "rate_fit",
    "coupon_rate",
    "gap_profile",
    "decomposition_terms",
    "envelope_shape",
    "calibrate_envelope",
    "envelope_violations",
    "a1_bound",
    "report_csv",
    "report_json",
    "format_number",
]


class Metric(str, Enum):
    KOLMOGOROV = "kolmogorov"
    DICT_LIP2 = "dict_lip2"


@dataclass(frozen=True)
class Dictionary:
    """Test functions whose Lip2 norm is at most one."""

    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise DomainError("dictionary must be non-empty")
        for f in self.entries:
            if f.lip_f > 1.0 or f.lip_fprime > 1.0:
                raise DomainError(f"{f.name} has Lip2 norm above one")

    @classmethod
    def default(cls) -> "Dictionary":
        return cls(tuple(default_entries()))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def spot_check(self, rng: RngStream, pairs: int = 2000, width: float = 20.0) -> bool:
        """Check the declared Lipschitz constants on random pairs."""
        x = (rng.uniforms(pairs) - 0.5) * width
        y = (rng.uniforms(pairs) - 0.5) * width
        d = np.abs(x - y)
        for f in self.entries:
            if np.any(np.abs(f(x) - f(y)) > f.lip_f * d * (1 + 1e-12) + 1e-12):
                return False
            if np.any(np.abs(f.fprime(x) - f.fprime(y)) > f.lip_fprime * d * (1 + 1e-12) + 1e-12):
                return False
        return True


# ---------------------------------------------------------------- atoms of Z_n

def zn_atoms(n: int):
    """``(z, p)``: atoms of ``Z_n`` with positive probability, upper tail below 1e-13."""
    return tn_law(n).atoms()


def expectation_zn(n: int, f) -> np.ndarray:
    """``E f(Z_n)`` by summation over the atoms; ``f`` may be vector-valued."""
    z, p = zn_atoms(n)
    vals = np.asarray(f(z), dtype=float)
    return np.tensordot(p, vals, axes=([0], [0]))


def kolmogorov_distance(n: int, k_window: tuple[int, int] | None = None, tail_tol: float = 1e-12) -> float:
    """``sup_x |P(Z_n <= x) - exp(-exp(-x))|``.

    Between atoms the Gumbel CDF is monotone and the step CDF is flat, so the
    sup is attained at a left or right limit at some atom.  A window
    ``[k_lo, k_hi]`` of values of ``T_n`` is certified when
    ``P(T_n < k_lo) <= tail_tol`` and ``P(T_n > k_hi) <= tail_tol``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    law = tn_law(n)
    lo, hi = (n, law.k_max) if k_window is None else (int(k_window[0]), int(k_window[1]))
    if lo > hi:
        raise WindowTooSmall("empty window")

    def cdf(k):
        k = np.asarray(k)
        out = np.where(k < 0, 0.0, law.cdf[np.clip(k, 0, law.k_max)])
        return np.where(k > law.k_max, 1.0, out)

    below = float(cdf(lo - 1))
    above = 1.0 - float(cdf(hi)) if hi <= law.k_max else 0.0
    if hi > law.k_max:
        above = law.tail
    if below > tail_tol or above > tail_tol:
        raise WindowTooSmall(
            f"window [{lo}, {hi}] leaves mass {below:.2e} below and {above:.2e} above "
            f"(tolerance {tail_tol:.0e})"
        )
    k = np.arange(lo, hi + 1)
    g = gumbel_cdf(k / n - math.log(n))
    right = np.abs(cdf(k) - g)
    left = np.abs(cdf(k - 1) - g)
    return float(max(right.max(), left.max()))


# ------------------------------------------------------------ dictionary metric

def dict_distance(
    n: int,
    dct: Dictionary | None = None,
    mode: str = "exact_atoms",
    budget: Budget = Budget(),
    rng: RngStream | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> float:
    """``max_f |E f(Z_n) - E f(Z)|`` over the dictionary entries.

    A lower bound for the smooth Wasserstein distance.
    """
    dct = Dictionary.default() if dct is None else dct
    if mode == "exact_atoms":
        z, p = zn_atoms(n)
        if z.size > budget.max_atoms:
            raise BudgetExceeded(f"Z_{n} has {z.size} atoms, budget {budget.max_atoms}")
        mean = lambda f: float(np.dot(p, f(z)))
    elif mode == "monte_carlo":
        if rng is None:
            raise DomainError("monte_carlo mode needs an RngStream")
        if n * budget.samples > budget.max_draws:
            raise BudgetExceeded(f"{n * budget.samples} geometric draws exceed {budget.max_draws}")
        z = sample_tn(n, rng, budget.samples) / n - math.log(n)
        mean = lambda f: float(np.mean(f(z)))
    else:
        raise DomainError(f"unknown mode {mode!r}")
    # one quadrature per entry: a shared adaptive batch would couple the entries' rounding
    return max(abs(mean(f) - gumbel_expectation(f, cfg)) for f in dct.entries)


# ------------------------------------------------------------------- rate fit

@dataclass
class DistanceReport:
    n_values: list
    distances: list
    metric: str
    fit_constant: float
    fit_exponent: float
    max_residual: float

    def __post_init__(self):
        if len(self.n_values) != len(self.distances):
            raise DomainError("n_values and distances differ in length")
        if any(d < 0 for d in self.distances):
            raise DomainError("distances must be non-negative")

    def rows(self):
        for n, d in zip(self.n_values, self.distances):
            yield {
                "n": int(n),
                "metric": self.metric,
                "distance": float(d),
                "log_n_over_n": math.log(n) / n,
                "fitted_constant": self.fit_constant,
                "fit_exponent": self.fit_exponent,
            }


REPORT_COLUMNS = ["n", "metric", "distance", "log_n_over_n", "fitted_constant", "fit_exponent"]


def rate_fit(n_values: Sequence[int], distances: Sequence[float], metric: str = Metric.KOLMOGOROV.value) -> DistanceReport:
    """Fit ``d_n = C log(n)/n``.

    ``C`` is the least-squares constant, the exponent is the OLS slope of
    ``log d_n`` against ``log(log(n)/n)``.
    """
    n = np.asarray(n_values, dtype=float)
    d = np.asarray(distances, dtype=float)
    if n.size != d.size:
        raise DomainError("n_values and distances differ in length")
    if n.size < 4:
        raise DegenerateInput(f"rate fit needs at least 4 points, got {n.size}")
    if np.any(np.diff(n) <= 0):
        raise DegenerateInput("n values must be strictly increasing")
    if np.any(n < 2):
        raise DegenerateInput("rate fit needs n >= 2 (log n / n vanishes at n = 1)")
    if np.all(d == 0):
        raise DegenerateInput("all distances are zero")
    if np.any(d <= 0):
        raise DegenerateInput("log-log slope needs strictly positive distances")
    u = np.log(n) / n
    c = float(np.dot(d, u) / np.dot(u, u))
    slope = float(np.polyfit(np.log(u), np.log(d), 1)[0])
    resid = float(np.max(np.abs(d - c * u)))
    return DistanceReport([int(v) for v in n], [float(v) for v in d], str(Metric(metric).value), c, slope, resid)


def coupon_rate(
    n_values: Sequence[int],
    metric: str = Metric.KOLMOGOROV.value,
    mode: str = "exact_atoms",
    budget: Budget = Budget(),
    rng: RngStream | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
) -> DistanceReport:
    """Distances over ``n_values`` followed by :func:`rate_fit`."""
    metric = Metric(metric)
    dists = []
    for i, n in enumerate(sorted(int(v) for v in n_values)):
        if metric is Metric.KOLMOGOROV:
            dists.append(kolmogorov_distance(n))
        else:
            sub = None if rng is None else rng.spawn(rng.stream_id * 4096 + i + 1)
            dists.append(dict_distance(n, None, mode, budget, sub, cfg))
    return rate_fit(sorted(int(v) for v in n_values), dists, metric.value)


# ------------------------------------------------------------ generator gaps

_SEGMENT = 0.125


def _g_on_grid(h: TestFunction, t: float, x: np.ndarray, cfg: QuadConfig) -> np.ndarray:
    """``g(x) = int_x^inf e^{-z} exp(-g_t e^{-z}) h'(z - t) dz`` on an ascending grid."""
    gam = time_constant(t).gamma_t

    def integrand(z):
        with np.errstate(over="ignore"):
            return np.exp(-z - gam * np.exp(-z)) * h.fprime(z - t)

    out = np.empty(x.size)
    tail = integrate_halfline(integrand, float(x[-1]), cfg)
    if x.size == 1:
        out[0] = tail
        return out
    a, b = x[:-1], x[1:]
    pieces = max(1, int(math.ceil(float(np.max(b - a)) / _SEGMENT)))
    seg = np.zeros(a.size)
    for j in range(pieces):
        lo = a + (b - a) * j / pieces
        hi = a + (b - a) * (j + 1) / pieces
        c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes = c[:, None] + r[:, None] * NODES[None, :]
        seg += r * (integrand(nodes) @ KRONROD_WEIGHTS)
    out[-1] = tail
    out[:-1] = tail + np.cumsum(seg[::-1])[::-1]
    return out


@dataclass
class _Grids:
    """Everything the gap and its decomposition need, tabulated on the atom grids."""

    n: int
    k_curr: np.ndarray      # values of T_n
    k_prev: np.ndarray      # values of T_{n-1}
    lgen_curr: np.ndarray   # L P_t h on the Z_n atoms
    g_curr: np.ndarray
    g_prev: np.ndarray
    gn_prev: np.ndarray


def _grids(n: int, h: TestFunction, t: float, k_hi: int, cfg: QuadConfig) -> _Grids:
    c = constants(n)
    k_curr = np.arange(n, k_hi + 1)
    k_prev = np.arange(n - 1, k_hi + 1)
    z_curr = k_curr / n - math.log(n)
    z_prev = k_prev / (n - 1) - math.log(n - 1)
    deriv = np.asarray(semigroup_derivative(h, t, z_curr))
    g_curr = _g_on_grid(h, t, z_curr, cfg)
    g_prev = _g_on_grid(h, t, z_prev, cfg)
    # a z_prev[m] + j/n + d = (k_prev[m] + j)/n - log n: a geometric average of
    # (P_t h)' along the Z_n grid, computed by a backward recursion
    q = 1.0 - 1.0 / n
    j_max = int(math.ceil(40.0 / -math.log(q)))
    k_ext = np.arange(k_prev[0] + 1, k_hi + j_max + 2)
    fp = np.asarray(semigroup_derivative(h, t, k_ext / n - math.log(n)))
    # S[m] = fp[m + 1]/n + q S[m + 1]
    s_rev = lfilter([1.0 / n], [1.0, -q], fp[::-1])
    s = s_rev[::-1][: k_prev.size]
    gn_prev = np.exp(-c.beta_n * z_prev) * s
    return _Grids(n, k_curr, k_prev, -deriv + g_curr, g_curr, g_prev, gn_prev)


@dataclass
class GapProfile:
    """``E[L P_t h(Z_n)]`` over a grid of times; ``stderr`` is zero in exact mode."""

    n: int
    t: np.ndarray
    gap: np.ndarray
    stderr: np.ndarray

    def __iter__(self):
        return iter(self.gap)

    def __len__(self) -> int:
        return len(self.gap)


@dataclass
class Decomposition:
    """``A1 + A2 + A3`` together with the directly computed gap."""

    n: int
    t: float
    A1: float
    A2: float
    A3: float
    gap: float
    stderr: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.A1 + self.A2 + self.A3


def _check_h(h: TestFunction):
    if not (math.isfinite(h.lip_f) and math.isfinite(h.lip_fprime)):
        raise DomainError(f"{h.name} is not in Lip2")


def _law_window(n: int, budget: Budget):
    law_c, law_p = tn_law(n), tn_law(n - 1)
    k_hi = max(law_c.k_max, law_p.k_max)
    if k_hi > budget.max_atoms:
        raise BudgetExceeded(f"atom grid of size {k_hi} exceeds {budget.max_atoms}")
    return law_c, law_p, k_hi


def _pad(pmf: np.ndarray, start: int, size: int) -> np.ndarray:
    out = np.zeros(size)
    piece = pmf[start:start + size]
    out[: piece.size] = piece
    return out


def _mc_mean(v: np.ndarray):
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _draws(n, rng, budget, k_hi, tag):
    m = int(budget.samples)
    if n * m > budget.max_draws:
        raise BudgetExceeded(f"{n * m} geometric draws exceed {budget.max_draws}")
    out = sample_tn(n, rng.spawn(rng.stream_id * 16 + tag), m).astype(np.int64)
    return np.minimum(out, k_hi)


def gap_profile(
    n: int,
    h: TestFunction,
    t_grid: Sequence[float],
    budget: Budget = Budget(),
    rng: RngStream | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    mode: str = "exact_atoms",
) -> GapProfile:
    """``E[L P_t h(Z_n)]`` at each ``t`` with ``L P_t h = -(P_t h)' + g``."""
    if n < 2:
        raise DomainError("n must be >= 2")
    _check_h(h)
    t_arr = np.asarray(t_grid, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be non-negative")
    law_c, _, k_hi = _law_window(n, budget)
    samples = None
    if mode == "monte_carlo":
        if rng is None:
            raise DomainError("monte_carlo mode needs an RngStream")
        samples = _draws(n, rng, budget, k_hi, 1) - n
    elif mode != "exact_atoms":
        raise DomainError(f"unknown mode {mode!r}")
    w = _pad(law_c.pmf, n, k_hi - n + 1)
    gap = np.empty(t_arr.size)
    se = np.zeros(t_arr.size)
    for i, t in enumerate(t_arr):
        grid = _grids(n, h, float(t), k_hi, cfg)
        if samples is None:
            gap[i] = float(np.dot(w, grid.lgen_curr))
        else:
            gap[i], se[i] = _mc_mean(grid.lgen_curr[samples])
    return GapProfile(n, t_arr, gap, se)


def decomposition_terms(
    n: int,
    h: TestFunction,
    t: float,
    budget: Budget = Budget(),
    rng: RngStream | None = None,
    cfg: QuadConfig = DEFAULT_QUAD,
    mode: str = "exact_atoms",
) -> Decomposition:
    """``A1 = (1 - K_n) E g_n(Z_{n-1})``, ``A2 = E g(Z_n) - E g(Z_{n-1})``,
    ``A3 = E g(Z_{n-1}) - E g_n(Z_{n-1})`` with ``f = P_t h``.

    In Monte Carlo mode ``A2`` is averaged over coupled pairs ``(Z_n, Z_{n-1})``.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    if t < 0:
        raise DomainError("t must be non-negative")
    _check_h(h)
    c = constants(n)
    law_c, law_p, k_hi = _law_window(n, budget)
    grid = _grids(n, h, float(t), k_hi, cfg)
    if mode == "exact_atoms":
        wc = _pad(law_c.pmf, n, grid.k_curr.size)
        wp = _pad(law_p.pmf, n - 1, grid.k_prev.size)
        e_gn = float(np.dot(wp, grid.gn_prev))
        e_gp = float(np.dot(wp, grid.g_prev))
        a1 = (1.0 - c.K_n) * e_gn
        a2 = float(np.dot(wc, grid.g_curr)) - e_gp
        a3 = e_gp - e_gn
        gap = float(np.dot(wc, grid.lgen_curr))
        return Decomposition(n, float(t), a1, a2, a3, gap)
    if mode != "monte_carlo":
        raise DomainError(f"unknown mode {mode!r}")
    if rng is None:
        raise DomainError("monte_carlo mode needs an RngStream")
    m = int(budget.samples)
    if n * m > budget.max_draws:
        raise BudgetExceeded(f"{n * m} geometric draws exceed {budget.max_draws}")
    kc = _draws(n, rng, budget, k_hi, 1) - n
    kp = _draws(n - 1, rng, budget, k_hi, 2) - (n - 1)
    tc, tp = sample_coupled_totals(n, rng.spawn(rng.stream_id * 16 + 3), m)
    tc = np.minimum(tc.astype(np.int64), k_hi) - n
    tp = np.minimum(tp.astype(np.int64), k_hi) - (n - 1)
    a1, s1 = _mc_mean((1.0 - c.K_n) * grid.gn_prev[kp])
    a2, s2 = _mc_mean(grid.g_curr[tc] - grid.g_prev[tp])
    a3, s3 = _mc_mean(grid.g_prev[kp] - grid.gn_prev[kp])
    gap, sg = _mc_mean(grid.lgen_curr[kc])
    # A1 and A3 share draws; their sum's error comes from the combined sample
    _, s13 = _mc_mean((1.0 - c.K_n) * grid.gn_prev[kp] + grid.g_prev[kp] - grid.gn_prev[kp])
    return Decomposition(n, float(t), a1, a2, a3, gap,
                         {"A1": s1, "A2": s2, "A3": s3, "gap": sg, "total": math.hypot(s13, s2)})


def a1_bound(n: int, t: float, sup_hprime: float = 1.0) -> float:
    """Bound on ``|A1|``: ``(K_n - 1) ||h'|| min(1/K_n, n^{b - a} / g_t)``.

    ``K_n E g_n(Z_{n-1}) = E (P_t h)'(Z_n)`` gives the first branch; the
    second holds because ``Z_{n-1} >= -log n``.
    """
    c = constants(n)
    gam = time_constant(t).gamma_t
    second = math.inf if gam == 0 else math.exp((c.beta_n - c.alpha_n) * math.log(n)) / gam
    return c.K_minus_one * sup_hprime * min(1.0 / c.K_n, second)


# ------------------------------------------------------------------ envelopes

def envelope_shape(t) -> np.ndarray:
    """1 on ``[0, 1)`` and ``(1 + |log g_t|)/g_t`` from ``t = 1`` on."""
    t = np.asarray(t, dtype=float)
    gam = np.expm1(np.maximum(t, 1.0))
    late = (1.0 + np.abs(np.log(gam))) / gam
    return np.where(t < 1.0, 1.0, late)


def calibrate_envelope(profile: GapProfile) -> float:
    """Smallest ``C`` with ``|gap| <= C shape(t) log(n)/n`` on the calibration profile."""
    rate = math.log(profile.n) / profile.n
    return float(np.max(np.abs(profile.gap) / (envelope_shape(profile.t) * rate)))


def envelope_violations(profile: GapProfile, c_hat: float, slack: float = 1.25, n_se: float = 3.0) -> np.ndarray:
    """Boolean mask of times where ``|gap| - n_se*stderr`` exceeds ``slack * C shape * log(n)/n``."""
    rate = math.log(profile.n) / profile.n
    bound = slack * c_hat * envelope_shape(profile.t) * rate
    return np.abs(profile.gap) - n_se * profile.stderr > bound


# -------------------------------------------------------------------- output

def format_number(x) -> str:
    """17 significant digits, locale independent."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x) + 0.0, ".17g")  # + 0.0 folds -0 into 0


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_number(row[c]) for c in columns])
    return buf.getvalue()


def report_csv(report: DistanceReport) -> str:
    return _csv(REPORT_COLUMNS, report.rows())


def report_json(report: DistanceReport) -> str:
    payload = asdict(report)
    payload["rows"] = list(report.rows())
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
