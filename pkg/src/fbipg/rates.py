"""Parameter sequences and theoretical convergence bounds.

Sequences follow the conventions ``alpha_{-1} = 0`` and ``t_{-1} = 0``; the
explicit momentum sequence is ``t_k = (k + a) / a``.  Bounds take a
:class:`RateParams` bundle holding the instance constants (``beta``,
``R2 = ||x0 - x'||^2``, ``delta_omega = omega(x') - omega*`` and, for the
Hölderian regime, ``tau`` and ``rho``).
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EstimationError

__all__ = [
    "RateParams", "alpha_k", "t_explicit", "t_fista", "d_k", "eta_k",
    "lambda_k", "pi", "sum_alpha_t", "sum_alpha_t_bound",
    "sum_alpha_t_bound_tight", "techsum_bound", "inner_bound_fast",
    "inner_bound", "outer_bound", "simul_bounds_gamma1", "holder_constant_C",
    "holder_bounds", "boundeta_check", "sumtechnical_check",
    "sumtechnical_partial", "generic_fixed_bounds", "fit_loglog_slope",
    "fista_fixed_rate",
]


@dataclass(frozen=True)
class RateParams:
    a: int
    gamma: float
    beta: float
    R2: float
    delta_omega: float = 0.0
    tau: float = None
    rho: float = None

    def __post_init__(self):
        if self.a < 2:
            raise ValueError("a must be >= 2")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        for name in ("beta", "R2", "delta_omega"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")


# ---------------------------------------------------------------------------
# sequences


def alpha_k(k, a, gamma):
    """(k + a)^(-gamma), with alpha_{-1} = 0."""
    if k == -1:
        return 0.0
    if k < -1:
        raise ValueError("k must be >= -1")
    return float((k + a) ** (-gamma))


def t_explicit(k, a):
    """(k + a) / a, with t_{-1} = 0."""
    if k == -1:
        return 0.0
    if k < -1:
        raise ValueError("k must be >= -1")
    return (k + a) / a


def t_fista(t_prev):
    return (1.0 + math.sqrt(1.0 + 4.0 * t_prev * t_prev)) / 2.0


def d_k(k, a):
    """t_{k-1}^2 - (t_k^2 - t_k) for the explicit sequence."""
    tp, t = t_explicit(k - 1, a), t_explicit(k, a)
    return tp * tp - (t * t - t)


def eta_k(k, a, gamma):
    """t_{k-1}^2 alpha_{k-1} - (t_k^2 - t_k) alpha_k for the explicit sequence."""
    tp, t = t_explicit(k - 1, a), t_explicit(k, a)
    return tp * tp * alpha_k(k - 1, a, gamma) - (t * t - t) * alpha_k(k, a, gamma)


def lambda_k(k, a):
    """Momentum weight (t_{k-1} - 1) / t_k."""
    return (t_explicit(k - 1, a) - 1.0) / t_explicit(k, a)


def pi(s, k, a):
    """prod_{j=s}^{k} lambda_j, equal to 1 when k < s."""
    out = 1.0
    for j in range(s, k + 1):
        out *= lambda_k(j, a)
        if out == 0.0:
            break
    return out


def sum_alpha_t(k, a, gamma):
    """sum_{s=0}^{k-1} alpha_s t_s (exactly rounded summation)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    s = np.arange(k, dtype=float)
    return math.fsum(((s + a) ** (-gamma)) * ((s + a) / a))


def sum_alpha_t_bound(k, a, gamma):
    """Three-case bound on ``sum_alpha_t`` in its commonly cited form."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = k + a - 1
    if gamma == 2:
        return math.log(m)
    if gamma < 2:
        return (m ** (2 - gamma) - 1.0) / (2 - gamma)
    return (1.0 - m ** (2 - gamma)) / (gamma - 2)


def sum_alpha_t_bound_tight(k, a, gamma):
    """Same bound carrying the 1/a factor from ``t_s = (s + a)/a``.

    Diagnostic only: for gamma < 1 the summand grows with s and the
    integral comparison behind this form is not guaranteed.
    """
    return sum_alpha_t_bound(k, a, gamma) / a


def techsum_bound(n1, n2, r):
    """(n2^(1-r) - (n1 - 1)^(1-r)) / (1 - r), an upper bound on sum_{n1}^{n2} n^(-r).

    ``n2`` may be ``math.inf`` when ``r > 1``.
    """
    if r == 1:
        raise ValueError("techsum_bound: r = 1 is excluded")
    if not r > 0:
        raise ValueError("techsum_bound: r must be positive")
    if n1 > n2:
        raise ValueError("techsum_bound: need n1 <= n2")
    if r > 1 and n1 < 2:
        raise ValueError("techsum_bound: r > 1 requires n1 >= 2")
    hi = 0.0 if (math.isinf(n2) and r > 1) else float(n2) ** (1 - r)
    if math.isinf(n2) and r < 1:
        return math.inf
    return (hi - float(n1 - 1) ** (1 - r)) / (1 - r)


# ---------------------------------------------------------------------------
# bounds


def inner_bound_fast(k, params):
    """Inner gap bound for gamma > 2."""
    g = params.gamma
    if not g > 2:
        raise ValueError("inner_bound_fast requires gamma > 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    a = params.a
    return a * a / (2.0 * (k + 1) ** 2) * (params.beta * params.R2
                                            + 2.0 / (g - 2) * params.delta_omega)


def inner_bound(k, params):
    """Inner gap bound for 0 < gamma <= 2."""
    g = params.gamma
    if not 0 < g <= 2:
        raise ValueError("inner_bound requires 0 < gamma <= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    a = params.a
    if g == 2:
        c = math.log(k + a - 1)
    else:
        c = (k + 1) ** (2 - g) / (2 - g)
    return (a * a * params.beta * params.R2 / (2.0 * (k + 1) ** 2)
            + a * a * c * params.delta_omega / (k + 1) ** 2)


def outer_bound(k, params):
    """Best-iterate outer gap bound for 0 < gamma < 2."""
    g = params.gamma
    if not 0 < g < 2:
        raise ValueError("outer_bound requires 0 < gamma < 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    return params.a ** 2 * params.beta * params.R2 / (2.0 * (k + 1) ** (2 - g))


def simul_bounds_gamma1(k, params):
    """(inner, outer) bounds at the better of the last and the averaged iterate."""
    if k < 1:
        raise ValueError("k must be >= 1")
    a2 = params.a ** 2
    inner = (math.pi ** 2 * a2 * params.beta * params.R2 / (12.0 * k)
             + a2 * math.log(k + 1) * params.delta_omega / k)
    outer = a2 * params.beta * params.R2 / (2.0 * (k + 1))
    return inner, outer


def holder_constant_C(params):
    if params.tau is None or params.rho is None:
        raise ValueError("holder bounds need tau and rho")
    if not 1 < params.gamma < 2:
        raise ValueError("holder bounds require 1 < gamma < 2")
    a = params.a
    first = params.beta * params.R2 + params.delta_omega
    second = a ** 3 * params.rho ** 2 / params.tau / (params.gamma - 1) ** 2
    return a * a * max(first, second)


def holder_bounds(k, params):
    """Bounds (i) inner gap, (ii) omega(x') - omega(x^k), (iii) outer gap."""
    C = holder_constant_C(params)
    a = params.a
    return (a * C / (k + 1) ** 2,
            C / (a * a * (k + 1)),
            C / (k + 1) ** (2 - params.gamma))


def generic_fixed_bounds(R_K, alpha_K, delta_omega):
    """(inner, outer) bounds after K steps on a fixed-alpha regularized objective."""
    if not alpha_K > 0:
        raise ValueError("alpha_K must be positive")
    return R_K + alpha_K * delta_omega, R_K / alpha_K


def fista_fixed_rate(k, L, R2):
    """2 L ||x0 - x'||^2 / (k + 1)^2."""
    return 2.0 * L * R2 / (k + 1) ** 2


# ---------------------------------------------------------------------------
# lemma checks


def boundeta_check(k, a, gamma):
    """eta_k < (k + 1)^(1 - gamma) / 2 (stated for 1 < gamma < 2)."""
    return eta_k(k, a, gamma) < 0.5 * (k + 1) ** (1 - gamma)


def sumtechnical_partial(s, a, k_max):
    """Truncated sum_{k=0}^{k_max} pi_{s,k}."""
    if k_max < s:
        return float(k_max + 1)
    j = np.arange(s, k_max + 1, dtype=float)
    lam = (j - 1.0) / (j + a)          # lambda_j for the explicit sequence
    return math.fsum(np.cumprod(lam)) + s


def sumtechnical_check(s, a, k_max):
    """Truncated form of sum_k pi_{s,k} <= (5a/2) t_{s-1}.

    Truncation drops nonnegative terms, so a pass here is necessary for the
    infinite statement.
    """
    return sumtechnical_partial(s, a, k_max) <= 2.5 * a * t_explicit(s - 1, a)


# ---------------------------------------------------------------------------
# empirical rates


def fit_loglog_slope(trace, metric, k_lo, k_hi):
    """Least-squares slope of log(metric) against log(k) on [k_lo, k_hi].

    ``trace`` is anything indexable by column name (an ``IterateTrace`` or a
    dict of arrays) with a ``"k"`` column.  Nonpositive or missing metric
    values are dropped.
    """
    k = np.asarray(trace["k"], dtype=float)
    m = np.asarray(trace[metric], dtype=float)
    keep = (k >= k_lo) & (k <= k_hi) & (k > 0) & np.isfinite(m) & (m > 0)
    if np.count_nonzero(keep) < 10:
        raise EstimationError(
            f"need at least 10 positive {metric} values in [{k_lo}, {k_hi}], "
            f"got {np.count_nonzero(keep)}")
    slope, _ = np.polyfit(np.log(k[keep]), np.log(m[keep]), 1)
    return float(slope)
