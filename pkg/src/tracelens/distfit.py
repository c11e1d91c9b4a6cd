"""Empirical and parametric distribution machinery.

Covers the empirical CDF, the two-parameter Weibull family (density
(a/b)(x/b)^(a-1) exp(-(x/b)^a) with shape a and scale b), rank-value
power laws fitted on a log-log scale, and Pareto-style survival tails
estimated with the Hill estimator under a KS-minimizing threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, FitError
from .trace_model import DEGENERATE_FLAG, DistKind, FittedDistribution

__all__ = [
    "Ecdf",
    "ecdf",
    "weibull_pdf",
    "weibull_cdf",
    "weibull_quantile",
    "weibull_loglik",
    "weibull_loglik_grad",
    "fit_weibull",
    "fit_zipf",
    "fit_pareto_tail",
    "ks_statistic",
    "tail_skewness_report",
    "TailSummary",
    "ALPHA_RANGE_FLAG",
    "ZERO_SHIFT_FLAG",
]

# Survival-law exponents are conventionally expected in (0, 2]; fits outside
# that range are flagged, never clamped.
ALPHA_RANGE_FLAG = "alpha_outside_(0,2]"
ZERO_SHIFT_FLAG = "zeros_shifted"

_PROFILE_BRACKET = (1e-3, 1e3)
_PROFILE_TOL = 1e-9


def _as_samples(samples, min_n: int, name: str = "samples") -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    if x.size < min_n:
        raise ValueError(f"{name}: need at least {min_n} values, got {x.size}")
    if not np.isfinite(x).all():
        raise ValueError(f"{name}: non-finite values present")
    return x


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF over a sorted sample."""

    sorted_samples: np.ndarray
    n: int

    def evaluate(self, x):
        """Fraction of samples <= x. Accepts scalars or arrays."""
        ranks = np.searchsorted(self.sorted_samples, x, side="right")
        result = ranks / self.n
        if np.isscalar(x) or np.ndim(x) == 0:
            return float(result)
        return result


def ecdf(samples) -> Ecdf:
    x = _as_samples(samples, 1)
    return Ecdf(sorted_samples=np.sort(x), n=int(x.size))


def _check_weibull_params(shape: float, scale: float) -> None:
    if not (shape > 0 and scale > 0):
        raise ValueError(f"shape and scale must be > 0, got ({shape}, {scale})")


def weibull_pdf(x, shape: float, scale: float):
    """Weibull density. At x=0 the value is 0 for shape>1, 1/scale for
    shape=1, and +inf for shape<1 (the density diverges there)."""
    _check_weibull_params(shape, scale)
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("x must be >= 0")
    z = arr / scale
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (shape / scale) * z ** (shape - 1.0) * np.exp(-(z**shape))
    if shape < 1.0:
        out = np.where(arr == 0.0, np.inf, out)
    elif shape > 1.0:
        out = np.where(arr == 0.0, 0.0, out)
    else:
        out = np.where(arr == 0.0, 1.0 / scale, out)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def weibull_cdf(x, shape: float, scale: float):
    """Weibull distribution function 1 - exp(-(x/scale)^shape)."""
    _check_weibull_params(shape, scale)
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("x must be >= 0")
    out = -np.expm1(-((arr / scale) ** shape))
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def weibull_quantile(u, shape: float, scale: float):
    """Inverse CDF: scale * (-ln(1-u))^(1/shape) for u in [0, 1)."""
    _check_weibull_params(shape, scale)
    arr = np.asarray(u, dtype=np.float64)
    if np.any((arr < 0) | (arr >= 1)):
        raise ValueError("u must lie in [0, 1)")
    out = scale * (-np.log1p(-arr)) ** (1.0 / shape)
    if np.isscalar(u) or np.ndim(u) == 0:
        return float(out)
    return out


def weibull_loglik(samples, shape: float, scale: float) -> float:
    x = _as_samples(samples, 1)
    _check_weibull_params(shape, scale)
    if np.any(x <= 0):
        raise ValueError("samples must be > 0")
    logs = np.log(x)
    z = np.exp(shape * (logs - math.log(scale)))
    n = x.size
    return float(
        n * math.log(shape)
        - n * shape * math.log(scale)
        + (shape - 1.0) * logs.sum()
        - z.sum()
    )


def weibull_loglik_grad(samples, shape: float, scale: float):
    """Analytic (d/dshape, d/dscale) of the Weibull log-likelihood."""
    x = _as_samples(samples, 1)
    _check_weibull_params(shape, scale)
    if np.any(x <= 0):
        raise ValueError("samples must be > 0")
    logs = np.log(x)
    log_scale = math.log(scale)
    z = np.exp(shape * (logs - log_scale))
    n = x.size
    d_shape = n / shape - n * log_scale + logs.sum() - float(z @ (logs - log_scale))
    d_scale = (shape / scale) * (float(z.sum()) - n)
    return d_shape, d_scale


def _profile_residual(a: float, logs: np.ndarray, mean_log: float):
    """Residual g(a) of the shape profile equation and its derivative.

    g(a) = 1/a + mean(log x) - weighted_mean(log x), weights prop. x^a.
    g is strictly decreasing, so the root (when bracketed) is unique.
    """
    z = a * logs
    m = float(z.max())
    w = np.exp(z - m)
    total = float(w.sum())
    wl = float(w @ logs) / total
    wl2 = float(w @ (logs * logs)) / total
    g = 1.0 / a + mean_log - wl
    g_prime = -1.0 / (a * a) - (wl2 - wl * wl)
    return g, g_prime


def fit_weibull(samples) -> FittedDistribution:
    """Maximum-likelihood Weibull fit.

    The shape solves the 1-D profile equation by Newton iteration with a
    bisection fallback on [1e-3, 1e3]; the scale follows in closed form.
    Zero samples are shifted to the smallest positive float and counted in
    the flags (the shape<1 likelihood diverges at zero).
    """
    x = _as_samples(samples, 10)
    if np.any(x < 0):
        raise ValueError("samples must be >= 0")
    zero_count = int(np.count_nonzero(x == 0.0))
    if zero_count:
        x = np.where(x == 0.0, math.ulp(0.0), x)

    logs = np.log(x)
    mean_log = float(logs.mean())
    lo, hi = _PROFILE_BRACKET
    g_lo, _ = _profile_residual(lo, logs, mean_log)
    g_hi, _ = _profile_residual(hi, logs, mean_log)
    if not (g_lo > 0.0 > g_hi):
        raise FitError(
            "no sign change of the shape profile equation on "
            f"[{lo}, {hi}] (residuals {g_lo:.3g}, {g_hi:.3g}); "
            "data may be constant or otherwise pathological"
        )

    a = 1.0
    polish = 0
    for _ in range(200):
        g, g_prime = _profile_residual(a, logs, mean_log)
        if g > 0.0:
            lo = a
        else:
            hi = a
        step = a - g / g_prime
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        converged = abs(g) <= _PROFILE_TOL
        if converged:
            polish += 1
        moved = abs(step - a)
        a = step
        # two extra Newton steps after hitting tolerance tighten the root to
        # machine precision, which keeps the fit scale-equivariant
        if (converged and polish > 2) or moved <= 1e-15 * a:
            break
    g, _ = _profile_residual(a, logs, mean_log)
    if abs(g) > _PROFILE_TOL:
        raise FitError(f"profile equation did not converge (residual {g:.3g})")

    z = a * logs
    m = float(z.max())
    log_mean_pow = m + math.log(float(np.exp(z - m).sum()) / x.size)
    scale = math.exp(log_mean_pow / a)

    flags = (f"{ZERO_SHIFT_FLAG}:{zero_count}",) if zero_count else ()
    d = ks_statistic(x, lambda v: weibull_cdf(v, a, scale))
    return FittedDistribution(
        kind=DistKind.WEIBULL,
        params={"shape": float(a), "scale": float(scale)},
        sample_count=int(x.size),
        ks_statistic=d,
        flags=flags,
    )


def fit_zipf(values) -> FittedDistribution:
    """Rank-value power-law fit: sort values descending, regress log(value)
    on log(rank); the exponent is the negated slope. R-squared of the
    log-log fit is the goodness measure."""
    v = _as_samples(values, 10, name="values")
    if np.any(v <= 0):
        raise ValueError("values must be > 0")
    n = v.size
    if float(v.max()) == float(v.min()):
        return FittedDistribution(
            kind=DistKind.ZIPF,
            params={"exponent": 0.0, "support_size": float(n)},
            sample_count=int(n),
            r_squared=0.0,
            flags=(DEGENERATE_FLAG,),
        )
    log_rank = np.log(np.arange(1, n + 1, dtype=np.float64))
    log_val = np.log(np.sort(v)[::-1])
    xc = log_rank - log_rank.mean()
    yc = log_val - log_val.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    sxy = float(xc @ yc)
    slope = sxy / sxx
    r_squared = (sxy * sxy) / (sxx * syy)
    return FittedDistribution(
        kind=DistKind.ZIPF,
        params={"exponent": float(-slope), "support_size": float(n)},
        sample_count=int(n),
        r_squared=float(r_squared),
    )


_MIN_TAIL = 10


def fit_pareto_tail(samples) -> FittedDistribution:
    """Heavy-tail fit: for every distinct value in the upper half of the
    sample, treat it as the tail threshold, estimate the exponent with the
    Hill estimator over the strictly greater samples, and keep the
    threshold minimizing the KS distance between the empirical tail and
    the fitted Pareto. Exponents outside (0, 2] are flagged, not clamped."""
    x = _as_samples(samples, 50)
    if np.any(x <= 0):
        raise ValueError("samples must be > 0")
    xs = np.sort(x)
    n = xs.size
    logs = np.log(xs)
    suffix = np.zeros(n + 1, dtype=np.float64)
    suffix[:n] = np.cumsum(logs[::-1])[::-1]

    start = n // 2
    last = n - 1 - _MIN_TAIL  # ensures >= _MIN_TAIL strictly greater samples
    if last < start:
        raise FitError("too few samples above any candidate threshold")
    js = np.arange(start, last + 1)
    distinct = xs[js] != xs[js + 1]
    cand = js[distinct]
    if cand.size == 0:
        raise FitError(
            f"fewer than {_MIN_TAIL} tail samples above every distinct "
            "upper-half threshold"
        )

    alphas, ks = kernels.pareto_ks_scan(logs, suffix, cand.astype(np.int64))
    best = int(np.argmin(ks))
    alpha = float(alphas[best])
    xmin = float(xs[cand[best]])
    flags = () if 0.0 < alpha <= 2.0 else (ALPHA_RANGE_FLAG,)
    return FittedDistribution(
        kind=DistKind.PARETO_TAIL,
        params={"alpha": alpha, "xmin": xmin},
        sample_count=int(n),
        ks_statistic=float(ks[best]),
        flags=flags,
    )


def ks_statistic(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance between the sample and a reference CDF:
    max over sorted samples of max(|i/n - F(x_i)|, |(i-1)/n - F(x_i)|)."""
    xs = np.sort(_as_samples(samples, 1))
    n = xs.size
    try:
        f = np.asarray(cdf(xs), dtype=np.float64)
        if f.shape != xs.shape:
            raise TypeError
    except (TypeError, ValueError):
        f = np.array([float(cdf(v)) for v in xs], dtype=np.float64)
    if np.any(f < 0.0) or np.any(f > 1.0) or not np.isfinite(f).all():
        raise ContractError("reference cdf returned values outside [0, 1]")
    steps = np.arange(1, n + 1, dtype=np.float64) / n
    d = max(float(np.max(np.abs(steps - f))), float(np.max(np.abs(steps - 1.0 / n - f))))
    return d


@dataclass(frozen=True)
class TailSummary:
    mean: float
    median: float
    p90: float
    p99: float
    max: float
    mean_median_ratio: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "p90": self.p90,
            "p99": self.p99,
            "max": self.max,
            "mean_median_ratio": self.mean_median_ratio,
        }


def tail_skewness_report(samples) -> TailSummary:
    """Location/percentile summary; a mean well above the median is the
    working signature of a right-skewed, heavy-tailed sample."""
    x = _as_samples(samples, 1)
    mean = float(x.mean())
    median = float(np.median(x))
    if median != 0.0:
        ratio = mean / median
    else:
        ratio = math.inf if mean > 0 else math.nan
    return TailSummary(
        mean=mean,
        median=median,
        p90=float(np.percentile(x, 90)),
        p99=float(np.percentile(x, 99)),
        max=float(x.max()),
        mean_median_ratio=ratio,
    )
