"""Augmented Dickey-Fuller screening of daily-traffic series.

The regression is the constant-only specification

    diff(y)_t = alpha + gamma * y_{t-1} + sum_i phi_i * diff(y)_{t-i} + e_t

with the lag order chosen by minimum Akaike criterion up to a ceiling of
12 * (n/100)^(1/4). The lag search scores every candidate on the same
maxlag-trimmed sample so criteria are comparable, then the chosen lag is
refit on the longest sample it allows. The test statistic is the t-ratio
of gamma; p-values come from MacKinnon's (1994) response-surface
approximation for the single-series constant-only case, which reaches
far into the tail (p ~ 1e-22) before clamping to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm


class SeriesTooShort(ValueError):
    """Unit-root testing needs at least a dozen observations."""


class ConstantSeries(ValueError):
    """A constant series has no differenced variation to regress on."""


class SingularRegression(ValueError):
    """The design matrix is rank-deficient or the fit is degenerate."""


class EmptyCollection(ValueError):
    """No results to summarize."""


_MIN_LENGTH = 12
DEFAULT_ALPHAS = (0.05, 0.01)

# MacKinnon (1994) response-surface coefficients, single series, constant only.
_TAU_MAX = 2.74
_TAU_MIN = -18.83
_TAU_STAR = -1.61
_TAU_SMALLP = (2.1659, 1.4412, 3.8269e-2)
_TAU_LARGEP = (1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2)


@dataclass(frozen=True)
class AdfResult:
    """Outcome of one unit-root test.

    ``stationary_at`` maps each conventional significance level to whether
    the unit root is rejected there (p < alpha). ``p_clamped`` marks a
    statistic outside the response surface's validity range, where the
    p-value is pinned to 0 or 1.
    """

    t_statistic: float
    p_value: float
    lags_used: int
    stationary_at: dict[float, bool] = field(default_factory=dict)
    p_clamped: bool = False

    def is_stationary(self, alpha: float) -> bool:
        return self.p_value < alpha


def mackinnon_pvalue(t_statistic: float) -> tuple[float, bool]:
    """Approximate p-value for the constant-only ADF statistic.

    Returns (p, clamped); clamped is True outside [-18.83, 2.74] where the
    surface is not valid and the p-value saturates.
    """
    if t_statistic > _TAU_MAX:
        return 1.0, True
    if t_statistic < _TAU_MIN:
        return 0.0, True
    coefs = _TAU_SMALLP if t_statistic <= _TAU_STAR else _TAU_LARGEP
    z = 0.0
    for power, coef in enumerate(coefs):
        z += coef * t_statistic**power
    return float(norm.cdf(z)), False


def default_max_lag(n: int) -> int:
    """Schwert's rule, floor(12 * (n/100)^(1/4)), capped by sample size."""
    rule = int(math.ceil(12.0 * (n / 100.0) ** 0.25))
    return max(0, min(n // 2 - 2, rule))


def _design(x: np.ndarray, d: np.ndarray, lag: int, trim: int) -> tuple[np.ndarray, np.ndarray]:
    """Regression sample with ``trim`` leading differences dropped.

    Columns: lagged level, then ``lag`` difference lags, then the constant.
    """
    n = len(x)
    y = d[trim:]
    columns = [x[trim : n - 1]]
    for j in range(1, lag + 1):
        columns.append(d[trim - j : n - 1 - j])
    columns.append(np.ones(len(y)))
    return y, np.column_stack(columns)


def _ols(y: np.ndarray, design: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares fit returning (coefficients, ssr); raises on rank loss."""
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise SingularRegression("design matrix is rank-deficient")
    resid = y - design @ beta
    return beta, float(resid @ resid)


def adf_test(
    series: Sequence[float] | np.ndarray,
    max_lag: int | None = None,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
) -> AdfResult:
    """Run the constant-only ADF test with AIC lag selection."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    n = len(x)
    if n < _MIN_LENGTH:
        raise SeriesTooShort(f"need at least {_MIN_LENGTH} observations, got {n}")
    if np.all(x == x[0]):
        raise ConstantSeries("series is constant")
    # demean up front: the constant regressor absorbs the level, so the
    # statistic is unchanged, but the least squares stays well conditioned
    # for series riding on a large offset
    x = x - x.mean()
    if max_lag is None:
        max_lag = default_max_lag(n)
    if max_lag < 0 or max_lag > n // 2 - 2:
        raise ValueError(f"max_lag must be in [0, {n // 2 - 2}], got {max_lag}")
    d = np.diff(x)

    # Lag search on the common maxlag-trimmed sample; ties keep the smaller lag.
    search_nobs = n - 1 - max_lag
    best_lag = 0
    best_aic = math.inf
    for lag in range(max_lag + 1):
        y, design = _design(x, d, lag, trim=max_lag)
        try:
            _, ssr = _ols(y, design)
        except SingularRegression:
            continue
        if ssr <= 0.0:
            continue
        aic = search_nobs * math.log(ssr / search_nobs) + 2 * (lag + 2)
        if aic < best_aic:
            best_aic = aic
            best_lag = lag
    if not math.isfinite(best_aic):
        raise SingularRegression("no lag order produced a usable regression")

    # Refit the chosen lag on the longest sample it allows.
    y, design = _design(x, d, best_lag, trim=best_lag)
    beta, ssr = _ols(y, design)
    nobs, k = design.shape
    if nobs <= k or ssr <= 0.0:
        raise SingularRegression("degenerate fit: no residual degrees of freedom")
    sigma2 = ssr / (nobs - k)
    try:
        xtx_inv = np.linalg.inv(design.T @ design)
    except np.linalg.LinAlgError as exc:
        raise SingularRegression("normal equations are singular") from exc
    stderr = math.sqrt(sigma2 * xtx_inv[0, 0])
    t_stat = float(beta[0] / stderr)

    p_value, clamped = mackinnon_pvalue(t_stat)
    return AdfResult(
        t_statistic=t_stat,
        p_value=p_value,
        lags_used=best_lag,
        stationary_at={alpha: p_value < alpha for alpha in alphas},
        p_clamped=clamped,
    )


def stationary_fraction(results: Iterable[AdfResult], alpha: float) -> float:
    """Fraction of tests rejecting the unit root at the given level."""
    results = list(results)
    if not results:
        raise EmptyCollection("no ADF results supplied")
    hits = sum(1 for r in results if r.p_value < alpha)
    return hits / len(results)
