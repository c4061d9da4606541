"""Maximum predictability from entropy via Fano's equality.

Given an entropy S (bits) and an alphabet of N states, the highest
achievable next-state accuracy Pi solves

    S = H(Pi) + (1 - Pi) * log2(N - 1)

with H the binary entropy. The right-hand side is strictly decreasing in
Pi on [1/N, 1], so the root is found by bisection. Estimator noise can
push S slightly outside [0, log2 N]; such inputs clamp to the boundary
value and the report is flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from trafficpred.entropy import EntropyReport

_NEGATIVE_TOL = 1e-9
_BISECTION_TOL = 1e-12
_MAX_ITERATIONS = 200


class InvalidStateCount(ValueError):
    """State count must be a positive integer."""


class NegativeEntropyBeyondTolerance(ValueError):
    """Entropy below zero by more than rounding noise."""


@dataclass(frozen=True)
class PredictabilityReport:
    """Fano bounds for the three entropies of one sequence.

    ``clamped`` records that at least one entropy fell outside
    [0, log2 N] and was snapped to the boundary before solving.
    """

    pi_rand: float
    pi_unc: float
    pi_max: float
    n_states: int
    clamped: bool = False


def binary_entropy(p: float) -> float:
    """H(p) in bits; defined as 0 at both endpoints."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def max_predictability(s: float, n: int) -> float:
    """Solve the Fano equality for the accuracy bound Pi in [1/n, 1].

    Exact at the boundaries: s == 0 gives 1, s == log2(n) gives 1/n.
    Inputs outside [0, log2 n] clamp to the nearest boundary (estimated
    entropies can overshoot on short sequences); s more negative than
    rounding noise is an error.
    """
    if n < 1:
        raise InvalidStateCount(f"state count must be >= 1, got {n}")
    if s < -_NEGATIVE_TOL:
        raise NegativeEntropyBeyondTolerance(f"entropy {s} < 0")
    if n == 1 or s <= 0.0:
        return 1.0
    s_max = math.log2(n)
    if s >= s_max:
        return 1.0 / n
    log_nm1 = math.log2(n - 1)
    lo, hi = 1.0 / n, 1.0
    # residual = RHS(pi) - s, strictly decreasing; positive at lo, negative at hi
    for _ in range(_MAX_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) + (1.0 - mid) * log_nm1 - s > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < _BISECTION_TOL:
            break
    return 0.5 * (lo + hi)


def predictability_report(report: EntropyReport) -> PredictabilityReport:
    """Apply the Fano bound to each entropy of a report, sharing its N."""
    n = report.n_states
    s_max = math.log2(n) if n > 1 else 0.0
    clamped = any(
        s < 0.0 or s > s_max for s in (report.s_rand, report.s_unc, report.s_real)
    )
    return PredictabilityReport(
        pi_rand=max_predictability(report.s_rand, n),
        pi_unc=max_predictability(report.s_unc, n),
        pi_max=max_predictability(report.s_real, n),
        n_states=n,
        clamped=clamped,
    )
