"""Desk-scale checks of the limit theorems and the analytic bounds.

Sweeps run an estimator along an increasing n-list with x_n = c * n**alpha,
normalize the log-probability by the speed of the regime ((n/x_n^2) for the
Gaussian range and the transition, x_n**-(1-epsilon) in the maximal jump
range), and report how the normalized values move relative to the
theoretical limit.  Only trends are classified; no extrapolation is done,
since the limits are asymptotic and convergence is logarithmically slow.

The bound evaluators restore the tail coefficient q that the source
normalizes away; their validity threshold n(delta) is not constructive, so
callers declare applicable_from_n themselves (checks below it are
heuristic).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from . import simulate
from .errors import DomainError
from .rate import Regime, RegimeSpec
from .simulate import EstimateRecord, Method, SimulationConfig

__all__ = [
    "Trend",
    "SweepRow",
    "SweepResult",
    "BoundParams",
    "bound_small",
    "bound_medium",
    "sweep",
    "check_pi0_limit",
    "check_interpolation",
]


class Trend(enum.Enum):
    FROM_ABOVE = "ApproachingFromAbove"
    FROM_BELOW = "ApproachingFromBelow"
    NON_MONOTONE = "NonMonotone"


@dataclass(frozen=True)
class BoundParams:
    """delta in (0,1) plus the caller-declared n from which the bound is trusted."""

    delta: float
    applicable_from_n: int = 1000

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.applicable_from_n < 1:
            raise DomainError("applicable_from_n must be positive")


def bound_small(params: BoundParams, n: int, u: float, sigma2: float) -> float:
    """-(1-delta) u^2 / (2 n sigma2): ceiling on log P(S_m >= u, all below cutoff)."""
    if u < 0.0:
        raise DomainError("bound_small requires u >= 0")
    return -(1.0 - params.delta) * u * u / (2.0 * n * sigma2)


def bound_medium(params: BoundParams, q: float, epsilon: float, m: int,
                 u: float, xn: float) -> float:
    """Ceiling on log P(S_m >= u, all summands above the cutoff xn**epsilon).

    Equals -(1-delta) q (u^(1-eps) + m (1 - 2^-eps) xn^(eps(1-eps))); the
    lemma behind it requires m >= 2 and 0 <= u <= xn.
    """
    if m < 2:
        raise DomainError("bound_medium requires m >= 2")
    if not (0.0 <= u <= xn):
        raise DomainError(f"bound_medium requires 0 <= u <= xn, got u={u}")
    return -(1.0 - params.delta) * q * (
        u ** (1.0 - epsilon)
        + m * (1.0 - 2.0 ** (-epsilon)) * xn ** (epsilon * (1.0 - epsilon)))


@dataclass(frozen=True)
class SweepRow:
    n: int
    x_n: float
    log_p_hat: float
    std_err_log: float
    normalized: float
    feasible: bool = True


@dataclass(frozen=True)
class SweepResult:
    regime: RegimeSpec
    rows: tuple[SweepRow, ...]
    theory_limit: float
    trend: Trend


def _normalize(regime: RegimeSpec, n: int, x_n: float, log_p: float) -> float:
    if regime.regime is Regime.MAX_JUMP:
        return log_p / x_n ** (1.0 - regime.epsilon)
    return log_p * n / (x_n * x_n)


def _classify_trend(rows, limit: float) -> Trend:
    gaps = [abs(r.normalized - limit) for r in rows if r.feasible][-3:]
    signs = [r.normalized - limit for r in rows if r.feasible][-3:]
    if len(gaps) < 3:
        return Trend.NON_MONOTONE
    if gaps[0] > gaps[1] > gaps[2] and (all(s > 0 for s in signs)
                                        or all(s < 0 for s in signs)):
        return Trend.FROM_ABOVE if signs[-1] > 0 else Trend.FROM_BELOW
    return Trend.NON_MONOTONE


def _row_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence((seed & (2 ** 64 - 1), 0x5EED, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _estimate_row(config: SimulationConfig, regime: RegimeSpec,
                  estimator: str, threads: int) -> EstimateRecord:
    if estimator == "naive":
        return simulate.estimate_naive(config, threads=threads)
    if estimator == "decomposition":
        return simulate.estimate_decomposition(config, threads=threads)
    if estimator == "exact_max":
        p_max, _ = simulate.max_jump_exact(config.spec, config.n, config.x)
        log_p = math.log(p_max) if p_max > 0.0 else -math.inf
        return EstimateRecord(
            method=Method.EXACT_MAX, n=config.n, x=config.x, log_p_hat=log_p,
            std_err_log=0.0, num_samples=0, seed=config.seed)
    raise DomainError(f"unknown estimator {estimator!r}")


def sweep(config_base: SimulationConfig, regime: RegimeSpec, n_list,
          estimator: str = "decomposition", threads: int = 1) -> SweepResult:
    """One estimate per n with x_n = c * n**alpha, normalized by the regime speed."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("n_list must be strictly increasing")
    if abs(config_base.spec.epsilon - regime.epsilon) > 1e-12:
        raise DomainError("regime.epsilon does not match the sampling law")
    rows = []
    for idx, n in enumerate(n_list):
        x_n = regime.c * n ** regime.alpha
        config = replace(config_base, n=int(n), x=float(x_n), cutoff=None,
                         seed=_row_seed(config_base.seed, idx))
        rec = _estimate_row(config, regime, estimator, threads)
        feasible = np.isfinite(rec.log_p_hat)
        rows.append(SweepRow(
            n=int(n), x_n=float(x_n), log_p_hat=rec.log_p_hat,
            std_err_log=rec.std_err_log,
            normalized=_normalize(regime, n, x_n, rec.log_p_hat),
            feasible=bool(feasible)))
    rows = tuple(rows)
    return SweepResult(regime=regime, rows=rows, theory_limit=regime.limit,
                       trend=_classify_trend(rows, regime.limit))


def check_pi0_limit(spec, C: float, t: float, n_list, num_samples: int,
                    seed: int, threads: int = 1) -> SweepResult:
    """Sweep of the no-jump term at threshold t * x_n against -t^2/(2 sigma2).

    The cutoff stays at x_n**epsilon (x_n = C n^(1/(1+epsilon))) while the
    threshold is t * x_n, matching the collective-contribution limit.
    """
    if not (0.0 < t <= 1.0):
        raise DomainError("t must lie in (0, 1]")
    regime = RegimeSpec(alpha=1.0 / (1.0 + spec.epsilon), c=C,
                        epsilon=spec.epsilon, regime=Regime.TRANSITION,
                        speed="x_n^2/n",
                        limit=-t * t / (2.0 * spec.sigma2))
    rows = []
    for idx, n in enumerate(n_list):
        x_n = C * n ** regime.alpha
        config = SimulationConfig(
            spec=spec, n=int(n), x=float(t * x_n), num_samples=num_samples,
            seed=_row_seed(seed, idx), cutoff=x_n ** spec.epsilon - spec.mu)
        rec = simulate.estimate_pi(config, 0, threads=threads)
        rows.append(SweepRow(
            n=int(n), x_n=float(x_n), log_p_hat=rec.log_p_hat,
            std_err_log=rec.std_err_log,
            normalized=rec.log_p_hat * n / (x_n * x_n),
            feasible=bool(np.isfinite(rec.log_p_hat))))
    rows = tuple(rows)
    return SweepResult(regime=regime, rows=rows, theory_limit=regime.limit,
                       trend=_classify_trend(rows, regime.limit))


def check_interpolation(epsilon: float, q: float, sigma2: float, C_list):
    """Tabulate J(C), the Gaussian-branch flag, and C^(1+eps) J(C) vs q."""
    from .rate import critical_constants, rate_transition

    _, c_eps = critical_constants(epsilon, q, sigma2)
    rows = []
    for C in C_list:
        rt = rate_transition(epsilon, q, sigma2, C)
        product = C ** (1.0 + epsilon) * rt.J
        rows.append({
            "C": float(C),
            "J": rt.J,
            "t_star": rt.t_star,
            "gaussian_branch": C <= c_eps,
            "jump_product": product,
            "jump_product_gap": abs(product - q),
        })
    return rows
