"""Rate functions for sums at the Gaussian/transition/maximal-jump scales.

At the transition scale ``x_n = C * n**(1/(1+epsilon))`` the normalized
log-probability converges to ``-J(C)`` where

    J(C) = min over t in [0, 1] of
           f(t) = q (1-t)**(1-epsilon) / C**(1+epsilon) + t**2 / (2 sigma2).

The minimizing ``t`` is the share of the deviation carried collectively;
``1 - t`` is carried by one large summand.  Below a critical constant
``C_eps`` the minimum sits at t = 1 and J = 1/(2 sigma2) (the Gaussian
value); above it an interior minimizer t(C) takes over, solving
``t (1-t)**epsilon = (1-epsilon) q sigma2 / C**(1+epsilon)``.

The module also provides the numerical one-sided Legendre transform and a
grid inf-convolution, used to cross-check J(C) against its variational
construction.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvexityWarning, DomainError, NumericError

__all__ = [
    "Branch",
    "Regime",
    "TransitionRate",
    "RegimeSpec",
    "RateGrid",
    "critical_constants",
    "solve_t",
    "rate_transition",
    "classify_regime",
    "legendre",
    "inf_convolution",
    "jump_rate_grid",
    "gaussian_rate_grid",
]


class Branch(enum.Enum):
    BELOW_CRITICAL = "BelowCritical"
    ABOVE_CRITICAL = "AboveCritical"


class Regime(enum.Enum):
    GAUSSIAN = "Gaussian"
    TRANSITION = "Transition"
    MAX_JUMP = "MaxJump"


@dataclass(frozen=True)
class TransitionRate:
    """J(C) together with the minimizer and the branch that produced it."""

    C: float
    t_star: float
    J: float
    branch: Branch


@dataclass(frozen=True)
class RegimeSpec:
    """Classification of the sequence x_n = c * n**alpha and its limit."""

    alpha: float
    c: float
    epsilon: float
    regime: Regime
    speed: str
    limit: float


def _check_params(epsilon: float, q: float, sigma2: float):
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not (q > 0.0):
        raise DomainError(f"q must be positive, got {q}")
    if not (sigma2 > 0.0):
        raise DomainError(f"sigma2 must be positive, got {sigma2}")


def critical_constants(epsilon: float, q: float, sigma2: float):
    """Return (c_prime, c_eps).

    c_prime = (1+eps) * ((1-eps) q sigma2 eps**(-eps))**(1/(1+eps)) is where
    the interior local minimum of f appears; c_eps = (1+eps) *
    (q sigma2 (2 eps)**(-eps))**(1/(1+eps)) is where it becomes global.
    """
    _check_params(epsilon, q, sigma2)
    e = epsilon
    c_prime = (1.0 + e) * ((1.0 - e) * q * sigma2 * e ** (-e)) ** (1.0 / (1.0 + e))
    c_eps = (1.0 + e) * (q * sigma2 * (2.0 * e) ** (-e)) ** (1.0 / (1.0 + e))
    return c_prime, c_eps


def _f(t, epsilon, q, sigma2, C):
    return q * (1.0 - t) ** (1.0 - epsilon) / C ** (1.0 + epsilon) \
        + t * t / (2.0 * sigma2)


def solve_t(epsilon: float, q: float, sigma2: float, C: float) -> float:
    """Smallest root in [0, 1] of f'(t) = 0, by bisection.

    The root equation is t (1-t)**eps = (1-eps) q sigma2 / C**(1+eps); the
    left side increases on [0, 1/(1+eps)], which brackets the smallest root.
    Only defined for C > c_prime.
    """
    _check_params(epsilon, q, sigma2)
    c_prime, _ = critical_constants(epsilon, q, sigma2)
    if not (C > c_prime):
        raise DomainError(
            f"C={C} <= c_prime={c_prime}: f has no interior local minimum")
    rhs = (1.0 - epsilon) * q * sigma2 / C ** (1.0 + epsilon)
    lo, hi = 0.0, 1.0 / (1.0 + epsilon)
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if mid * (1.0 - mid) ** epsilon < rhs:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    if abs(t * (1.0 - t) ** epsilon - rhs) > 1e-10:
        raise NumericError("solve_t bisection did not meet the residual target")
    return t


def rate_transition(epsilon: float, q: float, sigma2: float, C: float) -> TransitionRate:
    """Piecewise-explicit J(C); ties at C = c_eps resolve to the flat branch."""
    _check_params(epsilon, q, sigma2)
    if not (C > 0.0):
        raise DomainError(f"C must be positive, got {C}")
    _, c_eps = critical_constants(epsilon, q, sigma2)
    if C <= c_eps:
        return TransitionRate(C=C, t_star=1.0, J=1.0 / (2.0 * sigma2),
                              branch=Branch.BELOW_CRITICAL)
    t = solve_t(epsilon, q, sigma2, C)
    return TransitionRate(C=C, t_star=t, J=_f(t, epsilon, q, sigma2, C),
                          branch=Branch.ABOVE_CRITICAL)


SPEED_GAUSSIAN = "x_n^2/n"
SPEED_MAX_JUMP = "x_n^(1-epsilon)"

# alpha values this close to 1/(1+epsilon) count as the transition exponent.
_ALPHA_TOL = 1e-12


def classify_regime(alpha: float, c: float, epsilon: float, q: float,
                    sigma2: float) -> RegimeSpec:
    """Assign x_n = c * n**alpha to its deviation regime and limit value."""
    _check_params(epsilon, q, sigma2)
    if not (c > 0.0):
        raise DomainError(f"c must be positive, got {c}")
    if not (alpha > 0.5):
        raise DomainError(
            f"alpha={alpha} <= 1/2 is the central-limit scale, out of scope")
    boundary = 1.0 / (1.0 + epsilon)
    if abs(alpha - boundary) <= _ALPHA_TOL:
        rt = rate_transition(epsilon, q, sigma2, c)
        return RegimeSpec(alpha=alpha, c=c, epsilon=epsilon,
                          regime=Regime.TRANSITION, speed=SPEED_GAUSSIAN,
                          limit=-rt.J)
    if alpha < boundary:
        return RegimeSpec(alpha=alpha, c=c, epsilon=epsilon,
                          regime=Regime.GAUSSIAN, speed=SPEED_GAUSSIAN,
                          limit=-1.0 / (2.0 * sigma2))
    return RegimeSpec(alpha=alpha, c=c, epsilon=epsilon, regime=Regime.MAX_JUMP,
                      speed=SPEED_MAX_JUMP, limit=-q)


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def legendre(lambda_max: float, Lambda, t: float, tol: float = 1e-10,
             max_doublings: int = 20) -> float:
    """sup over lam >= 0 of lam * t - Lambda(lam), by golden-section search.

    Lambda must satisfy Lambda(0) = 0 and be convex nondecreasing; both are
    checked on a sample grid and violations raise a ConvexityWarning (the
    search still runs, but its result is then only a lower bound on the sup).
    The search interval [0, lambda_max] doubles, up to max_doublings times,
    whenever the maximizer lands on its right edge.
    """
    if not (lambda_max > 0.0):
        raise DomainError("lambda_max must be positive")
    lam0 = float(Lambda(0.0))
    if abs(lam0) > 1e-9:
        raise DomainError(f"Lambda(0) must vanish, got {lam0}")
    probe = np.linspace(0.0, lambda_max, 33)
    vals = np.array([float(Lambda(l)) for l in probe])
    scale = max(1.0, np.abs(vals).max())
    if np.any(np.diff(vals) < -1e-9 * scale) or \
            np.any(np.diff(vals, 2) < -1e-9 * scale):
        warnings.warn("Lambda failed the sampled convex/nondecreasing check",
                      ConvexityWarning, stacklevel=2)

    def phi(lam):
        return lam * t - float(Lambda(lam))

    hi = lambda_max
    for _ in range(max_doublings + 1):
        a, b = 0.0, hi
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc, fd = phi(c), phi(d)
        best_lam, best_val = (c, fc) if fc >= fd else (d, fd)
        while b - a > tol:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _GOLDEN * (b - a)
                fc = phi(c)
            else:
                a, c, fc = c, d, fd
                d = a + _GOLDEN * (b - a)
                fd = phi(d)
            if fc >= fd and fc > best_val:
                best_lam, best_val = c, fc
            elif fd > fc and fd > best_val:
                best_lam, best_val = d, fd
        if best_lam < hi - 10.0 * tol or hi > 1e300:
            break
        hi *= 2.0
    else:
        warnings.warn("legendre maximizer still at the search boundary after "
                      f"{max_doublings} doublings", ConvexityWarning,
                      stacklevel=2)
    return max(best_val, phi(0.0), phi(hi)) + 0.0


@dataclass(frozen=True)
class RateGrid:
    """Rate function sampled on a uniform grid; +inf marks infinite sections."""

    t_min: float
    t_max: float
    values: np.ndarray
    step: float

    @classmethod
    def from_function(cls, fn, t_min: float, t_max: float,
                      n_points: int) -> "RateGrid":
        if n_points < 2 or not (t_max > t_min):
            raise DomainError("need t_max > t_min and at least two grid points")
        ts = np.linspace(t_min, t_max, n_points)
        values = np.asarray(fn(ts), dtype=float)
        if np.any(values < 0.0):
            raise DomainError("rate values must be nonnegative")
        return cls(t_min=float(t_min), t_max=float(t_max), values=values,
                   step=float(ts[1] - ts[0]))

    def grid(self) -> np.ndarray:
        return self.t_min + self.step * np.arange(len(self.values))

    def is_nondecreasing(self) -> bool:
        finite = self.values[np.isfinite(self.values)]
        return bool(np.all(np.diff(self.values) >= -1e-12)) if finite.size else True

    def value_at(self, b):
        """Linear interpolation; +inf outside the grid or next to an inf knot."""
        b = np.asarray(b, dtype=float)
        out = np.full(b.shape, np.inf)
        inside = (b >= self.t_min) & (b <= self.t_max)
        if np.any(inside):
            pos = (b[inside] - self.t_min) / self.step
            idx = np.clip(np.floor(pos).astype(int), 0, len(self.values) - 2)
            frac = pos - idx
            v0 = self.values[idx]
            v1 = self.values[idx + 1]
            with np.errstate(invalid="ignore"):
                interp = v0 + frac * (v1 - v0)
            interp = np.where(np.isfinite(v0) & np.isfinite(v1), interp, np.inf)
            # a knot hit exactly is exact even if a neighbour is infinite
            exact0 = frac == 0.0
            interp = np.where(exact0, v0, interp)
            out[inside] = interp
        return out


def inf_convolution(I1: RateGrid, I2: RateGrid, t: float) -> float:
    """min over a on I1's grid of I1(a) + I2(t - a), with I2 interpolated.

    Returns +inf when every decomposition hits an infinite section.  The
    discretization error is bounded by step times a local Lipschitz bound
    of the summands near the minimizer.
    """
    a = I1.grid()
    finite1 = np.isfinite(I1.values)
    if not np.any(finite1):
        return float("inf")
    total = I1.values[finite1] + I2.value_at(t - a[finite1])
    best = total.min()
    return float(best)


def jump_rate_grid(epsilon: float, q: float, C: float, t_min: float,
                   t_max: float, n_points: int) -> RateGrid:
    """Rate of the one-jump coordinate: 0 below 0, q a^(1-eps)/C^(1+eps) on [0,1], inf above."""
    _check_params(epsilon, q, 1.0)
    factor = q / C ** (1.0 + epsilon)

    def fn(a):
        a = np.asarray(a, dtype=float)
        out = np.where(a < 0.0, 0.0,
                       factor * np.clip(a, 0.0, None) ** (1.0 - epsilon))
        return np.where(a > 1.0, np.inf, out)

    return RateGrid.from_function(fn, t_min, t_max, n_points)


def gaussian_rate_grid(sigma2: float, t_min: float, t_max: float,
                       n_points: int) -> RateGrid:
    """Rate of the collective coordinate: b^2/(2 sigma2) for b > 0, else 0."""
    if not (sigma2 > 0.0):
        raise DomainError("sigma2 must be positive")

    def fn(b):
        b = np.asarray(b, dtype=float)
        return np.where(b > 0.0, b * b / (2.0 * sigma2), 0.0)

    return RateGrid.from_function(fn, t_min, t_max, n_points)
