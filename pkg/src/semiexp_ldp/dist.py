"""Weibull-like base law with exact tail, exact samplers, and tilted tables.

The raw variable ``X_raw`` is nonnegative with survival function

    P(X_raw >= x) = exp(-q * x**(1 - epsilon)),   x >= 0,

i.e. a Weibull law with shape ``k = 1 - epsilon`` and scale ``q**(-1/k)``.
All downstream computations work with the centered variable
``Y = X_raw - mu`` (mean zero, variance ``sigma2``, support ``[-mu, inf)``).

Samplers are driven by caller-supplied uniforms, so reproducibility is
entirely in the caller's hands.  The tilted/truncated law

    density(y)  proportional to  exp(lam * y) * f_Y(y) * 1{y < cutoff}

is materialized as an inverse-CDF table (:class:`TiltedTruncatedTable`)
with monotone cubic interpolation between equiprobable knots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError

__all__ = [
    "WeibullLikeSpec",
    "TiltedTruncatedTable",
    "log_survival_raw",
    "log_survival_centered",
    "moments",
    "sample_raw",
    "sample_conditional",
    "truncated_log_mgf",
    "build_tilted_table",
    "sample_tilted",
]

# Above this epsilon the Gamma arguments exceed ~40 and the moment formulas
# start losing relative accuracy; reject rather than return garbage.
MAX_EPSILON = 0.95


@dataclass(frozen=True)
class WeibullLikeSpec:
    """Parameters of the law, with derived Weibull shape/scale and moments.

    Fields
    ------
    q, epsilon : tail parameters, log P(X_raw >= x) = -q * x**(1-epsilon)
    shape, scale : Weibull shape k = 1-epsilon and scale q**(-1/k)
    mu, sigma2 : mean and variance of the raw variable
    gamma_order : order gamma of the absolute centered moment rho = E|Y|^(2+gamma)
    """

    q: float
    epsilon: float
    shape: float
    scale: float
    mu: float
    sigma2: float
    gamma_order: float = 1.0

    @classmethod
    def from_tail(cls, q: float, epsilon: float, gamma_order: float = 1.0,
                  max_epsilon: float = MAX_EPSILON) -> "WeibullLikeSpec":
        """Build a spec from (q, epsilon), deriving shape, scale and moments."""
        if not (q > 0.0):
            raise DomainError(f"q must be positive, got {q}")
        if not (0.0 < epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
        if epsilon > max_epsilon:
            raise DomainError(
                f"epsilon={epsilon} exceeds {max_epsilon}: Gamma moment "
                "evaluation is unreliable this close to 1")
        if not (0.0 < gamma_order <= 1.0):
            raise DomainError(f"gamma_order must lie in (0, 1], got {gamma_order}")
        shape = 1.0 - epsilon
        scale = q ** (-1.0 / shape)
        g1 = math.gamma(1.0 + 1.0 / shape)
        g2 = math.gamma(1.0 + 2.0 / shape)
        mu = scale * g1
        sigma2 = scale * scale * (g2 - g1 * g1)
        return cls(q=float(q), epsilon=float(epsilon), shape=shape, scale=scale,
                   mu=mu, sigma2=sigma2, gamma_order=float(gamma_order))


def _maybe_scalar(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def log_survival_raw(spec: WeibullLikeSpec, x):
    """log P(X_raw >= x) = -q * x**(1-epsilon), exact for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("log_survival_raw requires x >= 0")
    return _maybe_scalar(-spec.q * x ** spec.shape)


def log_survival_centered(spec: WeibullLikeSpec, y):
    """log P(Y >= y) for the centered variable; 0 at and below the left endpoint."""
    y = np.asarray(y, dtype=float)
    shifted = np.maximum(y + spec.mu, 0.0)
    return _maybe_scalar(-spec.q * shifted ** spec.shape)


def _density_exponent_raw(spec: WeibullLikeSpec, u):
    """x(u) for the substitution u = q * x**shape mapping X_raw to Exp(1)."""
    return (u / spec.q) ** (1.0 / spec.shape)


def _quad_checked(fn, a, b, epsrel, what: str, points=None):
    kwargs = {"epsabs": 0.0, "epsrel": epsrel, "limit": 300, "full_output": 1}
    if points is not None and np.isfinite(b):
        kwargs["points"] = points
    out = quad(fn, a, b, **kwargs)
    value, abserr = out[0], out[1]
    if len(out) > 3:  # quadpack appended an error message
        raise NumericError(f"quadrature failed for {what}: {out[3]}")
    if abserr > max(epsrel * abs(value), 1e-300) * 10.0 and abs(value) > 0.0:
        raise NumericError(
            f"quadrature for {what} did not reach tolerance "
            f"(value={value!r}, abserr={abserr!r})")
    return value


@lru_cache(maxsize=64)
def _rho(spec: WeibullLikeSpec) -> float:
    """E|Y|^(2+gamma) by adaptive quadrature after the exponential substitution."""
    p = 2.0 + spec.gamma_order
    mu = spec.mu

    def integrand(u):
        return abs(_density_exponent_raw(spec, u) - mu) ** p * math.exp(-u)

    kink = spec.q * mu ** spec.shape  # x(u) = mu, where |.| is not smooth
    left = _quad_checked(integrand, 0.0, kink, 1e-9, "rho (left)")
    right = _quad_checked(integrand, kink, np.inf, 1e-9, "rho (right)")
    return left + right


def moments(spec: WeibullLikeSpec):
    """Return (mu, sigma2, rho) with rho = E|Y|^(2+gamma_order)."""
    return spec.mu, spec.sigma2, _rho(spec)


def sample_raw(spec: WeibullLikeSpec, u):
    """Map a survival level u in (0, 1] to X_raw by inverting the tail.

    For U uniform on (0, 1] the output is distributed as X_raw.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u > 1.0):
        raise DomainError("sample_raw requires u in (0, 1]")
    return _maybe_scalar((-np.log(u) / spec.q) ** (1.0 / spec.shape))


def sample_conditional(spec: WeibullLikeSpec, a, u):
    """Sample X_raw conditioned on X_raw >= a, via the exact conditional tail.

    Output is (a**shape + (-log u)/q)**(1/shape) >= a, exact for u in (0, 1].
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0.0):
        raise DomainError("sample_conditional requires a >= 0")
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u > 1.0):
        raise DomainError("sample_conditional requires u in (0, 1]")
    return _maybe_scalar((a ** spec.shape - np.log(u) / spec.q) ** (1.0 / spec.shape))


def truncated_log_mgf(spec: WeibullLikeSpec, c: float, lam: float) -> float:
    """log E[exp(lam * Y) 1{Y < c}], stabilized against overflow.

    Uses the substitution u = q * (y + mu)**shape, under which the raw law is
    Exp(1); the integrand exponent g(u) = lam * x(u) - u is convex, so its
    maximum over [0, B] sits at an endpoint and can be factored out exactly.
    """
    if lam < 0.0:
        raise DomainError("truncated_log_mgf requires lam >= 0")
    if not (c > -spec.mu):
        raise DomainError("cutoff must exceed the left endpoint -mu")
    b = c + spec.mu
    big = spec.q * b ** spec.shape
    inv_shape = 1.0 / spec.shape
    q = spec.q
    g_max = max(0.0, lam * b - big)

    def integrand(u):
        return math.exp(lam * (u / q) ** inv_shape - u - g_max)

    value = _quad_checked(integrand, 0.0, big, 1e-12, "truncated_log_mgf")
    if value <= 0.0:
        raise NumericError("truncated_log_mgf integrand underflowed to zero")
    return -lam * spec.mu + g_max + math.log(value)


@dataclass
class TiltedTruncatedTable:
    """Inverse-CDF table for the tilted law exp(lam*y) f_Y(y) 1{y < cutoff} / Z.

    ``ys``/``cum`` are the grid of (y, cumulative probability) knots with
    ``cum`` strictly increasing from 0 to 1; ``log_normalizer`` is
    log E[exp(lam*Y) 1{Y < cutoff}].  Immutable after construction.
    """

    cutoff: float
    lam: float
    log_normalizer: float
    ys: np.ndarray
    cum: np.ndarray
    quadrature_tolerance: float
    _ppf: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        self.ys.setflags(write=False)
        self.cum.setflags(write=False)
        self._ppf = PchipInterpolator(self.cum, self.ys)

    @property
    def grid(self):
        """The (y, cumulative probability) pairs, as stored."""
        return list(zip(self.ys.tolist(), self.cum.tolist()))


def build_tilted_table(spec: WeibullLikeSpec, c: float, lam: float,
                       grid_points: int = 1024,
                       quadrature_tolerance: float = 1e-8) -> TiltedTruncatedTable:
    """Tabulate the CDF of the tilted truncated law on equiprobable knots.

    The cumulative mass is accumulated on a fine grid in the exponential
    substitution variable (where the untilted density is bounded), then
    inverted at grid_points equally spaced probability levels.
    """
    if grid_points < 64:
        raise DomainError("grid_points must be at least 64")
    log_z = truncated_log_mgf(spec, c, lam)

    q, inv_shape, mu = spec.q, 1.0 / spec.shape, spec.mu
    big = q * (c + mu) ** spec.shape
    n_fine = max(65536, 32 * grid_points)
    u = np.linspace(0.0, big, n_fine + 1)
    h = lam * (u / q) ** inv_shape - u
    h -= h.max()
    w = np.exp(np.maximum(h, -700.0))
    cum = cumulative_trapezoid(w, u, initial=0.0)
    if cum[-1] <= 0.0 or not np.all(np.diff(cum) > 0.0):
        raise NumericError("tilted table mass accumulation degenerated")
    cum /= cum[-1]

    p = np.linspace(0.0, 1.0, grid_points)
    uq = np.interp(p, cum, u)
    ys = (uq / q) ** inv_shape - mu
    ys[0] = -mu
    ys[-1] = c
    if not np.all(np.diff(ys) > 0.0):
        raise NumericError("tilted table quantile grid is not strictly increasing")
    return TiltedTruncatedTable(cutoff=float(c), lam=float(lam),
                                log_normalizer=log_z, ys=ys, cum=p,
                                quadrature_tolerance=quadrature_tolerance)


def sample_tilted(table: TiltedTruncatedTable, u):
    """Inverse-CDF sample from the table; exact at knots, monotone in between."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise DomainError("sample_tilted requires u in [0, 1)")
    return _maybe_scalar(table._ppf(u))
