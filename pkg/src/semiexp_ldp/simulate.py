"""Monte Carlo estimators for P(S_n >= x) and its truncation decomposition.

The decomposition splits the deviation event by how many summands exceed a
cutoff (by default x**epsilon on the raw scale):

    P(S_n >= x) = sum over m of binom(n, m) * Pi_{n,m}(x),
    Pi_{n,m}(x) = P(S_n >= x, first m summands >= cutoff, rest < cutoff).

Each Pi term is estimated by conditional sampling of the jumps (exact tail
weights) and exponentially tilted sampling of the truncated block (exact
importance weights), with all bookkeeping in the log domain.  For m >= 1 a
variance-reduced variant integrates one designated jump analytically using
the exact survival function instead of sampling an indicator.

Randomness: every estimate derives one independent generator per chunk from
(seed, stream, chunk index), so records are bit-for-bit reproducible and
chunks can be mapped to worker threads in any order.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import dist, rate
from .dist import WeibullLikeSpec
from .errors import DomainError

__all__ = [
    "Method",
    "EstimateRecord",
    "SimulationConfig",
    "estimate_naive",
    "estimate_pi",
    "estimate_decomposition",
    "max_jump_exact",
    "largest_term_combine",
]

_SEED_MASK = (1 << 64) - 1
_STREAM_NAIVE = 0
_STREAM_PI_BASE = 100

# Elements per vectorized sampling block; bounds peak memory.
_BLOCK_ELEMS = 1_000_000


class Method(enum.Enum):
    NAIVE = "Naive"
    DECOMPOSITION = "Decomposition"
    PI_TERM = "PiTerm"
    IMPORTANCE_SAMPLING = "ImportanceSampling"
    EXACT_MAX = "ExactMax"


@dataclass(frozen=True)
class EstimateRecord:
    """One Monte Carlo estimate, reproducible from (method, parameters, seed)."""

    method: Method
    n: int
    x: float
    log_p_hat: float
    std_err_log: float
    num_samples: int
    seed: int
    m: int | None = None
    tilt: float | None = None
    cutoff: float | None = None
    zero_hits: bool = False
    log_p_upper: float | None = None
    terms: tuple["EstimateRecord", ...] | None = None
    log_remainder_bound: float | None = None


@dataclass(frozen=True)
class SimulationConfig:
    """Shared inputs of the estimators.

    cutoff is on the centered scale and defaults to x**epsilon - mu, i.e.
    a raw-scale truncation at x**epsilon.  tilt is the tilting parameter
    lambda of the truncated block; None selects u * x / (n * sigma2) with
    u = 1 for the m = 0 term and u = t(C) for terms with jumps.
    """

    spec: WeibullLikeSpec
    n: int
    x: float
    num_samples: int
    seed: int
    cutoff: float | None = None
    chunk_count: int = 8
    tilt: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not (self.x > 0.0):
            raise DomainError(f"x must be positive, got {self.x}")
        if self.num_samples < 1:
            raise DomainError("num_samples must be positive")
        if self.chunk_count < 1:
            raise DomainError("chunk_count must be positive")
        if self.tilt is not None and self.tilt < 0.0:
            raise DomainError("tilt must be nonnegative")
        if self.cutoff is None:
            object.__setattr__(
                self, "cutoff", self.x ** self.spec.epsilon - self.spec.mu)
        if not (-self.spec.mu < self.cutoff < self.x):
            raise DomainError(
                f"cutoff must lie in (-mu, x), got {self.cutoff}")


def _rng_for(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed & _SEED_MASK, stream, chunk)))


def _chunk_sizes(total: int, chunks: int) -> list[int]:
    base, extra = divmod(total, chunks)
    return [base + (1 if i < extra else 0) for i in range(chunks)]


def _run_chunks(worker, sizes, threads: int):
    """Evaluate worker(chunk_idx, size) for every chunk, in chunk order."""
    jobs = [(i, s) for i, s in enumerate(sizes) if s > 0]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda js: worker(*js), jobs))
    return [worker(*js) for js in jobs]


class _LogAccumulator:
    """Streaming log-domain first and second moments of exp(L)."""

    __slots__ = ("max_log", "s1", "s2", "n")

    def __init__(self):
        self.max_log = -math.inf
        self.s1 = 0.0
        self.s2 = 0.0
        self.n = 0

    def add(self, logs: np.ndarray):
        self.n += logs.size
        if logs.size == 0:
            return
        m = float(np.max(logs))
        if m == -math.inf:
            return
        if m > self.max_log:
            r = math.exp(self.max_log - m) if self.max_log > -math.inf else 0.0
            self.s1 *= r
            self.s2 *= r * r
            self.max_log = m
        w = np.exp(logs - self.max_log)
        self.s1 += float(w.sum())
        self.s2 += float((w * w).sum())

    def merge(self, other: "_LogAccumulator"):
        self.n += other.n
        if other.s1 == 0.0:
            return
        if other.max_log > self.max_log:
            r = math.exp(self.max_log - other.max_log) \
                if self.max_log > -math.inf else 0.0
            self.s1 *= r
            self.s2 *= r * r
            self.max_log = other.max_log
        r = math.exp(other.max_log - self.max_log)
        self.s1 += other.s1 * r
        self.s2 += other.s2 * r * r

    @property
    def log_sum(self) -> float:
        return self.max_log + math.log(self.s1) if self.s1 > 0.0 else -math.inf

    def std_err_log(self) -> float:
        """Delta-method standard error of log(mean exp(L))."""
        if self.s1 <= 0.0 or self.n < 2:
            return math.inf
        rel_var = self.n * self.s2 / (self.s1 * self.s1) - 1.0
        return math.sqrt(max(rel_var, 0.0) / self.n)


def _zero_hit_upper(n_samples: int) -> float:
    """log of the one-sided 95% Clopper-Pearson bound for 0 hits."""
    return math.log1p(-0.05 ** (1.0 / n_samples))


def estimate_naive(config: SimulationConfig, threads: int = 1) -> EstimateRecord:
    """Plain Monte Carlo: fraction of i.i.d. sample paths with S_n >= x."""
    if config.num_samples < 1000:
        raise DomainError("naive estimation needs at least 1000 samples")
    spec, n, x = config.spec, config.n, config.x
    block = max(1, _BLOCK_ELEMS // n)

    def worker(chunk_idx: int, size: int) -> int:
        rng = _rng_for(config.seed, _STREAM_NAIVE, chunk_idx)
        hits = 0
        remaining = size
        while remaining:
            b = min(block, remaining)
            remaining -= b
            u = 1.0 - rng.random((b, n))
            s = dist.sample_raw(spec, u).sum(axis=1) - n * spec.mu
            hits += int(np.count_nonzero(s >= x))
        return hits

    hits = sum(_run_chunks(worker, _chunk_sizes(config.num_samples,
                                                config.chunk_count), threads))
    total = config.num_samples
    if hits == 0:
        return EstimateRecord(
            method=Method.NAIVE, n=n, x=x, log_p_hat=-math.inf,
            std_err_log=math.inf, num_samples=total, seed=config.seed,
            cutoff=config.cutoff, zero_hits=True,
            log_p_upper=_zero_hit_upper(total))
    p = hits / total
    se_log = math.sqrt((1.0 - p) / (total * p))
    return EstimateRecord(
        method=Method.NAIVE, n=n, x=x, log_p_hat=math.log(p),
        std_err_log=se_log, num_samples=total, seed=config.seed,
        cutoff=config.cutoff)


def default_tilt(config: SimulationConfig, m: int) -> float:
    """lambda = u * x / (n * sigma2); u = 1 for m = 0, else the optimal split t(C)."""
    if config.tilt is not None:
        return config.tilt
    spec = config.spec
    u = 1.0
    if m >= 1:
        c_implied = config.x / config.n ** (1.0 / (1.0 + spec.epsilon))
        u = rate.rate_transition(spec.epsilon, spec.q, spec.sigma2,
                                 c_implied).t_star
    return u * config.x / (config.n * spec.sigma2)


def estimate_pi(config: SimulationConfig, m: int, jump_integrated: bool = False,
                threads: int = 1,
                _table: dist.TiltedTruncatedTable | None = None) -> EstimateRecord:
    """Estimate Pi_{n,m}(x) by conditional jumps plus a tilted truncated block.

    With jump_integrated=False this averages the weighted indicator
    {jumps + block >= x}; with jump_integrated=True (m >= 1 only) one jump
    is integrated out through the exact conditional survival function, which
    removes the indicator and its hit starvation in deep tails.
    """
    spec, n, x = config.spec, config.n, config.x
    if not (0 <= m <= n):
        raise DomainError(f"m must lie in [0, n] = [0, {n}], got {m}")
    if jump_integrated and m == 0:
        raise DomainError("jump_integrated requires at least one jump (m >= 1)")
    c = config.cutoff
    c_raw = c + spec.mu
    lam = default_tilt(config, m)
    log_s_c = dist.log_survival_centered(spec, c)

    table = _table
    if n > m:
        if table is None:
            table = dist.build_tilted_table(spec, c, lam)
        log_z = table.log_normalizer
    else:
        log_z = 0.0

    n_jumps = m - 1 if jump_integrated else m
    const = (n_jumps * log_s_c) + (n - m) * log_z
    block = max(1, _BLOCK_ELEMS // n)
    stream = _STREAM_PI_BASE + m

    def worker(chunk_idx: int, size: int):
        rng = _rng_for(config.seed, stream, chunk_idx)
        acc = _LogAccumulator()
        max_logw = -math.inf
        remaining = size
        while remaining:
            b = min(block, remaining)
            remaining -= b
            if n > m:
                bsum = dist.sample_tilted(table, rng.random((b, n - m))) \
                    .sum(axis=1)
            else:
                bsum = np.zeros(b)
            if n_jumps:
                jumps = dist.sample_conditional(
                    spec, c_raw, 1.0 - rng.random((b, n_jumps))) - spec.mu
                jsum = jumps.sum(axis=1)
            else:
                jsum = 0.0
            logw = -lam * bsum
            if jump_integrated:
                thresh = np.maximum(c, x - bsum - jsum)
                acc.add(logw + dist.log_survival_centered(spec, thresh))
            else:
                if logw.size:
                    max_logw = max(max_logw, float(logw.max()))
                acc.add(np.where(bsum + jsum >= x, logw, -math.inf))
        return acc, max_logw

    results = _run_chunks(worker, _chunk_sizes(config.num_samples,
                                               config.chunk_count), threads)
    acc = _LogAccumulator()
    max_logw = -math.inf
    for part, part_max in results:
        acc.merge(part)
        max_logw = max(max_logw, part_max)

    total = config.num_samples
    method = Method.IMPORTANCE_SAMPLING if jump_integrated else Method.PI_TERM
    if acc.s1 <= 0.0:
        upper = const + max_logw + _zero_hit_upper(total) \
            if max_logw > -math.inf else None
        return EstimateRecord(
            method=method, n=n, x=x, log_p_hat=-math.inf,
            std_err_log=math.inf, num_samples=total, seed=config.seed, m=m,
            tilt=lam, cutoff=c, zero_hits=True, log_p_upper=upper)
    return EstimateRecord(
        method=method, n=n, x=x, log_p_hat=const + acc.log_sum - math.log(total),
        std_err_log=acc.std_err_log(), num_samples=total, seed=config.seed,
        m=m, tilt=lam, cutoff=c)


def log_binom(n: int, m: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(m + 1) - math.lgamma(n - m + 1)


def _log_term_ceiling(spec: WeibullLikeSpec, n: int, m, x: float,
                      c_raw: float) -> np.ndarray:
    """Analytic ceiling of log[binom(n,m) Pi_{n,m}(x)] for m >= 2, delta = 0."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    u = np.clip(x - (n - m) * max(c_raw - spec.mu, 0.0), 0.0, x)
    lb = np.array([log_binom(n, int(mm)) for mm in m])
    bound = -spec.q * (u ** spec.shape
                       + m * (1.0 - 2.0 ** (-spec.epsilon)) * c_raw ** spec.shape)
    return lb + bound


def estimate_decomposition(config: SimulationConfig, m_max: int | None = None,
                           jump_integrated: bool = True,
                           threads: int = 1) -> EstimateRecord:
    """Combine binom(n, m) * Pi-hat_{n,m} over m = 0..m_max by log-sum-exp.

    When m_max is None the expansion stops adaptively: after the Lemma-style
    analytic ceiling for the next term, or two consecutive observed terms,
    fall 10 nats below the running total (never before m = 1, and hard
    capped at min(n, 64)).  The analytic ceiling for all skipped m is
    reported as log_remainder_bound.
    """
    spec, n = config.spec, config.n
    c_raw = config.cutoff + spec.mu
    adaptive = m_max is None
    if adaptive:
        cap = n if n <= 12 else min(n, 64)
        per_term = max(256, config.num_samples // 20)
        n0 = max(256, config.num_samples // 2)
    else:
        if m_max < 1:
            raise DomainError("m_max must be at least 1")
        cap = min(m_max, n)
        per_term = max(256, config.num_samples // (cap + 1))
        n0 = per_term

    tables: dict[float, dist.TiltedTruncatedTable] = {}

    def term(m: int) -> EstimateRecord:
        samples = n0 if m == 0 else per_term
        sub = replace(config, num_samples=samples)
        lam = default_tilt(sub, m)
        if n > m and lam not in tables:
            tables[lam] = dist.build_tilted_table(spec, config.cutoff, lam)
        integrate = jump_integrated and m >= 1
        return estimate_pi(sub, m, jump_integrated=integrate, threads=threads,
                           _table=tables.get(lam))

    records: list[EstimateRecord] = []
    running = -math.inf
    below_streak = 0
    m = 0
    while m <= cap:
        rec = term(m)
        records.append(rec)
        log_term = log_binom(n, m) + rec.log_p_hat
        running = np.logaddexp(running, log_term)
        if adaptive and m >= 1 and m < cap:
            ceiling = float(_log_term_ceiling(spec, n, m + 1, config.x,
                                              c_raw)[0])
            if m + 1 >= 2 and ceiling < running - 10.0:
                m += 1
                break
            below_streak = below_streak + 1 \
                if (m >= 2 and log_term < running - 10.0) else 0
            if below_streak >= 2:
                m += 1
                break
        m += 1
    m_used = len(records) - 1

    remainder = None
    if m_used < n:
        ms = np.arange(m_used + 1, n + 1)
        ceilings = _log_term_ceiling(spec, n, ms, config.x, c_raw)
        mx = float(ceilings.max())
        remainder = mx + math.log(float(np.exp(ceilings - mx).sum()))

    log_terms = np.array([log_binom(n, r.m) + r.log_p_hat for r in records])
    finite = np.isfinite(log_terms)
    total_samples = sum(r.num_samples for r in records)
    if not finite.any():
        return EstimateRecord(
            method=Method.DECOMPOSITION, n=n, x=config.x, log_p_hat=-math.inf,
            std_err_log=math.inf, num_samples=total_samples, seed=config.seed,
            cutoff=config.cutoff, zero_hits=True, terms=tuple(records),
            log_remainder_bound=remainder)
    mx = log_terms[finite].max()
    log_p = mx + math.log(np.exp(log_terms[finite] - mx).sum())
    # absolute standard errors combine in quadrature across independent terms
    log_se_terms = np.array([
        log_binom(n, r.m) + r.log_p_hat + math.log(r.std_err_log)
        for r in records if np.isfinite(r.log_p_hat) and r.std_err_log > 0.0])
    if log_se_terms.size:
        mse = log_se_terms.max()
        log_se_abs = mse + 0.5 * math.log(
            np.exp(2.0 * (log_se_terms - mse)).sum())
        se_log = math.exp(log_se_abs - log_p)
    else:
        se_log = 0.0
    return EstimateRecord(
        method=Method.DECOMPOSITION, n=n, x=config.x, log_p_hat=float(log_p),
        std_err_log=se_log, num_samples=total_samples, seed=config.seed,
        cutoff=config.cutoff, terms=tuple(records),
        log_remainder_bound=remainder)


def max_jump_exact(spec: WeibullLikeSpec, n: int, x: float):
    """Exact P(max of n copies >= x) = 1 - (1 - s)^n and the union bound n*s.

    x is on the centered scale; evaluation is stable for s near 0 and 1.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    log_s = dist.log_survival_centered(spec, x)
    s = math.exp(log_s)
    p_max = -math.expm1(n * math.log1p(-s)) if s < 1.0 else 1.0
    return p_max, n * s


def largest_term_combine(terms):
    """Principle of the largest term: the max log value and its label."""
    terms = list(terms)
    if not terms:
        raise DomainError("largest_term_combine requires a nonempty list")
    label, value = max(terms, key=lambda kv: kv[1])
    return label, value
