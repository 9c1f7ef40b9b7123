"""Metropolis-within-Gibbs sampler with Gamma proposals, plus diagnostics.

Each sweep updates ``eta`` given ``alpha`` and then ``alpha`` given the new
``eta``.  A proposal is Gamma with mean equal to the current value and
shape ``d`` (so ``d`` acts as a precision: variance ``current^2 / d``),
and the Hastings correction for this asymmetric kernel is applied.

Several chains, or the chains of many independent data sets, advance in
lockstep as one vectorised batch.  Each member owns its random stream,
so a chain's draws depend only on its own seed, never on the batch it
ran in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classical import MM_UNDEFINED_FALLBACK, mm_estimate
from .errors import DomainError, ImproperPosteriorError, RiceBayesError
from .model import Sample
from .priors import PROPER, PriorSpec, check_propriety, log_posterior_array

_BLOCK = 512


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 50_500
    burn_in: int = 500
    thin: int = 5
    chains: int = 2
    d_eta: float = 100.0
    d_alpha: float = 100.0
    seed: int = 0
    prior: PriorSpec = field(default_factory=PriorSpec.jeffreys)

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise DomainError("need iterations > burn_in >= 0")
        if self.thin < 1 or self.chains < 1:
            raise DomainError("thin and chains must be at least 1")
        if not (self.d_eta > 0 and self.d_alpha > 0):
            raise DomainError("proposal precisions must be positive")

    @property
    def draws_per_chain(self):
        return (self.iterations - self.burn_in) // self.thin

    def to_dict(self):
        return {
            "iterations": self.iterations, "burn_in": self.burn_in, "thin": self.thin,
            "chains": self.chains, "d_eta": self.d_eta, "d_alpha": self.d_alpha,
            "seed": self.seed, "prior": self.prior.label(),
        }


@dataclass(frozen=True, eq=False)
class Chain:
    """Kept draws, shape ``(chains, draws, 2)`` with columns (eta, alpha)."""

    draws: np.ndarray
    accept_rate_eta: np.ndarray
    accept_rate_alpha: np.ndarray
    config: McmcConfig | None = None
    init: tuple = ()

    @property
    def n_chains(self):
        return self.draws.shape[0]

    @property
    def eta(self):
        return self.draws[:, :, 0].ravel()

    @property
    def alpha(self):
        return self.draws[:, :, 1].ravel()

    def __len__(self):
        return self.draws.shape[0] * self.draws.shape[1]

    def iterations(self):
        """Sweep index (1-based, counted from the start) of every kept draw."""
        if self.config is None:
            return np.arange(1, self.draws.shape[1] + 1)
        cfg = self.config
        return cfg.burn_in + cfg.thin * np.arange(1, self.draws.shape[1] + 1)


def log_hastings_ratio(current, proposal, d):
    """``log q(current | proposal) - log q(proposal | current)`` for the
    mean-preserving Gamma kernel with shape ``d``."""
    return ((2.0 * d - 1.0) * (np.log(current) - np.log(proposal))
            + d * (proposal / current - current / proposal))


class _Streams:
    """Block-wise pre-drawn randomness, one generator per batch member."""

    def __init__(self, rngs, d_eta, d_alpha):
        self.rngs = rngs
        self.d_eta = d_eta
        self.d_alpha = d_alpha
        self.pos = _BLOCK

    def next(self):
        if self.pos == _BLOCK:
            blocks = [(r.standard_gamma(self.d_eta, _BLOCK), r.random(_BLOCK),
                       r.standard_gamma(self.d_alpha, _BLOCK), r.random(_BLOCK))
                      for r in self.rngs]
            self.ge, self.ue, self.ga, self.ua = (np.array(v) for v in zip(*blocks))
            self.pos = 0
        j = self.pos
        self.pos += 1
        return self.ge[:, j], self.ue[:, j], self.ga[:, j], self.ua[:, j]


def metropolis_within_gibbs(log_target, init, rngs, iterations, burn_in=0, thin=1,
                            d_eta=100.0, d_alpha=100.0):
    """Run a batch of chains on ``log_target(eta, alpha) -> (B,)`` arrays.

    ``init`` has shape ``(B, 2)``; ``rngs`` holds ``B`` generators.
    Returns ``(draws, accept_eta, accept_alpha)`` with draws of shape
    ``(B, (iterations - burn_in) // thin, 2)``.
    """
    init = np.asarray(init, dtype=float)
    eta = init[:, 0].copy()
    alpha = init[:, 1].copy()
    if np.any(eta <= 0) or np.any(alpha <= 0):
        raise DomainError("initial values must be positive")
    lp = np.asarray(log_target(eta, alpha), dtype=float)
    if not np.all(np.isfinite(lp)):
        raise RiceBayesError("log target is not finite at the initial state")
    keep = (iterations - burn_in) // thin
    draws = np.empty((eta.size, keep, 2))
    acc_eta = np.zeros(eta.size)
    acc_alpha = np.zeros(eta.size)
    streams = _Streams(rngs, d_eta, d_alpha)
    slot = 0
    for it in range(1, iterations + 1):
        ge, ue, ga, ua = streams.next()

        prop = eta * ge / d_eta
        lp_prop = np.asarray(log_target(prop, alpha), dtype=float)
        log_r = lp_prop - lp + log_hastings_ratio(eta, prop, d_eta)
        ok = np.log(ue) <= np.where(np.isnan(log_r), -np.inf, log_r)
        eta = np.where(ok, prop, eta)
        lp = np.where(ok, lp_prop, lp)
        acc_eta += ok

        prop = alpha * ga / d_alpha
        lp_prop = np.asarray(log_target(eta, prop), dtype=float)
        log_r = lp_prop - lp + log_hastings_ratio(alpha, prop, d_alpha)
        ok = np.log(ua) <= np.where(np.isnan(log_r), -np.inf, log_r)
        alpha = np.where(ok, prop, alpha)
        lp = np.where(ok, lp_prop, lp)
        acc_alpha += ok

        if it > burn_in and (it - burn_in) % thin == 0 and slot < keep:
            draws[:, slot, 0] = eta
            draws[:, slot, 1] = alpha
            slot += 1
    if not (np.all(draws > 0) and np.all(np.isfinite(draws))):
        raise RiceBayesError("a chain left the positive quadrant")
    return draws, acc_eta / iterations, acc_alpha / iterations


def initial_values(s):
    """Moment estimates, with a median-based fallback when they do not exist."""
    mm = mm_estimate(s)
    if MM_UNDEFINED_FALLBACK not in mm.flags and mm.eta_hat > 0 and mm.alpha_hat > 0:
        return mm.eta_hat, mm.alpha_hat
    m2 = s.moment(2)
    med = float(np.median(s.values))
    a2 = 0.5 * m2 - 0.5 * med * med
    alpha = math.sqrt(a2) if a2 > 0 else 0.0
    return med, max(alpha, 0.1 * math.sqrt(0.5 * m2))


def chain_generators(seed, count):
    return [np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(count)]


def _gate(spec, s, allow_improper):
    verdict = check_propriety(spec, s.n, not s.all_equal)
    if verdict.status != PROPER and not allow_improper:
        raise ImproperPosteriorError(
            f"posterior under prior {spec.label()} is {verdict.status} for this sample "
            f"({verdict.note})", verdict)
    return verdict


def run_chain(s, cfg=None, allow_improper=False, table=None, log_offset=0.0):
    """Sample the posterior of ``(eta, alpha)`` for the data ``s``.

    The propriety check runs before any sampling; pass
    ``allow_improper=True`` to sample anyway.  ``log_offset`` is added to
    the log target and exists to check that it cannot change the chain.
    """
    cfg = cfg or McmcConfig()
    if not isinstance(s, Sample):
        s = Sample(s)
    _gate(cfg.prior, s, allow_improper)
    x = s.values
    sum_x2, sum_log_x = s.sum_x2, s.sum_log_x

    def target(eta, alpha):
        return log_posterior_array(cfg.prior, eta, alpha, x, table, sum_x2, sum_log_x) + log_offset

    eta0, alpha0 = initial_values(s)
    init = np.tile([eta0, alpha0], (cfg.chains, 1))
    draws, acc_e, acc_a = metropolis_within_gibbs(
        target, init, chain_generators(cfg.seed, cfg.chains), cfg.iterations,
        cfg.burn_in, cfg.thin, cfg.d_eta, cfg.d_alpha)
    return Chain(draws, acc_e, acc_a, cfg, (eta0, alpha0))


def run_batch(samples, cfg, seeds, table=None):
    """One chain per data set, all advanced together.

    ``samples`` is a sequence of equal-length ``Sample`` objects and
    ``seeds`` one seed per sample.  Every data set must pass the
    propriety gate.  Returns a list of single-chain ``Chain`` objects.
    """
    if len(samples) != len(seeds):
        raise DomainError("need one seed per sample")
    if len({s.n for s in samples}) != 1:
        raise DomainError("batched samples must share the same size")
    for s in samples:
        _gate(cfg.prior, s, False)
    x = np.stack([s.values for s in samples])
    sum_x2 = np.array([s.sum_x2 for s in samples])
    sum_log_x = np.array([s.sum_log_x for s in samples])

    def target(eta, alpha):
        return log_posterior_array(cfg.prior, eta, alpha, x, table, sum_x2, sum_log_x)

    init = np.array([initial_values(s) for s in samples])
    rngs = [np.random.default_rng(seed) for seed in seeds]
    draws, acc_e, acc_a = metropolis_within_gibbs(
        target, init, rngs, cfg.iterations, cfg.burn_in, cfg.thin, cfg.d_eta, cfg.d_alpha)
    return [Chain(draws[i:i + 1], acc_e[i:i + 1], acc_a[i:i + 1], cfg, tuple(init[i]))
            for i in range(len(samples))]


# -- diagnostics ------------------------------------------------------------------


def _autocovariance(x, max_lag):
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    return np.array([np.dot(d[:n - lag], d[lag:]) / n for lag in range(max_lag + 1)])


def autocorrelation(series, max_lag):
    """Biased (divide-by-n) sample autocorrelations for lags 0..max_lag."""
    x = np.asarray(series, dtype=float)
    if max_lag >= x.size or max_lag < 0:
        raise DomainError("need 0 <= max_lag < len(series)")
    acov = _autocovariance(x, max_lag)
    if acov[0] <= 0:
        raise DomainError("series is constant; autocorrelation undefined")
    return acov / acov[0]


def spectral_variance(series):
    """Spectral density at frequency zero, Bartlett lag window.

    The truncation lag is ``floor(2 n^(1/3))``.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    lag = min(n - 1, int(2 * n ** (1.0 / 3.0)))
    acov = _autocovariance(x, lag)
    weights = 1.0 - np.arange(1, lag + 1) / (lag + 1.0)
    return float(acov[0] + 2.0 * np.dot(weights, acov[1:]))


def geweke_z(series, frac_first=0.1, frac_last=0.5):
    """Geweke convergence z-score comparing the early and late segments."""
    x = np.asarray(series, dtype=float)
    if x.size < 100:
        raise DomainError("Geweke diagnostic needs at least 100 values")
    if not (0 < frac_first < 1 and 0 < frac_last < 1 and frac_first + frac_last <= 1):
        raise DomainError("segment fractions must lie in (0, 1) and sum to at most 1")
    n1 = int(frac_first * x.size)
    n2 = int(frac_last * x.size)
    a = x[:n1]
    b = x[x.size - n2:]
    sa, sb = spectral_variance(a), spectral_variance(b)
    if sa <= 0 or sb <= 0 or np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DomainError("a segment has zero variance; Geweke z is undefined")
    return float((a.mean() - b.mean()) / math.sqrt(sa / n1 + sb / n2))


# -- summaries --------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    median: float
    sd: float
    lower: float
    upper: float
    point: float
    rule: str

    def to_dict(self):
        return {
            "point": self.point, "rule": self.rule, "mean": self.mean, "median": self.median,
            "sd": self.sd, "interval": [self.lower, self.upper],
        }


@dataclass(frozen=True)
class PosteriorSummary:
    eta: ParamSummary
    alpha: ParamSummary
    level: float

    def to_dict(self):
        return {"level": self.level, "eta": self.eta.to_dict(), "alpha": self.alpha.to_dict()}


def equal_tailed(values, level):
    """Equal-tailed interval by linearly interpolated empirical quantiles."""
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(np.asarray(values, dtype=float), [tail, 1.0 - tail], method="linear")
    return float(lo), float(hi)


def summarize_values(values, level, rule):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("cannot summarise an empty set of draws")
    lo, hi = equal_tailed(v, level)
    mean = float(v.mean())
    median = float(np.median(v))
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    point = median if rule == "median" else mean
    return ParamSummary(mean, median, sd, lo, hi, point, rule)


def summarize(c, level=0.95):
    """Pooled posterior summary: posterior median for eta, mean for alpha."""
    if len(c) == 0:
        raise DomainError("empty chain")
    return PosteriorSummary(eta=summarize_values(c.eta, level, "median"),
                            alpha=summarize_values(c.alpha, level, "mean"),
                            level=float(level))
