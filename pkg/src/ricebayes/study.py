"""Repeated-sampling study of the estimators, and outage-probability curves.

Every replicate draws its data from its own stream
``SeedSequence(seed, spawn_key=(0, n, r))`` and every Bayesian chain from
``SeedSequence(seed, spawn_key=(1, crc32(method), n, r))``, so a table does not depend
on the order or batching in which replicates are processed.
"""

from __future__ import annotations

import csv
import io
import math
import re
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import asymptotic_ci, mle_estimate, mm_estimate
from .errors import DomainError, RiceBayesError
from .mcmc import McmcConfig, run_batch, summarize
from .model import RicianParams, Sample, cdf_grid, draw
from .priors import PROPER, PriorSpec, check_propriety

MM = "MM"
MLE = "MLE"
BAYES_JEFFREYS = "BAYES_JEFFREYS"
_POWER_RE = re.compile(r"^BAYES_POWER\((?P<eps>[^)]+)\)$")

PARAMETERS = ("eta", "alpha")
STUDY_COLUMNS = ("method", "n", "parameter", "bias", "mse", "cp", "failures")
OUTAGE_COLUMNS = ("gamma_th", "point", "lo", "hi")


def bayes_power(epsilon):
    return f"BAYES_POWER({float(epsilon):g})"


def method_prior(method):
    """Prior used by a Bayesian method name, ``None`` for MM and MLE."""
    if method == BAYES_JEFFREYS:
        return PriorSpec.jeffreys()
    m = _POWER_RE.match(method)
    if m:
        return PriorSpec.power(float(m.group("eps")))
    if method in (MM, MLE):
        return None
    raise DomainError(f"unknown method {method!r}")


def study_mcmc_defaults():
    return McmcConfig(iterations=5_500, burn_in=500, thin=5, chains=1)


@dataclass(frozen=True)
class StudyConfig:
    true_params: RicianParams = field(default_factory=lambda: RicianParams(6.0, 2.0))
    n_grid: tuple = (10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60)
    replications: int = 1_000
    methods: tuple = (MM, MLE, BAYES_JEFFREYS)
    level: float = 0.95
    seed: int = 0
    mcmc: McmcConfig = field(default_factory=study_mcmc_defaults)

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        if not 0 < self.level < 1:
            raise DomainError("level must lie in (0, 1)")
        if not self.n_grid:
            raise DomainError("empty sample-size grid")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        for method in self.methods:
            prior = method_prior(method)
            for n in self.n_grid:
                if n < 2:
                    raise DomainError("every sample size must be at least 2")
                if prior is not None and check_propriety(prior, n, True).status != PROPER:
                    raise DomainError(f"{method} is not guaranteed proper at n = {n}")


@dataclass(frozen=True)
class StudyRow:
    method: str
    n: int
    parameter: str
    bias: float
    mse: float
    cp: float | None
    failures: int

    def as_tuple(self):
        return (self.method, self.n, self.parameter, self.bias, self.mse, self.cp, self.failures)


@dataclass(frozen=True)
class StudyTable:
    rows: tuple
    replications: int

    def cell(self, method, n, parameter):
        for row in self.rows:
            if (row.method, row.n, row.parameter) == (method, n, parameter):
                return row
        raise KeyError((method, n, parameter))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(STUDY_COLUMNS)
        for row in self.rows:
            w.writerow([row.method, row.n, row.parameter, repr(row.bias), repr(row.mse),
                        "" if row.cp is None else repr(row.cp), row.failures])
        return buf.getvalue()

    def to_dict(self):
        return {"replications": self.replications,
                "rows": [dict(zip(STUDY_COLUMNS, r.as_tuple())) for r in self.rows]}


def bias_mse(estimates, truth):
    """Bias and mean squared error of a vector of estimates."""
    err = np.asarray(estimates, dtype=float) - truth
    return float(np.mean(err)), float(np.mean(err * err))


def _replicate_sample(cfg, n, r):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, n, r)))
    p = cfg.true_params
    return Sample(draw(p.eta, p.alpha, n, rng))


def _fit_mm(samples, truth, level):
    est = np.array([(e.eta_hat, e.alpha_hat) for e in map(mm_estimate, samples)])
    return est, None, 0


def _fit_mle(samples, truth, level):
    est, cover, failures = [], [], 0
    for s in samples:
        try:
            rep = mle_estimate(s)
            if not rep.converged:
                raise RiceBayesError("no convergence")
            ci = asymptotic_ci(rep, s, level)
        except (RiceBayesError, ArithmeticError, ValueError):
            failures += 1
            continue
        est.append((rep.eta_hat, rep.alpha_hat))
        cover.append((ci.eta[0] <= truth.eta <= ci.eta[1],
                      ci.alpha[0] <= truth.alpha <= ci.alpha[1]))
    return np.array(est).reshape(-1, 2), np.array(cover).reshape(-1, 2), failures


def _fit_bayes(samples, truth, level, cfg, n, method_key, prior, offset):
    mcfg = replace(cfg.mcmc, prior=prior, chains=1)
    seeds = [np.random.SeedSequence(cfg.seed, spawn_key=(1, method_key, n, offset + r))
             for r in range(len(samples))]
    est, cover, failures = [], [], 0
    try:
        chains = run_batch(samples, mcfg, seeds)
    except RiceBayesError:
        # fall back to one replicate at a time so a single bad data set
        # costs only its own entry
        chains = []
        for s, seed in zip(samples, seeds):
            try:
                chains.extend(run_batch([s], mcfg, [seed]))
            except RiceBayesError:
                chains.append(None)
    for c in chains:
        if c is None:
            failures += 1
            continue
        summ = summarize(c, level)
        est.append((summ.eta.point, summ.alpha.point))
        cover.append((summ.eta.lower <= truth.eta <= summ.eta.upper,
                      summ.alpha.lower <= truth.alpha <= summ.alpha.upper))
    return np.array(est).reshape(-1, 2), np.array(cover).reshape(-1, 2), failures


def run_study(cfg, batch=500):
    """Bias, MSE and interval coverage for every method and sample size."""
    truth = cfg.true_params
    truth_vec = (truth.eta, truth.alpha)
    rows = []
    for n in cfg.n_grid:
        samples = [_replicate_sample(cfg, n, r) for r in range(cfg.replications)]
        for method in cfg.methods:
            prior = method_prior(method)
            if method == MM:
                est, cover, failures = _fit_mm(samples, truth, cfg.level)
            elif method == MLE:
                est, cover, failures = _fit_mle(samples, truth, cfg.level)
            else:
                key = zlib.crc32(method.encode())
                parts = [_fit_bayes(samples[i:i + batch], truth, cfg.level, cfg, n, key, prior, i)
                         for i in range(0, len(samples), batch)]
                est = np.concatenate([p[0] for p in parts])
                cover = np.concatenate([p[1] for p in parts])
                failures = sum(p[2] for p in parts)
            for j, name in enumerate(PARAMETERS):
                if est.shape[0]:
                    bias, mse = bias_mse(est[:, j], truth_vec[j])
                else:
                    bias = mse = math.nan
                cp = None
                if cover is not None:
                    cp = float(np.mean(cover[:, j])) if cover.shape[0] else math.nan
                rows.append(StudyRow(method, n, name, bias, mse, cp, failures))
    return StudyTable(tuple(rows), cfg.replications)


# -- outage probability -------------------------------------------------------------


@dataclass(frozen=True)
class OutageCurve:
    gamma_th: np.ndarray
    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    level: float

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(OUTAGE_COLUMNS)
        for row in zip(self.gamma_th, self.point, self.lo, self.hi):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self):
        return {"level": self.level,
                "rows": [dict(zip(OUTAGE_COLUMNS, map(float, r)))
                         for r in zip(self.gamma_th, self.point, self.lo, self.hi)]}


def outage_curve(c, gamma_grid, level=0.95):
    """Outage probability ``P(X <= gamma_th)`` with a credible band.

    The point curve plugs the posterior point estimates (median of eta,
    mean of alpha) into the distribution function; the band is the
    equal-tailed interval of the per-draw distribution functions.
    """
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("gamma grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("gamma grid must be strictly increasing")
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    summ = summarize(c, level)
    point = cdf_grid(grid, summ.eta.point, summ.alpha.point)[0]
    per_draw = cdf_grid(grid, c.eta, c.alpha)
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(per_draw, [tail, 1.0 - tail], axis=0, method="linear")
    return OutageCurve(grid, point, lo, hi, float(level))


def true_outage(gamma_grid, p):
    return cdf_grid(np.asarray(gamma_grid, dtype=float), p.eta, p.alpha)[0]

