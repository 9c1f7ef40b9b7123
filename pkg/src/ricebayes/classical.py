"""Moment and maximum-likelihood estimation, Fisher information, Wald intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import ConvergenceError, DegenerateSampleError, DomainError, RiceBayesError
from .model import RicianParams, Sample, log_pdf
from .special import bessel_ratio, log_bessel_i0, psi

MM_UNDEFINED_FALLBACK = "MM_UNDEFINED_FALLBACK"
AT_BOUNDARY = "AT_BOUNDARY"

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500
RESTART_SCALES = (0.5, 0.75, 1.25, 1.5, 2.0)


class SingularInformationError(RiceBayesError, ArithmeticError):
    """The Fisher information is too ill-conditioned to invert."""


@dataclass(frozen=True)
class EstimateReport:
    method: str
    eta_hat: float
    alpha_hat: float
    converged: bool = True
    iterations: int = 0
    score_residual: float = 0.0
    flags: frozenset = field(default_factory=frozenset)

    @property
    def params(self):
        return RicianParams(self.eta_hat, self.alpha_hat)

    def to_dict(self):
        return {
            "method": self.method,
            "eta_hat": self.eta_hat,
            "alpha_hat": self.alpha_hat,
            "converged": self.converged,
            "iterations": self.iterations,
            "score_residual": self.score_residual,
            "flags": sorted(self.flags),
        }


def mm_from_moments(m2, m4):
    """Invert ``E[X^2]`` and ``E[X^4]`` for ``(eta, alpha)``.

    Returns ``(eta, alpha, flags)``.  When ``2 m2^2 - m4 < 0`` the moment
    equations have no real solution and the Rayleigh fit ``eta = 0`` is
    returned instead.
    """
    disc = 2.0 * m2 * m2 - m4
    flags = set()
    if disc < 0:
        return 0.0, math.sqrt(m2 / 2.0), {MM_UNDEFINED_FALLBACK}
    eta = math.sqrt(math.sqrt(disc))
    a2 = 0.5 * (m2 - eta * eta)
    if a2 <= 0:
        # m4 = m2^2 exactly: no spread in the data
        a2 = 0.0
        flags.add(AT_BOUNDARY)
    return eta, math.sqrt(a2), flags


def mm_estimate(s):
    """Method-of-moments estimate from the second and fourth raw moments."""
    eta, alpha, flags = mm_from_moments(s.moment(2), s.moment(4))
    return EstimateReport("MM", eta, alpha, True, 0, 0.0, frozenset(flags))


def log_likelihood(p, s):
    """Rician log-likelihood of the whole sample."""
    x = s.values if isinstance(s, Sample) else np.asarray(s, dtype=float)
    return float(np.sum(log_pdf(x, p)))


def _profile_alpha2(eta, m2):
    return 0.5 * (m2 - eta * eta)


def _profile_loglik(eta, x, m2):
    a2 = _profile_alpha2(eta, m2)
    n = x.size
    return (-n * math.log(a2) + float(np.sum(np.log(x)))
            + float(np.sum(log_bessel_i0(eta * x / a2)))
            - n * (m2 + eta * eta) / (2.0 * a2))


def _fixed_point(x, m2, eta0, tol, max_iter):
    eta_cap = math.sqrt(m2) * (1.0 - 1e-9)
    eta = min(eta0, eta_cap)
    residual = math.inf
    for it in range(1, max_iter + 1):
        a2 = _profile_alpha2(eta, m2)
        new = float(np.mean(x * bessel_ratio(eta * x / a2)))
        residual = abs(new - eta)
        eta = min(new, eta_cap)
        if residual <= tol:
            return eta, it, residual, True
    return eta, max_iter, residual, False


def _eta_residual(eta, x, m2):
    a2 = _profile_alpha2(eta, m2)
    return abs(eta - float(np.mean(x * bessel_ratio(eta * x / a2))))


def mle_estimate(s, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Maximum-likelihood estimate by profile fixed-point iteration.

    ``alpha^2 = (m2 - eta^2) / 2`` is imposed at every step, and ``eta`` is
    iterated through ``eta <- mean(x * I1/I0(x eta / alpha^2))`` starting
    from the moment estimate.  The iteration is the EM algorithm for the
    Rician model (the phase being the missing datum), so the likelihood
    never decreases from its starting value.  If the iteration has not met
    ``tol`` after ``max_iter`` steps it is restarted from scaled starting
    points and the best-likelihood end point is kept.
    """
    if s.n < 2:
        raise DegenerateSampleError("maximum likelihood needs at least two observations")
    if s.all_equal:
        raise DegenerateSampleError("all observations are equal; the likelihood has no maximum")
    x = s.values
    m2 = s.moment(2)
    mm = mm_estimate(s)
    start = mm.eta_hat
    if MM_UNDEFINED_FALLBACK in mm.flags or start <= 0:
        start = 0.5 * math.sqrt(m2)

    eta, iters, resid, ok = _fixed_point(x, m2, start, tol, max_iter)
    total_iters = iters
    if not ok:
        candidates = [(eta, iters, resid, ok)]
        for scale in RESTART_SCALES:
            res = _fixed_point(x, m2, start * scale, tol, max_iter)
            total_iters += res[1]
            candidates.append(res)
        # converged candidates first, then the highest likelihood
        eta, _, resid, ok = max(
            candidates, key=lambda c: (c[3], _profile_loglik(c[0], x, m2)))

    flags = set()
    if eta <= 1e-8 * math.sqrt(m2):
        flags.add(AT_BOUNDARY)
    alpha = math.sqrt(_profile_alpha2(eta, m2))
    return EstimateReport("MLE", eta, alpha, ok, total_iters,
                          _eta_residual(eta, x, m2), frozenset(flags))


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """Expected information for ``n`` observations, ordered (alpha, eta)."""

    entries: np.ndarray
    n: int

    def __eq__(self, other):
        return (isinstance(other, FisherMatrix) and self.n == other.n
                and np.array_equal(self.entries, other.entries))

    @property
    def determinant(self):
        return float(np.linalg.det(self.entries))

    def inverse(self, max_condition=1e12):
        cond = np.linalg.cond(self.entries)
        if not np.isfinite(cond) or cond > max_condition:
            raise SingularInformationError(f"information matrix condition number {cond:.3g}")
        return np.linalg.inv(self.entries)


def fisher_information(p, n=1):
    """Fisher information of ``n`` observations at ``p``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    rho = p.rho
    if rho <= 0:
        raise DomainError("Fisher information needs eta > 0")
    ps = psi(rho)
    a2 = p.alpha ** 2
    aa = 4.0 / a2 * (rho * ps - rho + 1.0)
    ae = 2.0 / a2 * math.sqrt(rho) * (1.0 - ps)
    ee = ps / a2
    return FisherMatrix(n * np.array([[aa, ae], [ae, ee]]), int(n))


@dataclass(frozen=True)
class WaldIntervals:
    eta: tuple
    alpha: tuple
    level: float

    def to_dict(self):
        return {"level": self.level, "eta": list(self.eta), "alpha": list(self.alpha)}


def asymptotic_ci(report, s, level=0.95):
    """Wald intervals from the inverse Fisher information at the estimate."""
    if not 0 < level < 1:
        raise DomainError("level must lie in (0, 1)")
    if not report.converged:
        raise ConvergenceError("asymptotic intervals need a converged estimate")
    p = RicianParams(report.eta_hat, report.alpha_hat)
    cov = fisher_information(p, s.n).inverse()
    z = float(norm.ppf(0.5 * (1.0 + level)))
    half_alpha = z * math.sqrt(cov[0, 0])
    half_eta = z * math.sqrt(cov[1, 1])
    return WaldIntervals(
        eta=(report.eta_hat - half_eta, report.eta_hat + half_eta),
        alpha=(report.alpha_hat - half_alpha, report.alpha_hat + half_alpha),
        level=float(level))
