"""The Rician distribution: parameters, samples, density, sampling and CDF.

Random numbers come from numpy's PCG64 bit generator.  Every public
entry point takes an integer seed; independent streams for chains or
replicates are derived with ``numpy.random.SeedSequence(seed).spawn`` or
``SeedSequence(seed, spawn_key=(purpose, index))`` so results are
reproducible run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError
from .quadrature import gauss_kronrod
from .special import log_bessel_i0


@dataclass(frozen=True)
class RicianParams:
    """Noncentrality ``eta`` and scale ``alpha`` of a Rician law.

    ``eta = 0`` is accepted (Rayleigh boundary); estimators work with
    ``eta > 0``.
    """

    eta: float
    alpha: float

    def __post_init__(self):
        eta, alpha = float(self.eta), float(self.alpha)
        if not (math.isfinite(eta) and math.isfinite(alpha)):
            raise DomainError("parameters must be finite")
        if alpha <= 0 or eta < 0:
            raise DomainError("need alpha > 0 and eta >= 0")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "alpha", alpha)

    @property
    def rho(self):
        """Squared signal-to-noise ratio ``eta^2 / alpha^2``."""
        return self.eta ** 2 / self.alpha ** 2


@dataclass(frozen=True, eq=False)
class Sample:
    """Strictly positive observations with cached power sums."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise DomainError("a sample needs at least one observation")
        if not np.all(np.isfinite(v)):
            raise DomainError("observations must be finite")
        if np.any(v <= 0):
            raise DomainError("observations must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return isinstance(other, Sample) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    @property
    def n(self):
        return self.values.size

    @cached_property
    def sum_x(self):
        return math.fsum(self.values)

    @cached_property
    def sum_x2(self):
        return math.fsum(self.values ** 2)

    @cached_property
    def sum_x4(self):
        return math.fsum(self.values ** 4)

    @cached_property
    def sum_log_x(self):
        return math.fsum(np.log(self.values))

    @property
    def all_equal(self):
        return bool(self.values.max() - self.values.min() == 0)

    def moment(self, order):
        """Empirical raw moment ``mean(x**order)``."""
        if order == 2:
            return self.sum_x2 / self.n
        if order == 4:
            return self.sum_x4 / self.n
        return float(np.mean(self.values ** order))


def _check_x(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("x must be positive and finite")
    return arr


def _log_pdf_array(x, eta, alpha):
    a2 = alpha * alpha
    return (np.log(x) - np.log(a2) - (x * x + eta * eta) / (2.0 * a2)
            + log_bessel_i0(eta * x / a2))


def log_pdf(x, p):
    """Log density of the Rician law at ``x > 0``."""
    arr = _check_x(x)
    out = _log_pdf_array(arr, p.eta, p.alpha)
    return float(out) if np.ndim(x) == 0 else out


def pdf(x, p):
    """Rician density, evaluated through the log form."""
    out = np.exp(log_pdf(x, p))
    return float(out) if np.ndim(x) == 0 else out


def sample(p, n, seed):
    """Draw ``n`` Rician variates as the length of a shifted 2-D Gaussian."""
    if int(n) < 1:
        raise DomainError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return Sample(draw(p.eta, p.alpha, int(n), rng))


def draw(eta, alpha, size, rng):
    """Vectorised draws; ``eta`` and ``alpha`` broadcast against ``size``."""
    shape = (int(size),) if np.ndim(size) == 0 else tuple(size)
    z = rng.standard_normal((2,) + shape)
    m1 = eta + alpha * z[0]
    m2 = alpha * z[1]
    out = np.hypot(m1, m2)
    # hypot is zero only with probability zero; keep the support open anyway
    return np.where(out > 0, out, np.finfo(float).tiny)


def raw_moment(p, order):
    """Closed-form ``E[X^2]`` or ``E[X^4]``."""
    e2, a2 = p.eta ** 2, p.alpha ** 2
    if order == 2:
        return e2 + 2.0 * a2
    if order == 4:
        return e2 * e2 + 8.0 * e2 * a2 + 8.0 * a2 * a2
    raise DomainError(f"unsupported moment order {order}; use 2 or 4")


def _pdf_integrand(x, eta, alpha):
    xs = np.maximum(x, 1e-300)
    return np.exp(_log_pdf_array(xs, eta, alpha))


def _lattice_edges(upper, alpha):
    # panel breaks on a fixed lattice of width alpha/2, so the full panels
    # below two thresholds are integrated identically
    step = 0.5 * alpha
    full = int(math.floor(upper / step))
    if full > 20000:
        step = upper / 20000
        full = 20000
    edges = step * np.arange(full + 1)
    if upper > edges[-1]:
        edges = np.append(edges, upper)
    return edges


def cdf_with_error(x_th, p):
    """``P(X <= x_th)`` by adaptive quadrature, with an error bound."""
    x_th = float(x_th)
    if not math.isfinite(x_th) or x_th < 0:
        raise DomainError("threshold must be a finite nonnegative number")
    if x_th == 0:
        return 0.0, 0.0
    edges = _lattice_edges(x_th, p.alpha)
    vals, errs = gauss_kronrod(_pdf_integrand, edges[:-1], edges[1:],
                               args=(p.eta, p.alpha), epsabs=1e-13, epsrel=0.0)
    total = math.fsum(vals)
    return min(max(total, 0.0), 1.0), float(errs.sum())


def cdf(x_th, p):
    """Rician distribution function (outage probability at ``x_th``)."""
    return cdf_with_error(x_th, p)[0]


def cdf_grid(thresholds, eta, alpha, chunk=500):
    """CDF on an increasing threshold grid for many parameter draws at once.

    Returns an array of shape ``(len(eta), len(thresholds))``.  Each row
    is built by summing the integrals over consecutive grid intervals, so
    rows are nondecreasing by construction.
    """
    grid = np.asarray(thresholds, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("thresholds must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise DomainError("thresholds must be finite, nonnegative and nondecreasing")
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    eta, alpha = np.broadcast_arrays(eta, alpha)
    knots = np.concatenate([[0.0], grid])
    step = 0.5 * alpha.min()
    pieces = np.maximum(1, np.ceil(np.diff(knots) / step).astype(int))
    lo, hi, seg = [], [], []
    for i, (a, b, k) in enumerate(zip(knots[:-1], knots[1:], pieces)):
        e = np.linspace(a, b, k + 1)
        lo.append(e[:-1])
        hi.append(e[1:])
        seg.append(np.full(k, i))
    lo, hi, seg = np.concatenate(lo), np.concatenate(hi), np.concatenate(seg)
    # panel -> grid interval incidence, used to sum panels per interval
    incidence = np.zeros((lo.size, grid.size))
    incidence[np.arange(lo.size), seg] = 1.0
    out = np.empty((eta.size, grid.size))
    for start in range(0, eta.size, chunk):
        e = eta[start:start + chunk]
        a = alpha[start:start + chunk]
        vals, _ = gauss_kronrod(
            _pdf_integrand, np.tile(lo, e.size), np.tile(hi, e.size),
            args=(np.repeat(e, lo.size), np.repeat(a, lo.size)),
            epsabs=1e-13, epsrel=0.0)
        out[start:start + chunk] = np.cumsum(vals.reshape(e.size, lo.size) @ incidence, axis=1)
    return np.clip(out, 0.0, 1.0)
