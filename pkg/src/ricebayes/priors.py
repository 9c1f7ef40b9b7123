"""Objective priors, unnormalised posteriors and propriety decision rules.

Priors are factorised as ``pi(alpha) pi(eta)`` and summarised by three
tail exponents: ``pi(eta) ~ eta^r0`` as ``eta -> 0``, ``pi(eta) ~
eta^r_inf`` as ``eta -> inf`` and ``pi(alpha) ~ alpha^k``.  The decision
rules only ever use those exponents:

* ``r0 <= -1``: the posterior is improper for every sample.
* ``r0 > -1``: proper as soon as ``n > max(2 (r_inf + 1), k + 1)`` and
  the observations are not all equal.
* posterior first moments are finite when ``r0 > -2`` and
  ``n > max(2 (r_inf + 2), k + 2)``.

These are sufficient conditions; where neither a proof of propriety nor
of impropriety applies the verdict is ``NOT_GUARANTEED``.

The Jeffreys prior ``sqrt((rho + 1) Psi(rho) - rho) / alpha^2`` is
dominated by ``1 / alpha^2``, so it is screened with the envelope
exponents ``(0, 0, -2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import Sample
from .special import default_psi_table, jeffreys_factor_with_error, log_bessel_i0

POWER = "POWER"
JEFFREYS = "JEFFREYS"
CUSTOM_TAILS = "CUSTOM_TAILS"

PROPER = "PROPER"
IMPROPER = "IMPROPER"
NOT_GUARANTEED = "NOT_GUARANTEED"

THM_3_1_i = "THM_3_1_i"
THM_3_1_ii = "THM_3_1_ii"
THM_3_2 = "THM_3_2"
PROP_4_1 = "PROP_4_1"
PROP_4_2 = "PROP_4_2"


@dataclass(frozen=True)
class PriorSpec:
    """A prior family together with its tail exponents ``(r0, r_inf, k)``."""

    family: str
    r0: float
    r_inf: float
    k: float
    epsilon: float | None = None

    @classmethod
    def power(cls, epsilon):
        """``1 / (alpha^(1+eps) eta^(1-eps))``; ``eps = 0`` is ``1/(alpha eta)``."""
        eps = float(epsilon)
        if not math.isfinite(eps):
            raise DomainError("epsilon must be finite")
        return cls(POWER, eps - 1.0, eps - 1.0, -eps - 1.0, eps)

    @classmethod
    def jeffreys(cls):
        return cls(JEFFREYS, 0.0, 0.0, -2.0)

    @classmethod
    def custom(cls, r0, r_inf, k):
        """Any prior with the given tails.

        As a density this is ``alpha^k eta^r0 (1 + eta)^(r_inf - r0)``, the
        simplest function with exactly those tail orders.
        """
        vals = tuple(float(v) for v in (r0, r_inf, k))
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("tail exponents must be finite")
        return cls(CUSTOM_TAILS, *vals)

    @classmethod
    def parse(cls, text):
        """Parse ``jeffreys``, ``power:EPS`` or ``tails:R0,RINF,K``."""
        key, _, rest = text.strip().partition(":")
        key = key.lower()
        try:
            if key == "jeffreys" and not rest:
                return cls.jeffreys()
            if key == "power":
                return cls.power(float(rest))
            if key == "tails":
                r0, r_inf, k = (float(v) for v in rest.split(","))
                return cls.custom(r0, r_inf, k)
        except ValueError as exc:
            raise DomainError(f"cannot parse prior {text!r}: {exc}") from None
        raise DomainError(f"unknown prior {text!r}; use jeffreys, power:EPS or tails:R0,RINF,K")

    @property
    def tails(self):
        return (self.r0, self.r_inf, self.k)

    def label(self):
        if self.family == POWER:
            return f"power:{self.epsilon:g}"
        if self.family == JEFFREYS:
            return "jeffreys"
        return f"tails:{self.r0:g},{self.r_inf:g},{self.k:g}"

    def to_dict(self):
        out = {"family": self.family, "r0": self.r0, "r_inf": self.r_inf, "k": self.k}
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out


def log_prior_array(spec, eta, alpha, table=None):
    """Vectorised unnormalised log prior."""
    eta = np.asarray(eta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    log_a = np.log(alpha)
    if spec.family == JEFFREYS:
        table = table or default_psi_table()
        rho = (eta / alpha) ** 2
        return 0.5 * table.log_jeffreys_factor(rho) - 2.0 * log_a
    log_e = np.log(eta)
    if spec.family == POWER:
        return -(1.0 + spec.epsilon) * log_a - (1.0 - spec.epsilon) * log_e
    return spec.k * log_a + spec.r0 * log_e + (spec.r_inf - spec.r0) * np.log1p(eta)


def log_prior(spec, p, method="table", table=None):
    """Unnormalised log prior density at ``p``.

    For the Jeffreys prior ``method="table"`` reads the Fisher factor from
    the cached Psi table; ``method="quadrature"`` integrates it afresh and
    raises ``DomainError`` if the result is not certifiably positive.
    """
    if p.eta <= 0:
        raise DomainError("priors are defined for eta > 0")
    if spec.family == JEFFREYS and method == "quadrature":
        factor, _ = jeffreys_factor_with_error(p.rho)
        return 0.5 * math.log(factor) - 2.0 * math.log(p.alpha)
    return float(log_prior_array(spec, p.eta, p.alpha, table))


def log_likelihood_array(eta, alpha, x, sum_x2=None, sum_log_x=None):
    """Rician log-likelihood for parameter arrays against data ``x``.

    ``x`` has shape ``(n,)`` or ``(R, n)``; ``eta`` and ``alpha`` have the
    leading shape ``()`` or ``(R,)``.
    """
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    n = x.shape[-1]
    if sum_x2 is None:
        sum_x2 = np.sum(x * x, axis=-1)
    if sum_log_x is None:
        sum_log_x = np.sum(np.log(x), axis=-1)
    a2 = alpha * alpha
    bessel = np.sum(log_bessel_i0((eta / a2)[..., None] * x), axis=-1)
    return sum_log_x - n * np.log(a2) - (sum_x2 + n * eta * eta) / (2.0 * a2) + bessel


def log_posterior_array(spec, eta, alpha, x, table=None, sum_x2=None, sum_log_x=None):
    return (log_prior_array(spec, eta, alpha, table)
            + log_likelihood_array(eta, alpha, x, sum_x2, sum_log_x))


def log_posterior(spec, p, s, method="table", table=None):
    """Unnormalised log posterior: log prior plus log-likelihood."""
    x = s.values if isinstance(s, Sample) else np.asarray(s, dtype=float)
    return log_prior(spec, p, method, table) + float(log_likelihood_array(p.eta, p.alpha, x))


# -- propriety -------------------------------------------------------------------


@dataclass(frozen=True)
class ProprietyVerdict:
    status: str
    governing_rule: str
    min_n: int | None
    requires_distinct_data: bool
    boundary_case: bool = False
    note: str = ""

    def to_dict(self):
        return {
            "status": self.status,
            "governing_rule": self.governing_rule,
            "min_n": self.min_n,
            "requires_distinct_data": self.requires_distinct_data,
            "boundary_case": self.boundary_case,
            "note": self.note,
        }


def _smallest_int_above(bound):
    return int(math.floor(bound)) + 1


def check_propriety(spec, n, distinct_data):
    """Decide whether the posterior is proper for ``n`` observations.

    ``distinct_data`` states that the observations are not all equal; with
    fewer than two observations it is treated as false.
    """
    n = int(n)
    distinct = bool(distinct_data) and n >= 2
    r0, r_inf, k = spec.tails
    if r0 <= -1:
        rule = PROP_4_1 if spec.family == POWER else THM_3_1_i
        return ProprietyVerdict(IMPROPER, rule, None, False,
                                note="prior is non-integrable at eta -> 0 (r0 <= -1)")
    boundary = False
    if spec.family == POWER:
        rule = PROP_4_1
        two_eps = 2.0 * spec.epsilon
        min_n = max(2, int(math.ceil(two_eps)))
        # the general theorem asks for n > 2 eps, the power-prior result for n >= 2 eps
        boundary = float(n) == two_eps
        note = "proper for n >= 2*epsilon with distinct data"
    elif spec.family == JEFFREYS:
        rule = PROP_4_2
        min_n = 3
        note = "proper for n > 2 with distinct data (dominated by 1/alpha^2)"
    else:
        rule = THM_3_1_ii
        min_n = max(2, _smallest_int_above(max(2.0 * (r_inf + 1.0), k + 1.0)))
        note = "proper for n > max(2(r_inf+1), k+1) with distinct data"
    if n >= min_n and distinct:
        status = PROPER
    else:
        status = NOT_GUARANTEED
        if not distinct:
            note += "; observations are all equal, the sufficient condition does not apply"
        else:
            note += f"; n = {n} is below the guaranteed range"
    if boundary:
        note += "; n equals 2*epsilon, where the general theorem's strict bound is not met"
    return ProprietyVerdict(status, rule, min_n, True, boundary, note)


def check_moment_finiteness(spec, n, distinct_data):
    """Decide whether the posterior first moments are finite."""
    n = int(n)
    distinct = bool(distinct_data) and n >= 2
    r0, r_inf, k = spec.tails
    if r0 <= -2:
        return ProprietyVerdict(NOT_GUARANTEED, THM_3_2, None, True,
                                note="moment criterion needs r0 > -2")
    if r0 <= -1:
        rule = PROP_4_1 if spec.family == POWER else THM_3_1_i
        return ProprietyVerdict(IMPROPER, rule, None, False,
                                note="the posterior itself is improper, so its moments are undefined")
    min_n = max(2, _smallest_int_above(max(2.0 * (r_inf + 2.0), k + 2.0)))
    if n >= min_n and distinct:
        return ProprietyVerdict(PROPER, THM_3_2, min_n, True,
                                note="first moments finite for n > max(2(r_inf+2), k+2)")
    why = "observations are all equal" if not distinct else f"n = {n} is below the guaranteed range"
    return ProprietyVerdict(NOT_GUARANTEED, THM_3_2, min_n, True, note=why)


# -- numerical corroboration --------------------------------------------------------


@dataclass(frozen=True)
class PosteriorMassEvidence:
    """Unnormalised posterior mass over the boxes ``[1/L, L]^2``.

    ``values`` are scaled by ``exp(-log_scale)``.
    """

    box_sizes: tuple
    values: tuple
    log_scale: float

    def relative_changes(self):
        v = np.asarray(self.values)
        return tuple(np.diff(v) / v[1:])


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _log_axis(bands, width):
    # composite Gauss-Legendre nodes on [-bands[-1], bands[-1]] in log space,
    # with every band edge +-bands[j] a panel boundary
    edges = np.concatenate([-bands[::-1], [0.0], bands])
    nodes, weights, band = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        count = max(1, int(math.ceil((b - a) / width)))
        e = np.linspace(a, b, count + 1)
        mid = 0.5 * (e[:-1] + e[1:])[:, None]
        half = 0.5 * (e[1:] - e[:-1])[:, None]
        nodes.append((mid + half * _GL_NODES).ravel())
        weights.append((half * _GL_WEIGHTS).ravel())
        outer = max(abs(a), abs(b))
        band.append(np.full(nodes[-1].size, int(np.searchsorted(bands, outer - 1e-12))))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(band)


def propriety_evidence(spec, s, box_sizes=(2, 4, 8, 16, 32, 64), panel_width=0.05):
    """Posterior mass over nested boxes ``[1/L, L]^2`` in ``(eta, alpha)``.

    The integral is taken in ``(log eta, log alpha)`` with composite
    8-point Gauss-Legendre panels whose breaks include every box edge, so
    the sequence is nondecreasing by construction.  For a proper posterior
    it levels off; for an improper one it keeps growing with ``L``.
    """
    x = s.values if isinstance(s, Sample) else np.asarray(s, dtype=float)
    box_sizes = tuple(float(v) for v in box_sizes)
    if any(b <= 1 for b in box_sizes) or list(box_sizes) != sorted(box_sizes):
        raise DomainError("box sizes must be increasing and greater than 1")
    bands = np.log(np.asarray(box_sizes))
    u, wu, bu = _log_axis(bands, panel_width)
    eta = np.exp(u)
    sum_x2 = float(np.sum(x * x))
    sum_log_x = float(np.sum(np.log(x)))
    logf = np.empty((u.size, u.size))
    for i, v in enumerate(u):
        alpha = math.exp(v)
        logf[:, i] = (log_posterior_array(spec, eta, np.full_like(eta, alpha), x,
                                          sum_x2=sum_x2, sum_log_x=sum_log_x)
                      + u + v)
    if not np.all(np.isfinite(logf)):
        raise DomainError("log posterior is not finite on the integration grid")
    scale = float(logf.max())
    mass = np.exp(logf - scale) * wu[:, None] * wu[None, :]
    band = np.maximum(bu[:, None], bu[None, :])
    per_band = np.bincount(band.ravel(), weights=mass.ravel(), minlength=bands.size)
    return PosteriorMassEvidence(box_sizes, tuple(np.cumsum(per_band)), scale)
