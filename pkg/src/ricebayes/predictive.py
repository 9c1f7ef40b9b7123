"""Posterior predictive draws: one new observation per posterior draw."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mcmc import equal_tailed
from .model import draw


@dataclass(frozen=True, eq=False)
class PredictiveDraws:
    values: np.ndarray
    source: object = None

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class PredictiveSummary:
    mean: float
    sd: float
    lower: float
    upper: float
    level: float

    def to_dict(self):
        return {"level": self.level, "mean": self.mean, "sd": self.sd,
                "interval": [self.lower, self.upper]}


def draw_predictive(c, seed):
    """Draw ``y_new ~ Rice(eta_j, alpha_j)`` for every kept draw of ``c``."""
    if len(c) == 0:
        raise DomainError("empty chain")
    eta, alpha = c.eta, c.alpha
    if np.any(alpha <= 0) or np.any(eta < 0):
        raise DomainError("chain holds invalid parameter draws")
    rng = np.random.default_rng(seed)
    values = draw(eta, alpha, eta.size, rng)
    values.setflags(write=False)
    return PredictiveDraws(values, c)


def predictive_summary(d, level=0.95):
    """Mean, standard deviation and equal-tailed interval of the draws."""
    v = np.asarray(d.values if isinstance(d, PredictiveDraws) else d, dtype=float)
    if v.size == 0:
        raise DomainError("no predictive draws")
    lo, hi = equal_tailed(v, level)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return PredictiveSummary(float(v.mean()), sd, lo, hi, float(level))
