import math

import numpy as np
import pytest
from scipy.special import hyp1f1

from ricebayes.errors import DomainError
from ricebayes.mcmc import Chain, summarize
from ricebayes.model import draw
from ricebayes.predictive import PredictiveDraws, draw_predictive, predictive_summary


def rice_mean(eta, alpha):
    """Closed-form Rician mean, alpha sqrt(pi/2) 1F1(-1/2; 1; -eta^2 / (2 alpha^2))."""
    return alpha * math.sqrt(math.pi / 2) * hyp1f1(-0.5, 1.0, -eta ** 2 / (2 * alpha ** 2))


def constant_chain(eta, alpha, m):
    return Chain(np.tile([eta, alpha], (1, m, 1)), np.ones(1), np.ones(1))


class TestDrawPredictive:
    def test_identical_draws_reduce_to_rice(self):
        d = draw_predictive(constant_chain(6.0, 2.0, 100_000), seed=3)
        x2 = d.values ** 2
        se = x2.std() / math.sqrt(x2.size)
        assert abs(x2.mean() - 44.0) < 4 * se

    def test_one_per_posterior_draw(self, table1_run):
        _, chain, _ = table1_run
        d = draw_predictive(chain, seed=1)
        assert len(d) == len(chain)
        assert np.all(d.values > 0)
        assert d.source is chain

    def test_deterministic(self, table1_run):
        _, chain, _ = table1_run
        np.testing.assert_array_equal(draw_predictive(chain, 5).values,
                                      draw_predictive(chain, 5).values)
        assert not np.array_equal(draw_predictive(chain, 5).values,
                                  draw_predictive(chain, 6).values)

    def test_empty_chain(self):
        with pytest.raises(DomainError):
            draw_predictive(Chain(np.empty((1, 0, 2)), np.ones(1), np.ones(1)), 1)


class TestPredictiveSummary:
    def test_constant(self):
        s = predictive_summary(PredictiveDraws(np.full(30, 4.2)))
        assert (s.mean, s.lower, s.upper) == pytest.approx((4.2, 4.2, 4.2))
        assert s.sd == pytest.approx(0.0, abs=1e-14)

    def test_quantile_convention(self):
        s = predictive_summary(np.arange(1.0, 101.0), level=0.9)
        assert (s.lower, s.upper) == pytest.approx((5.95, 95.05), abs=1e-12)

    def test_empty(self):
        with pytest.raises(DomainError):
            predictive_summary(np.array([]))

    def test_dict(self):
        d = predictive_summary(np.arange(1.0, 11.0)).to_dict()
        assert set(d) == {"level", "mean", "sd", "interval"}


class TestPosteriorPredictiveProperties:
    def test_dispersion_dominates_plug_in(self, table1_run):
        _, chain, _ = table1_run
        post = summarize(chain)
        m = len(chain)
        for seed in range(20):
            pred = draw_predictive(chain, seed).values
            plug = draw(post.eta.point, post.alpha.point, m, np.random.default_rng(1_000 + seed))
            # standard error of a sample standard deviation, normal approximation
            se = plug.std() / math.sqrt(2 * (m - 1))
            assert pred.std() >= plug.std() - 2 * se

    def test_mean_matches_mixture(self, table1_run):
        _, chain, _ = table1_run
        pred = draw_predictive(chain, 42).values
        oracle = np.mean([rice_mean(e, a) for e, a in zip(chain.eta, chain.alpha)])
        se = pred.std() / math.sqrt(pred.size)
        assert abs(pred.mean() - oracle) < 4 * se
