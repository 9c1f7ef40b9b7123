import math

import numpy as np
import pytest
from scipy import stats

from ricebayes import mcmc
from ricebayes.classical import mm_estimate
from ricebayes.errors import DomainError, ImproperPosteriorError, RiceBayesError
from ricebayes.mcmc import (
    Chain,
    McmcConfig,
    autocorrelation,
    chain_generators,
    geweke_z,
    initial_values,
    log_hastings_ratio,
    metropolis_within_gibbs,
    run_batch,
    run_chain,
    summarize,
)
from ricebayes.model import RicianParams, Sample, sample
from ricebayes.priors import PriorSpec

SHORT = dict(iterations=2_500, burn_in=500, thin=2)


class IdentityProposals:
    """Stand-in generator whose Gamma draws equal their shape: proposal == current."""

    def standard_gamma(self, shape, size):
        return np.full(size, float(shape))

    def random(self, size):
        return np.full(size, 0.999999)


class TestHastings:
    @pytest.mark.parametrize("d", [1.0, 100.0, 1e4])
    def test_identity_proposal(self, d):
        assert log_hastings_ratio(3.7, 3.7, d) == 0.0

    def test_matches_gamma_densities(self):
        d, cur, prop = 40.0, 2.0, 2.6
        q = lambda a, b: stats.gamma.logpdf(a, d, scale=b / d)
        assert log_hastings_ratio(cur, prop, d) == pytest.approx(q(cur, prop) - q(prop, cur), rel=1e-12)

    def test_identity_proposals_always_accepted(self):
        target = lambda e, a: -(e - 1) ** 2 - (a - 3) ** 2
        draws, acc_e, acc_a = metropolis_within_gibbs(
            target, np.array([[5.0, 0.5]]), [IdentityProposals()], 100)
        np.testing.assert_array_equal(acc_e, 1.0)
        np.testing.assert_array_equal(acc_a, 1.0)
        assert np.all(draws == np.array([5.0, 0.5]))


class TestKernel:
    def test_gamma_target_moments(self):
        # independent Gamma(3, rate 2) x Gamma(5, rate 1) target
        def target(e, a):
            return 2.0 * np.log(e) - 2.0 * e + 4.0 * np.log(a) - a

        chains = 20
        draws, _, _ = metropolis_within_gibbs(
            target, np.tile([1.5, 5.0], (chains, 1)), chain_generators(5, chains),
            iterations=5_500, burn_in=500, thin=1, d_eta=4.0, d_alpha=4.0)
        for j, (mean, var) in enumerate([(1.5, 0.75), (5.0, 5.0)]):
            x = draws[:, :, j]
            # independent chains give an honest standard error of the pooled mean
            se_mean = x.mean(axis=1).std(ddof=1) / math.sqrt(chains)
            assert abs(x.mean() - mean) < 3 * se_mean
            v = x.var(axis=1)
            se_var = v.std(ddof=1) / math.sqrt(chains)
            assert abs(v.mean() - var) < 3 * se_var + var * 1e-3

    def test_rejects_nonfinite_start(self):
        with pytest.raises(RiceBayesError):
            metropolis_within_gibbs(lambda e, a: np.full(e.shape, np.nan),
                                    np.array([[1.0, 1.0]]), chain_generators(0, 1), 10)

    def test_rejects_nonpositive_start(self):
        with pytest.raises(DomainError):
            metropolis_within_gibbs(lambda e, a: -e, np.array([[0.0, 1.0]]), chain_generators(0, 1), 10)

    def test_nan_proposals_rejected(self):
        target = lambda e, a: np.where(e > 2.0, np.nan, -e - a)
        draws, _, _ = metropolis_within_gibbs(target, np.array([[1.0, 1.0]]),
                                              chain_generators(3, 1), 2_000, d_eta=2.0)
        assert np.all(draws[:, :, 0] <= 2.0)


class TestConfig:
    def test_defaults(self):
        cfg = McmcConfig()
        assert (cfg.iterations, cfg.burn_in, cfg.thin, cfg.chains) == (50_500, 500, 5, 2)
        assert cfg.draws_per_chain == 10_000
        assert cfg.prior == PriorSpec.jeffreys()

    @pytest.mark.parametrize("kw", [dict(iterations=10, burn_in=10), dict(thin=0), dict(chains=0),
                                    dict(d_eta=0.0), dict(burn_in=-1)])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            McmcConfig(**kw)


class TestRunChain:
    @pytest.fixture(scope="class")
    @staticmethod
    def data():
        return sample(RicianParams(6, 2), 35, 2)

    @pytest.fixture(scope="class")
    @staticmethod
    def chain(data):
        return run_chain(data, McmcConfig(seed=4, **SHORT))

    def test_shape_and_positivity(self, chain):
        assert chain.draws.shape == (2, 1_000, 2)
        assert np.all(chain.draws > 0)
        assert len(chain) == 2_000

    def test_deterministic(self, data, chain):
        again = run_chain(data, McmcConfig(seed=4, **SHORT))
        np.testing.assert_array_equal(again.draws, chain.draws)

    def test_chains_differ(self, chain):
        assert not np.array_equal(chain.draws[0], chain.draws[1])

    def test_seed_changes_draws(self, data, chain):
        other = run_chain(data, McmcConfig(seed=5, **SHORT))
        assert not np.array_equal(other.draws, chain.draws)

    def test_offset_invariance(self, data, chain):
        shifted = run_chain(data, McmcConfig(seed=4, **SHORT), log_offset=1000.0)
        np.testing.assert_array_equal(shifted.draws, chain.draws)

    def test_acceptance_rates(self, chain):
        assert np.all((chain.accept_rate_eta > 0) & (chain.accept_rate_eta < 1))
        assert np.all((chain.accept_rate_alpha > 0) & (chain.accept_rate_alpha < 1))

    def test_iterations_recorded(self, chain):
        its = chain.iterations()
        assert its[0] == 502 and its[-1] == 2_500

    def test_gate_runs_before_sampling(self, data, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("sampler must not start")

        monkeypatch.setattr(mcmc, "metropolis_within_gibbs", boom)
        with pytest.raises(ImproperPosteriorError) as info:
            run_chain(data, McmcConfig(prior=PriorSpec.power(-1), **SHORT))
        assert info.value.verdict.status == "IMPROPER"
        with pytest.raises(ImproperPosteriorError):
            run_chain(Sample([2.0, 3.0]), McmcConfig(**SHORT))

    def test_override(self, data):
        c = run_chain(data, McmcConfig(prior=PriorSpec.power(0), seed=1, **SHORT), allow_improper=True)
        assert np.all(c.draws > 0)

    def test_accepts_raw_values(self, data):
        c = run_chain(data.values, McmcConfig(seed=4, **SHORT))
        assert c.draws.shape == (2, 1_000, 2)

    def test_batch_member_matches_lone_run(self, data):
        cfg = McmcConfig(chains=1, **SHORT)
        other = sample(RicianParams(6, 2), 35, 99)
        seeds = [np.random.SeedSequence(11), np.random.SeedSequence(12)]
        together = run_batch([data, other], cfg, seeds)
        alone = run_batch([other], cfg, [np.random.SeedSequence(12)])
        np.testing.assert_array_equal(together[1].draws, alone[0].draws)

    def test_batch_validation(self, data):
        cfg = McmcConfig(chains=1, **SHORT)
        with pytest.raises(DomainError):
            run_batch([data], cfg, [1, 2])
        with pytest.raises(DomainError):
            run_batch([data, Sample(data.values[:10])], cfg, [1, 2])


class TestInitialValues:
    def test_moment_start(self):
        s = sample(RicianParams(6, 2), 50, 1)
        est = mm_estimate(s)
        assert initial_values(s) == (est.eta_hat, est.alpha_hat)

    def test_fallback_start(self):
        s = sample(RicianParams(0, 1), 10, 0)
        eta, alpha = initial_values(s)
        med = float(np.median(s.values))
        assert eta == med
        assert alpha > 0
        if s.moment(2) / 2 - med ** 2 / 2 > 0:
            assert alpha == pytest.approx(math.sqrt(s.moment(2) / 2 - med ** 2 / 2))


class TestGeweke:
    def test_null_calibration(self):
        root = np.random.SeedSequence(2024)
        hits = 0
        for child in root.spawn(500):
            z = geweke_z(np.random.default_rng(child).standard_normal(10_000))
            hits += abs(z) < 1.96
        assert 0.92 <= hits / 500 <= 0.98

    def test_detects_shift(self, rng):
        x = rng.standard_normal(10_000)
        x[:5_000] += 5.0
        assert abs(geweke_z(x)) > 10

    def test_constant(self):
        with pytest.raises(DomainError):
            geweke_z(np.ones(1_000))

    def test_too_short(self):
        with pytest.raises(DomainError):
            geweke_z(np.arange(50.0))

    @pytest.mark.parametrize("a,b", [(0.0, 0.5), (0.6, 0.5), (0.1, 1.0)])
    def test_fractions(self, a, b, rng):
        with pytest.raises(DomainError):
            geweke_z(rng.standard_normal(500), a, b)


class TestAutocorrelation:
    def test_lag_zero(self, rng):
        assert autocorrelation(rng.standard_normal(100), 5)[0] == 1.0

    def test_white_noise(self, rng):
        acf = autocorrelation(rng.standard_normal(100_000), 50)
        assert np.all(np.abs(acf[1:]) < 0.02)

    def test_ar1(self, rng):
        n = 100_000
        e = rng.standard_normal(n)
        x = np.empty(n)
        x[0] = e[0] / math.sqrt(1 - 0.64)
        for t in range(1, n):
            x[t] = 0.8 * x[t - 1] + e[t]
        acf = autocorrelation(x, 10)
        np.testing.assert_allclose(acf, 0.8 ** np.arange(11), atol=0.02)

    def test_biased_estimator(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        # divide-by-n: lag 1 sum is -3, lag 0 sum is 4
        assert autocorrelation(x, 1)[1] == pytest.approx(-0.75)

    def test_errors(self, rng):
        with pytest.raises(DomainError):
            autocorrelation(np.ones(10), 2)
        with pytest.raises(DomainError):
            autocorrelation(rng.standard_normal(10), 10)


class TestSummarize:
    def test_constant_chain(self):
        c = Chain(np.tile([3.0, 0.5], (1, 40, 1)), np.array([0.5]), np.array([0.5]))
        s = summarize(c)
        assert (s.eta.mean, s.eta.median, s.eta.lower, s.eta.upper) == pytest.approx((3.0,) * 4)
        assert s.eta.sd == pytest.approx(0.0, abs=1e-15)
        assert s.alpha.point == pytest.approx(0.5)

    def test_quantile_convention(self):
        seq = np.arange(1.0, 101.0)
        draws = np.stack([seq, seq], axis=-1)[None]
        s = summarize(Chain(draws, np.ones(1), np.ones(1)), level=0.9)
        assert (s.eta.lower, s.eta.upper) == pytest.approx((5.95, 95.05), abs=1e-12)

    def test_point_rules(self, rng):
        draws = rng.gamma(2.0, 1.0, size=(2, 500, 2))
        s = summarize(Chain(draws, np.ones(2), np.ones(2)))
        assert s.eta.point == s.eta.median == pytest.approx(np.median(draws[:, :, 0]))
        assert s.alpha.point == s.alpha.mean == pytest.approx(np.mean(draws[:, :, 1]))
        assert s.eta.lower <= s.eta.median <= s.eta.upper

    def test_empty(self):
        with pytest.raises(DomainError):
            summarize(Chain(np.empty((1, 0, 2)), np.ones(1), np.ones(1)))

    def test_level(self):
        c = Chain(np.ones((1, 5, 2)), np.ones(1), np.ones(1))
        with pytest.raises(DomainError):
            summarize(c, level=1.0)


class TestShippedDataRun:
    def test_geweke_and_acceptance(self, table1_run):
        report, chain, _ = table1_run
        diag = report["diagnostics"]
        for name in ("eta", "alpha"):
            assert all(abs(z) < 1.96 for z in diag["geweke"][name])
            assert all(0 < a < 1 for a in diag["acceptance"][name])
        assert chain.draws.shape == (2, 10_000, 2)
