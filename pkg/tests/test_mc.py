"""Replica harness determinism and statistics plumbing."""

import numpy as np
import pytest
from scipy import stats

from growthlab.mc import (
    InsufficientSampleError,
    fit_power_exponent,
    ks_test,
    ks_test_two_sample,
    run_replicas,
)


class TestRunReplicas:
    def test_constant_experiment(self):
        est = run_replicas(lambda gen: 3.5, reps=10, base_seed=1)
        assert est.mean == 3.5
        assert est.stderr == 0.0

    def test_exponential_mean(self):
        est = run_replicas(lambda gen: gen.exponential(), reps=10_000, base_seed=2)
        assert abs(est.mean - 1.0) <= 3 * est.stderr

    def test_bit_identical_rerun(self):
        a = run_replicas(lambda gen: gen.normal(), reps=64, base_seed=3)
        b = run_replicas(lambda gen: gen.normal(), reps=64, base_seed=3)
        assert a == b

    def test_scheduling_independence(self):
        exp = lambda gen: float(gen.normal() + gen.exponential())
        results = [run_replicas(exp, reps=40, base_seed=4, workers=w) for w in (1, 4, 16)]
        assert results[0] == results[1] == results[2]

    def test_error_annotated_with_replica(self):
        def bad(gen):
            if gen.random() < 2:  # always
                raise ValueError("boom")
            return 0.0

        with pytest.raises(RuntimeError, match="replica 0"):
            run_replicas(bad, reps=3, base_seed=5)

    def test_stream_independence_lag1(self):
        n = 400
        draws = np.array(
            [run_replicas(lambda gen: gen.normal(), reps=1, base_seed=6 + i).mean for i in range(n)]
        )
        corr = np.corrcoef(draws[:-1], draws[1:])[0, 1]
        assert abs(corr) <= 3.0 / np.sqrt(n)


class TestKS:
    def test_uniform_null(self):
        gen = np.random.default_rng(7)
        rejections = 0
        for _ in range(50):
            res = ks_test(gen.random(10_000), lambda x: np.clip(x, 0, 1))
            if res.p_value <= 0.01:
                rejections += 1
        assert rejections <= 2  # ~1% expected rejection rate

    def test_power_against_wrong_rate(self):
        gen = np.random.default_rng(8)
        samples = gen.exponential(scale=0.5, size=5000)  # Exp(2)
        res = ks_test(samples, lambda x: 1.0 - np.exp(-np.clip(x, 0, None)))  # Exp(1) cdf
        assert res.p_value < 1e-3

    def test_insufficient(self):
        with pytest.raises(InsufficientSampleError):
            ks_test([0.1, 0.2], lambda x: x)

    def test_two_sample(self):
        gen = np.random.default_rng(9)
        res = ks_test_two_sample(gen.normal(size=2000), gen.normal(size=2000))
        assert res.p_value > 0.01
        res2 = ks_test_two_sample(gen.normal(size=2000), gen.normal(loc=0.5, size=2000))
        assert res2.p_value < 1e-3

    def test_scipy_gamma_cdf_route(self):
        gen = np.random.default_rng(10)
        res = ks_test(gen.gamma(0.8, size=10_000), lambda x: stats.gamma.cdf(x, a=0.8))
        assert res.p_value > 0.01


class TestPowerFit:
    def test_exact_power_three_halves(self):
        xs = np.logspace(-3, -1, 9)
        slope, r2 = fit_power_exponent(xs, xs**1.5)
        assert slope == pytest.approx(1.5, abs=1e-10)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_square(self):
        xs = np.linspace(0.5, 2.0, 11)
        slope, _ = fit_power_exponent(xs, xs**2)
        assert slope == pytest.approx(2.0, abs=1e-10)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            fit_power_exponent([1.0, 2.0, 3.0, 4.0, 5.0], [1.0, -1.0, 1.0, 1.0, 1.0])
        with pytest.raises(InsufficientSampleError):
            fit_power_exponent([1.0, 2.0], [1.0, 2.0])
