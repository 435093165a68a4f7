"""Exactly solvable polymer: Burke structure, free energy, rate functions."""

import math

import numpy as np
import pytest
from scipy import stats

from growthlab.convex import GridFunction, LogMgf, cramer_one_sided, legendre
from growthlab.env import RngSpec, sample_loggamma_grid
from growthlab.lattice import log_partition
from growthlab.loggamma import (
    LogGammaParams,
    RateQuery,
    boundary_rate,
    burke_cell,
    burke_propagate,
    cramer_rate,
    cube_root_expansion_exponent,
    dual_rate,
    exit_decomposition_residual,
    free_endpoint_rate,
    free_energy,
    kappa_star,
    log_weight_mgf,
    point_rate,
    stationary_mean_logZ,
)
from growthlab.specfun import digamma, log_gamma, trigamma

TWO_GAMMA = 1.1544313298030658  # -2 psi0(1)


class TestBurke:
    def test_cell_algebra(self):
        y = 1.7
        u2, v2, x = burke_cell(y, y, y)
        assert u2 == pytest.approx(2 * y)
        assert v2 == pytest.approx(2 * y)
        # Pre-update pair: X = UV/(U+V); the post-update pair returns Y.
        assert x == pytest.approx(y / 2)
        assert 1.0 / (1.0 / u2 + 1.0 / v2) == pytest.approx(y)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            burke_cell(1.0, -1.0, 1.0)

    def test_ratio_identities_vs_dp(self):
        # U_{m,n} = Z_{m,n} / Z_{m-1,n}, V analog; algebraic, distribution-free.
        rng = np.random.default_rng(40)
        m = n = 5
        U0 = rng.uniform(0.5, 2.0, size=m)
        V0 = rng.uniform(0.5, 2.0, size=n)
        Y = rng.uniform(0.5, 2.0, size=(m, n))
        U, V, X = burke_propagate(U0, V0, Y)
        W = np.empty((m + 1, n + 1))
        W[0, 0] = 1.0
        W[1:, 0] = U0
        W[0, 1:] = V0
        W[1:, 1:] = Y
        lz = log_partition(np.log(W), beta=1.0).values
        for i in range(1, m + 1):
            for j in range(1, n + 1):
                assert math.log(U[i - 1, j]) == pytest.approx(lz[i, j] - lz[i - 1, j], abs=1e-10)
                assert math.log(V[i, j - 1]) == pytest.approx(lz[i, j] - lz[i, j - 1], abs=1e-10)

    def test_burke_marginals_down_right_path(self):
        # mu=2, theta=0.8: U along the top row of a 100x100 block stays
        # inverse-Gamma(0.8); X over the block is inverse-Gamma(2).
        mu, theta = 2.0, 0.8
        grid = sample_loggamma_grid(mu, theta, 100, 100, True, RngSpec(41, 0))
        U0 = grid.values[1:, 0]
        V0 = grid.values[0, 1:]
        Y = grid.values[1:, 1:]
        U, V, X = burke_propagate(U0, V0, Y)
        res_u = stats.kstest(1.0 / U[:, -1], lambda x: stats.gamma.cdf(x, a=theta))
        assert res_u.pvalue > 0.01
        res_x = stats.kstest(1.0 / X.ravel(), lambda x: stats.gamma.cdf(x, a=mu))
        assert res_x.pvalue > 0.01

    def test_stationary_mean_formula(self):
        p = LogGammaParams(2.0, 0.8)
        assert stationary_mean_logZ(0, 0, p) == 0.0
        assert stationary_mean_logZ(1, 0, p) == pytest.approx(-digamma(0.8))
        assert stationary_mean_logZ(200, 200, p) == pytest.approx(
            -200 * (digamma(0.8) + digamma(1.2))
        )

    def test_stationary_mean_vs_simulation(self):
        mu, theta, m, n = 2.0, 0.8, 40, 40
        reps = 200
        vals = np.empty(reps)
        for r in range(reps):
            g = sample_loggamma_grid(mu, theta, m, n, True, RngSpec(42, r))
            vals[r] = log_partition(np.log(g.values), 1.0).values[m, n]
        se = vals.std(ddof=1) / math.sqrt(reps)
        expect = stationary_mean_logZ(m, n, LogGammaParams(mu, theta))
        assert abs(vals.mean() - expect) <= 3 * se


class TestFreeEnergy:
    def test_symmetric_point(self):
        assert free_energy(1.0, 1.0, 2.0) == pytest.approx(TWO_GAMMA, abs=1e-10)

    def test_homogeneity(self):
        for s, t in [(1.0, 1.0), (0.7, 2.2)]:
            assert free_energy(2 * s, 2 * t, 2.0) == pytest.approx(
                2 * free_energy(s, t, 2.0), abs=1e-10
            )

    def test_asymmetric_vs_grid_minimization(self):
        # The root of 4 psi1(2-th) = psi1(th) is the stationary point of
        # -(s psi0(th) + t psi0(mu-th)); cross-check by direct grid search.
        s, t, mu = 1.0, 4.0, 2.0
        ths = np.linspace(1e-4, mu - 1e-4, 200001)
        vals = -(s * digamma(ths) + t * digamma(mu - ths))
        assert free_energy(s, t, mu) == pytest.approx(vals.min(), abs=1e-7)
        assert free_energy(s, t, mu) == pytest.approx(1.7786312590634682, abs=1e-9)

    def test_boundary_convention(self):
        assert free_energy(0.0, 1.5, 2.0) == pytest.approx(-1.5 * digamma(2.0))

    def test_concavity_wrt_direction(self):
        ss = np.linspace(0.1, 0.9, 17)
        vals = np.array([free_energy(s, 1 - s, 2.0) for s in ss])
        assert np.max(np.diff(vals, 2)) <= 1e-9
        assert np.argmax(vals) == len(ss) // 2


class TestCramerAndBoundary:
    def test_zero_at_mean(self):
        for mu in (0.7, 2.0, 3.5):
            assert cramer_rate(-digamma(mu), mu) == pytest.approx(0.0, abs=1e-10)

    def test_convexity(self):
        rs = np.linspace(-2.0, 3.0, 101)
        vals = np.array([cramer_rate(r, 2.0) for r in rs])
        assert np.min(np.diff(vals, 2)) >= -1e-8

    def test_dual_route_via_cramer_one_sided(self):
        # I_2(0) from the formula vs sup_u { -M(u) } on the dual side.
        M = LogMgf(lambda u: log_gamma(2.0 - u) - log_gamma(2.0), u_max=2.0)
        via_dual = cramer_one_sided(M, 0.0, "upper")
        assert cramer_rate(0.0, 2.0) == pytest.approx(via_dual, abs=1e-6)
        assert cramer_rate(0.0, 2.0) == pytest.approx(0.12148629053585, abs=1e-9)

    def test_boundary_rate_branches(self):
        assert boundary_rate(1.0, -digamma(2.0), 2.0) == pytest.approx(0.0, abs=1e-10)
        assert boundary_rate(0.0, 1.0, 2.0) == 2.0
        assert boundary_rate(0.0, -0.5, 2.0) == 0.0
        assert boundary_rate(2.0, -3.0, 2.0) == 0.0

    def test_boundary_small_x_continuity(self):
        # x -> 0 with r = 0.5 fixed: limit r*mu = 1, per x log Gamma(psi0^{-1}) -> 0.
        assert boundary_rate(1e-4, 0.5, 2.0) == pytest.approx(1.0, abs=5e-3)


class TestPointRate:
    def test_zero_set(self):
        assert point_rate(1.0, 1.0, TWO_GAMMA, 2.0) <= 1e-10
        assert point_rate(1.0, 1.0, TWO_GAMMA - 0.1, 2.0) == 0.0
        assert point_rate(1.0, 1.0, TWO_GAMMA + 0.05, 2.0) > 1e-6

    def test_symmetry(self):
        for r in np.linspace(0.8, 3.2, 50):
            assert abs(point_rate(1.0, 2.0, r, 2.0) - point_rate(2.0, 1.0, r, 2.0)) <= 1e-6

    def test_value_pinned_by_refined_grid_oracle(self):
        # Oracle: direct nested optimization on 10x finer grids.
        mu, r = 2.0, TWO_GAMMA + 0.5
        xis = np.linspace(0.0, mu - 1e-6, 5121)
        ths = np.linspace(0.0, 1.0, 2001)

        def inner(xi):
            lo = 0.5 * (mu + xi)
            hi = mu - 1e-8
            th = lo + (hi - lo) * ths
            v = (log_gamma(th - xi) - log_gamma(th)) - (log_gamma(mu - th + xi) - log_gamma(mu - th))
            return v.min()

        vals = np.array([r * xi - inner(xi) for xi in xis])
        oracle = vals.max()
        assert point_rate(1.0, 1.0, r, mu) == pytest.approx(oracle, abs=5e-6)

    def test_convex_nondecreasing(self):
        rs = np.linspace(TWO_GAMMA - 0.3, TWO_GAMMA + 2.0, 60)
        vals = np.array([point_rate(1.0, 1.0, r, 2.0) for r in rs])
        assert np.all(np.diff(vals) >= -1e-12)
        assert np.min(np.diff(vals, 2)) >= -1e-8

    def test_axis_delegates_to_boundary(self):
        assert point_rate(0.0, 2.0, 1.0, 2.0) == pytest.approx(boundary_rate(2.0, 1.0, 2.0))

    def test_query_validation(self):
        with pytest.raises(ValueError):
            RateQuery(0.0, 0.0, 1.0, 2.0)
        with pytest.raises(ValueError):
            RateQuery(1.0, 1.0, 1.0, 2.0, xi=2.5)


class TestFreeEndpointRate:
    def test_zero_at_free_energy(self):
        assert free_endpoint_rate(2.0, TWO_GAMMA, 2.0) <= 1e-10

    def test_minimizes_over_split(self):
        s, mu = 2.0, 2.0
        for r in (TWO_GAMMA + 0.3, TWO_GAMMA + 1.0):
            fr = free_endpoint_rate(s, r, mu)
            for a in np.linspace(0.1 * s, 0.9 * s, 9):
                assert fr <= point_rate(a, s - a, r, mu) + 1e-6

    def test_monotone_in_r(self):
        rs = np.linspace(0.5, 3.0, 26)
        vals = [free_endpoint_rate(2.0, r, 2.0) for r in rs]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestDualRate:
    def test_zero_at_zero(self):
        assert dual_rate(1.0, 1.0, 0.0, 2.0) == 0.0

    def test_slope_at_zero_is_free_energy(self):
        xi = 1e-3
        slope = dual_rate(1.0, 1.0, xi, 2.0) / xi
        assert slope == pytest.approx(free_energy(1.0, 1.0, 2.0), abs=1e-3)

    def test_axis_closed_form(self):
        assert dual_rate(0.0, 1.5, 0.4, 2.0) == pytest.approx(
            1.5 * log_weight_mgf(2.0, 0.4), abs=1e-12
        )

    def test_legendre_roundtrip(self):
        # legendre(J* as a function of xi) recovers J on the interior.
        mu = 2.0
        xis = np.linspace(0.0, mu - 0.05, 401)
        jstar = np.array([dual_rate(1.0, 1.0, x, mu) for x in xis])
        f = GridFunction(xis, jstar)
        rs = np.linspace(TWO_GAMMA - 0.2, TWO_GAMMA + 1.5, 35)
        jj = legendre(f, rs)
        for r, v in zip(rs, jj.ys):
            assert abs(v - point_rate(1.0, 1.0, r, mu)) <= 5e-3

    def test_divergence_guard(self):
        with pytest.raises(ValueError):
            dual_rate(1.0, 1.0, 2.0, 2.0)


class TestKappaStar:
    def test_zero_coefficient_at_minus_t(self):
        assert kappa_star(-1.0, 1.0, 1.0, 0.0, 2.0, 0.8) == 0.0

    def test_first_branch_value(self):
        # a=0, xi=0.3, mu=2, theta=0.8, t=1: (t+a)(logG(1.5) - logG(1.2)).
        v = kappa_star(0.0, 1.0, 1.0, 0.3, 2.0, 0.8)
        assert v == pytest.approx(log_gamma(1.5) - log_gamma(1.2), abs=1e-12)
        assert v == pytest.approx(-0.03540814763192937, abs=1e-10)

    def test_infinite_sentinel(self):
        assert kappa_star(0.5, 1.0, 1.0, 0.9, 2.0, 0.8) == np.inf

    def test_domain(self):
        with pytest.raises(ValueError):
            kappa_star(2.0, 1.0, 1.0, 0.2, 2.0, 0.8)


class TestExitDecomposition:
    def test_zero_at_xi_zero(self):
        assert exit_decomposition_residual(1.0, 1.0, 0.0, 1.3, 2.0) == 0.0

    def test_residual_small(self):
        assert exit_decomposition_residual(1.0, 1.0, 0.2, 1.3, 2.0) <= 5e-3
        assert exit_decomposition_residual(2.0, 1.0, 0.5, 2.0, 3.0) <= 5e-3


class TestCubeRootExpansion:
    def test_fitted_exponent(self):
        slope, r2, r0 = cube_root_expansion_exponent()
        assert 1.35 <= slope <= 1.65
        assert r2 > 0.999
        assert point_rate(1.0, 1.0, r0, 2.0) <= 1e-8
        assert point_rate(1.0, 1.0, r0 - 0.1, 2.0) == 0.0


class TestAgainstSimulation:
    def test_free_energy_single_run(self):
        # n = 400, mu = 2, s = t = 1: fluctuations are O(n^{-1/3}).
        n, mu = 400, 2.0
        g = sample_loggamma_grid(mu, None, n, n, False, RngSpec(47, 0))
        lz = log_partition(np.log(g.values), 1.0).values[n, n]
        assert abs(lz / n - TWO_GAMMA) <= 0.05
