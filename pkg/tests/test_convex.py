"""Grid-based convex analysis: transforms, convolutions, one-sided rates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growthlab.convex import (
    DivergenceError,
    EmptyDomainError,
    GridFunction,
    LogMgf,
    cramer_one_sided,
    golden_max,
    inf_convolve,
    legendre,
)
from growthlab.specfun import digamma, log_gamma


def quad(lo=-5.0, hi=5.0, n=2001):
    xs = np.linspace(lo, hi, n)
    return GridFunction(xs, 0.5 * xs**2)


class TestGridFunction:
    def test_validation(self):
        with pytest.raises(ValueError):
            GridFunction(np.array([0.0, 0.0, 1.0]), np.zeros(3))
        with pytest.raises(ValueError):
            GridFunction(np.array([0.0, 1.0, 2.0]), np.array([1.0, np.inf, 2.0]))
        with pytest.raises(EmptyDomainError):
            GridFunction(np.array([0.0, 1.0]), np.array([np.inf, np.inf]))

    def test_edge_inf_allowed_and_domain_recorded(self):
        g = GridFunction(np.array([-1.0, 0.0, 1.0]), np.array([np.inf, 0.0, np.inf]))
        assert g.domain_lo == 0.0 and g.domain_hi == 0.0

    def test_interpolation(self):
        f = quad()
        assert f(0.25) == pytest.approx(0.5 * 0.25**2, abs=1e-5)
        assert f(7.0) == np.inf


class TestLegendre:
    def test_self_dual_quadratic(self):
        f = quad()
        rs = np.linspace(-3.0, 3.0, 241)
        fstar = legendre(f, rs)
        assert np.max(np.abs(fstar.ys - 0.5 * rs**2)) <= 1e-3

    def test_abs_value_dual(self):
        xs = np.linspace(-5.0, 5.0, 4001)
        f = GridFunction(xs, np.abs(xs))
        rs = np.linspace(-1.0, 1.0, 81)
        fstar = legendre(f, rs)
        # Dual of |x| vanishes on [-1, 1]; outside that interval the dual of the
        # grid-restricted function grows like (|r| - 1) * domain_edge.
        assert np.max(np.abs(fstar.ys)) <= 1e-12
        out = legendre(f, np.array([2.0, 3.0]))
        assert out.ys[0] == pytest.approx(5.0, abs=1e-3)

    def test_tasep_flux_negated_convention(self):
        # g(y) = sup_rho { f(rho) - y rho } with f = rho(1-rho) on [0,1]:
        # the middle branch (1-y)^2/4, in particular g(0) = 1/4.
        rho = np.linspace(0.0, 1.0, 4001)
        f = GridFunction(rho, -(rho * (1.0 - rho)))
        rs = np.linspace(-1.0, 1.0, 41)
        g = legendre(f, rs)  # sup{f - y rho} = sup{r rho - (-f)} at r = -y
        ys = -rs
        assert g.ys[np.argmin(np.abs(ys))] == pytest.approx(0.25, abs=1e-6)
        assert np.max(np.abs(g.ys - 0.25 * (1.0 - ys) ** 2)) <= 1e-3

    def test_double_duality_recovers_convex_function(self):
        f = quad(-4.0, 4.0, 1601)
        rs = np.linspace(-6.0, 6.0, 1601)
        fstar = legendre(f, rs)
        fss = legendre(fstar, f.xs[(f.xs > -3) & (f.xs < 3)])
        target = 0.5 * fss.xs**2
        assert np.max(np.abs(fss.ys - target)) <= 2e-2


class TestInfConvolve:
    def test_quadratic_halving(self):
        f = quad(-6.0, 6.0, 2401)
        xg = np.linspace(-3.0, 3.0, 121)
        h = inf_convolve(f, f, xg)
        assert np.max(np.abs(h.ys - xg**2 / 4.0)) <= 1e-3

    def test_identity_element(self):
        f = quad(-2.0, 2.0, 401)
        delta = GridFunction(np.array([-1.0, 0.0, 1.0]), np.array([np.inf, 0.0, np.inf]))
        h = inf_convolve(f, delta, f.xs)
        assert np.max(np.abs(h.ys - f.ys)) <= 1e-12

    def test_dual_additivity(self):
        # (f [] g)* = f* + g* for convex lsc inputs.
        f = quad(-6.0, 6.0, 1201)
        g = GridFunction(f.xs, f.xs**2)  # x^2, also convex
        xg = np.linspace(-4.0, 4.0, 801)
        conv = inf_convolve(f, g, xg)
        rs = np.linspace(-2.0, 2.0, 101)
        lhs = legendre(conv, rs).ys
        rhs = legendre(f, rs).ys + legendre(g, rs).ys
        assert np.max(np.abs(lhs - rhs)) <= 2e-3


class TestCramerOneSided:
    def test_gaussian_at_mean(self):
        M = LogMgf(lambda u: 0.5 * u * u)
        assert cramer_one_sided(M, 0.0, "upper") == pytest.approx(0.0, abs=1e-9)

    def test_gaussian_closed_form(self):
        M = LogMgf(lambda u: 0.5 * u * u)
        assert cramer_one_sided(M, 1.0, "upper") == pytest.approx(0.5, abs=1e-8)
        assert cramer_one_sided(M, -1.0, "lower") == pytest.approx(0.5, abs=1e-8)

    def test_log_inverse_gamma_zero_at_mean(self):
        # omega = log Y with Y^{-1} ~ Gamma(2): M(u) = logGamma(2-u) - logGamma(2),
        # mean E omega = -psi0(2), so the upper rate vanishes there.
        M = LogMgf(lambda u: log_gamma(2.0 - u) - log_gamma(2.0), u_max=2.0)
        a = -digamma(2.0)
        assert cramer_one_sided(M, a, "upper") == pytest.approx(0.0, abs=1e-8)
        # Grid-search verification that the optimum sits at u = 0.
        us = np.linspace(0.0, 1.9, 2001)
        vals = a * us - (log_gamma(2.0 - us) - log_gamma(2.0))
        assert np.max(vals) <= 1e-6

    def test_monotone_and_zero_below_mean(self):
        M = LogMgf(lambda u: log_gamma(2.0 - u) - log_gamma(2.0), u_max=2.0)
        mean = -digamma(2.0)
        grid = np.linspace(mean - 1.0, mean + 1.0, 21)
        rates = [cramer_one_sided(M, a, "upper") for a in grid]
        assert np.all(np.diff(rates) >= -1e-10)
        for a, r in zip(grid, rates):
            if a <= mean:
                assert r <= 1e-8

    def test_concavity_of_inner_objective(self):
        M = LogMgf(lambda u: log_gamma(2.0 - u) - log_gamma(2.0), u_max=2.0)
        us = np.linspace(0.0, 1.8, 301)
        h = 0.7 * us - np.array([M(u) for u in us])
        second = np.diff(h, 2)
        assert np.max(second) <= 1e-8

    def test_divergence_flag(self):
        # M(u) = u has dual +inf for a > 1; the sup runs away.
        M = LogMgf(lambda u: u)
        with pytest.raises(DivergenceError):
            cramer_one_sided(M, 2.0, "upper")

    def test_m0_validated(self):
        with pytest.raises(ValueError):
            LogMgf(lambda u: u + 1.0)


@given(
    a=st.floats(min_value=0.2, max_value=3.0),
    b=st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=50, deadline=None)
def test_legendre_of_shifted_quadratic(a, b):
    # f(x) = a(x-b)^2/2 has dual r^2/(2a) + rb; grids are wide enough that the
    # true argmax r/a + b lies inside for |r| <= 1.
    xs = np.linspace(-8.0, 8.0, 3201)
    f = GridFunction(xs, 0.5 * a * (xs - b) ** 2)
    rs = np.linspace(-1.0, 1.0, 41)
    fstar = legendre(f, rs)
    target = rs**2 / (2 * a) + rs * b
    assert np.max(np.abs(fstar.ys - target)) <= 5e-3


def test_golden_max_quadratic():
    xm, vm = golden_max(lambda x: -((x - 0.3) ** 2), -1.0, 1.0)
    assert xm == pytest.approx(0.3, abs=1e-8)
    assert vm == pytest.approx(0.0, abs=1e-12)
