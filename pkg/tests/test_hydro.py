"""Macroscopic shapes, variational formulas, profiles, entropy conditions."""

import math

import numpy as np
import pytest

from growthlab.env import SpeedFunction
from growthlab.hydro import (
    BumpTest,
    EntropyReport,
    MacroPath,
    OutOfWedgeError,
    PiecewiseDensity,
    TemplateBudgetError,
    TwoPhaseParams,
    TwoPhaseProfile,
    closed_form_velocity,
    default_bumps,
    entropy_check,
    g_legendre,
    g_level,
    gamma_q,
    gamma_wedge,
    two_phase_profile,
    two_phase_shape,
    variational_v,
    weak_solution_residual,
)

SQRT2 = math.sqrt(2.0)


class TestGammaAndG:
    def test_gamma_values(self):
        assert gamma_wedge(1, 1) == pytest.approx((SQRT2 + 1) ** 2)
        assert gamma_wedge(0, 2.5) == pytest.approx(10.0)
        assert gamma_wedge(3.0, 0.0) == pytest.approx(3.0)

    def test_gamma_homogeneous_exact(self):
        for lam in (2.0, 0.5):
            assert gamma_wedge(lam * 0.7, lam * 1.3) == pytest.approx(
                lam * gamma_wedge(0.7, 1.3), abs=1e-12
            )

    def test_gamma_concavity_on_segment(self):
        a, b = np.array([0.2, 1.0]), np.array([2.0, 0.3])
        for lam in np.linspace(0, 1, 11):
            p = lam * a + (1 - lam) * b
            assert gamma_wedge(*p) >= lam * gamma_wedge(*a) + (1 - lam) * gamma_wedge(*b) - 1e-12

    def test_out_of_wedge(self):
        with pytest.raises(OutOfWedgeError):
            gamma_wedge(-2.0, 1.0)

    def test_g_branches(self):
        assert g_legendre(0.0) == 0.25
        assert g_legendre(1.0) == 0.0
        assert g_legendre(-1.0) == 1.0
        assert g_legendre(-2.0) == 2.0


class TestGammaQ:
    def test_constant_rate(self):
        c = SpeedFunction.constant(2.0)
        for (x, y) in [(1.0, 1.0), (0.5, 2.0), (-0.5, 1.0)]:
            assert gamma_q(x, y, 0.0, c) == pytest.approx(gamma_wedge(x, y) / 2.0, abs=1e-8)

    def test_vertical_at_discontinuity(self):
        c = SpeedFunction.two_phase(2.0, 1.0)
        assert gamma_q(0.0, 1.0, 0.0, c) == pytest.approx(4.0, abs=1e-8)
        c_rev = SpeedFunction.two_phase(3.0, 3.0)
        assert gamma_q(0.0, 1.0, 0.0, c_rev) == pytest.approx(4.0 / 3.0, abs=1e-8)

    def test_matches_two_phase_shape_via_corner_map(self):
        # Phi(a, b) = Gamma^0(a - b, b) under the wedge <-> corner change of
        # variables, with speed c1 left of 0 and c2 right of it.
        c = SpeedFunction.two_phase(2.0, 1.0)
        for (a, b) in [(0.1, 1.0), (2.0, 1.0), (0.02, 1.0), (0.75, 1.0)]:
            assert gamma_q(a - b, b, 0.0, c) == pytest.approx(
                two_phase_shape(a, b, 2.0, 1.0), abs=1e-7
            )

    def test_hand_built_paths_are_lower_bounds(self):
        c = SpeedFunction.two_phase(2.0, 1.0)
        val = gamma_q(-0.9, 1.0, 0.0, c)
        # Final segment to (-0.9, 1) needs dy >= 0.9, so mid_y <= 0.1.
        for mid_y in (0.02, 0.06, 0.1):
            path = MacroPath([(0.0, 0.0), (0.0, mid_y), (-0.9, 1.0)])
            assert path.cost(c, 0.0) <= val + 1e-9

    def test_shift_invariance_of_homogeneity(self):
        c = SpeedFunction.two_phase(2.0, 1.0)
        base = gamma_q(0.4, 1.1, 0.3, c)
        for lam in (2.0, 0.5):
            scaled = gamma_q(lam * 0.4, lam * 1.1, lam * 0.3, c.scaled(lam))
            assert scaled == pytest.approx(lam * base, abs=1e-7)

    def test_budget_error(self):
        c = SpeedFunction((-1.0, 0.0, 1.0), (1.0, 2.0, 1.0, 2.0))
        with pytest.raises(TemplateBudgetError):
            gamma_q(5.0, 4.0, 0.0, c, segment_budget=1)


class TestGLevel:
    def test_invert_linear(self):
        c = SpeedFunction.constant(1.0)
        assert g_level(0.0, 2.0, 0.0, c) == pytest.approx(0.5, abs=1e-9)

    def test_roundtrip(self):
        c = SpeedFunction.two_phase(2.0, 1.0)
        for (x, t) in [(0.5, 3.0), (-0.2, 1.5), (0.0, 2.0)]:
            y = g_level(x, t, 0.0, c)
            assert gamma_q(x, y, 0.0, c) == pytest.approx(t, abs=1e-7)

    def test_two_phase_at_origin(self):
        c = SpeedFunction.two_phase(2.0, 1.0)
        t = 3.0
        assert g_level(0.0, t, 0.0, c) == pytest.approx(1.0 * t / 4.0, abs=1e-9)

    def test_monotone_in_t(self):
        c = SpeedFunction.two_phase(2.0, 1.0)
        ys = [g_level(0.3, t, 0.0, c) for t in (1.0, 2.0, 3.0, 4.0)]
        assert all(b > a for a, b in zip(ys, ys[1:]))


class TestTwoPhaseShape:
    def test_branch_degenerate(self):
        assert two_phase_shape(1.0, 1.0, 3.0, 3.0) == pytest.approx(4.0 / 3.0)

    def test_branch_three(self):
        assert two_phase_shape(2.0, 1.0, 2.0, 1.0) == pytest.approx((SQRT2 + 1) ** 2, rel=1e-10)

    def test_branch_middle_value(self):
        assert two_phase_shape(0.1, 1.0, 2.0, 1.0) == pytest.approx(0.9272077938642145, abs=1e-9)

    def test_branch_one(self):
        p = TwoPhaseParams(2.0, 1.0)
        x = 0.5 * p.b**2  # inside branch 1 for y = 1
        assert two_phase_shape(x, 1.0, 2.0, 1.0) == pytest.approx(
            (math.sqrt(x) + 1.0) ** 2 / 2.0, rel=1e-12
        )

    def test_continuity_across_branch_boundaries(self):
        p = TwoPhaseParams(2.0, 1.0)
        y = 1.3
        for xb in (p.b**2 * y, y):
            lo = two_phase_shape(xb - 1e-11, y, 2.0, 1.0)
            hi = two_phase_shape(xb + 1e-11, y, 2.0, 1.0)
            assert abs(hi - lo) <= 1e-9

    def test_parameter_error(self):
        with pytest.raises(ValueError):
            two_phase_shape(1.0, 1.0, 1.0, 2.0)

    def test_derived_constants(self):
        p = TwoPhaseParams(2.0, 1.0)
        assert p.b == pytest.approx(3.0 - 2.0 * SQRT2)
        assert 0.0 < p.b < 1.0
        assert TwoPhaseParams(1.0, 1.0).b == pytest.approx(1.0)
        assert p.rho_star == pytest.approx(0.5 - 0.5 * math.sqrt(0.5))
        assert p.D(p.rho_star) == pytest.approx(0.0, abs=1e-14)


class TestTwoPhaseProfile:
    def test_case_ii_values(self):
        assert two_phase_profile(0.3, 1.0, 0.5, 0.1, 1.0) == pytest.approx(0.4)
        assert two_phase_profile(0.3, 1.0, 0.5, -0.1, 1.0) == pytest.approx(
            1.0 - (0.5 - 0.5 * math.sqrt(0.5)), abs=1e-12
        )

    def test_case_selection(self):
        assert TwoPhaseProfile(0.10, 1.0, 0.5).case() == "i"
        assert TwoPhaseProfile(0.30, 1.0, 0.5).case() == "ii"
        assert TwoPhaseProfile(0.70, 1.0, 0.5).case() == "iii"

    def test_degenerate_rates_constant_profile(self):
        prof = TwoPhaseProfile(0.3, 1.0, 1.0)
        for x in np.linspace(-2, 2, 41):
            assert prof.value(x, 1.0) == pytest.approx(0.3, abs=1e-12)
        prof2 = TwoPhaseProfile(0.8, 1.0, 1.0)
        for x in np.linspace(-2, 2, 41):
            assert prof2.value(x, 1.0) == pytest.approx(0.8, abs=1e-12)

    def test_continuity_at_non_shock_boundaries(self):
        # Fan edges are continuous; the only jumps are the shock (left) and
        # the interface at 0.
        prof = TwoPhaseProfile(0.3, 1.0, 0.5)
        t = 1.0
        fan_hi = (1 - 2 * 0.3) * t * 0.5
        for x0 in (fan_hi,):
            assert abs(prof.value(x0 - 1e-11, t) - prof.value(x0 + 1e-11, t)) <= 1e-9

    def test_mass_flux_consistency_case_i(self):
        prof = TwoPhaseProfile(0.10, 1.0, 0.5)
        left, right = prof.side_limits(0.0, 1.0)
        assert 1.0 * left * (1 - left) == pytest.approx(0.5 * right * (1 - right), abs=1e-12)


class TestVariational:
    @pytest.mark.parametrize("rho,c1,c2", [(0.3, 1.0, 0.5), (0.7, 2.0, 1.0)])
    def test_matches_closed_form(self, rho, c1, c2):
        c = SpeedFunction.two_phase(c1, c2)
        for x in np.linspace(-1.2, 1.2, 8):
            for t in (0.4, 1.0):
                v_num = variational_v(x, t, rho, c)
                v_cf = closed_form_velocity(x, t, rho, c1, c2)
                assert abs(v_num - v_cf) <= 1e-3

    def test_homogeneous_constant_density(self):
        # v(x,t) = rho x - c t rho (1 - rho) for constant rho, constant c.
        c = SpeedFunction.constant(1.5)
        rho = 0.4
        for x in (-0.7, 0.0, 0.9):
            v = variational_v(x, 1.0, rho, c)
            assert v == pytest.approx(rho * x - 1.5 * rho * (1 - rho), abs=1e-9)

    def test_lipschitz_in_x(self):
        c = SpeedFunction.two_phase(1.0, 0.5)
        xs = np.linspace(-1.0, 1.0, 21)
        vals = [variational_v(x, 1.0, 0.3, c) for x in xs]
        quot = np.abs(np.diff(vals)) / (xs[1] - xs[0])
        assert np.all(quot <= 1.0 + 1e-6)

    def test_step_initial_data_rarefaction(self):
        rho0 = PiecewiseDensity((0.0,), (1.0, 0.0))
        c = SpeedFunction.constant(1.0)
        # Homogeneous rarefaction: v(x, t) = -t g(x/t) on |x| <= t.
        for x in (-0.5, 0.0, 0.5):
            v = variational_v(x, 1.0, rho0, c)
            assert v == pytest.approx(-g_legendre(x), abs=1e-6)


class TestEntropy:
    @pytest.mark.parametrize("rho", [0.10, 0.30, 0.70])
    def test_closed_form_profiles_pass(self, rho):
        prof = TwoPhaseProfile(rho, 1.0, 0.5)
        rep = entropy_check(prof, 1.0, 0.5, 1.0)
        assert rep.interior_ok and rep.boundary_ok
        assert rep.flux_residual <= 1e-10

    def test_homogeneous_fan_passes(self):
        fan = lambda x, t: 1.0 if x <= -t else (0.0 if x >= t else 0.5 * (1 - x / t))
        rep = entropy_check(fan, 1.0, 1.0, 1.0, breakpoints=[-1.0, 1.0])
        assert rep.interior_ok

    def test_swapped_plateaus_fail(self):
        # Deliberately wrong: interchange the values around the interface.
        good = TwoPhaseProfile(0.3, 1.0, 0.5)

        def swapped(x, t):
            return good.value(-x, t)

        rep = entropy_check(swapped, 1.0, 0.5, 1.0,
                            breakpoints=[-b for b in good.breakpoints(1.0)])
        assert (not rep.interior_ok) or (not rep.boundary_ok) or rep.flux_residual > 1e-6


class TestWeakForm:
    def test_constant_state_exact(self):
        prof = TwoPhaseProfile(0.4, 1.0, 1.0)  # constant rho, constant c
        assert weak_solution_residual(prof, 1.0, 1.0) <= 1e-8

    def test_case_i_small_residual(self):
        prof = TwoPhaseProfile(0.10, 1.0, 0.5)
        res = weak_solution_residual(prof, 1.0, 0.5)
        assert res <= 1e-3
        # Doubling the quadrature resolution must not blow the value up.
        res2 = weak_solution_residual(prof, 1.0, 0.5, n_t=1921, gauss_order=48)
        assert res2 <= res + 1e-6

    def test_cases_ii_iii(self):
        for rho in (0.3, 0.7):
            prof = TwoPhaseProfile(rho, 1.0, 0.5)
            assert weak_solution_residual(prof, 1.0, 0.5) <= 1e-3

    def test_frozen_profile_fails(self):
        class Frozen:
            def __init__(self, p):
                self.p = p

            def breakpoints(self, t):
                return self.p.breakpoints(1e-9)

            def value(self, x, t):
                return self.p.value(x, 1e-9)

        res = weak_solution_residual(Frozen(TwoPhaseProfile(0.10, 1.0, 0.5)), 1.0, 0.5)
        assert res > 1e-3


class TestDualPairIdentity:
    def test_scaling_and_domain_of_equality(self):
        # (c f)*(y) = c f*(y/c) everywhere; equality of the f- and h-duals on
        # [-c, c] and strict inequality outside (inf convention).
        h = lambda r: r * (1 - r)
        rho_box = np.linspace(0.0, 1.0, 20001)
        rho_all = np.linspace(-4.0, 5.0, 90001)
        for cc in (1.0, 0.5, 2.0):
            for y in np.linspace(-1.5 * cc, 1.5 * cc, 13):
                cf_star = np.min(y * rho_box - cc * h(rho_box))
                f_star_scaled = cc * np.min((y / cc) * rho_box - h(rho_box))
                assert cf_star == pytest.approx(f_star_scaled, abs=1e-8)
                ch_star = np.min(y * rho_all - cc * h(rho_all))
                if abs(y) <= cc - 1e-6:
                    assert cf_star == pytest.approx(ch_star, abs=1e-7)
                elif abs(y) >= cc + 0.2:
                    assert cf_star > ch_star + 1e-3


def test_macro_path_validation():
    MacroPath([(0.0, 0.0), (1.0, 0.0), (0.5, 0.5)])
    with pytest.raises(OutOfWedgeError):
        MacroPath([(0.0, 0.0), (1.0, 0.0), (0.5, 0.2)])
    with pytest.raises(OutOfWedgeError):
        MacroPath([(0.0, 0.0), (0.0, -0.1)])


def test_bump_derivative_consistency():
    b = default_bumps()[0]
    h = 1e-6
    x, t = 0.2, 0.7
    assert (b.phi(x + h, t) - b.phi(x - h, t)) / (2 * h) == pytest.approx(
        b.phi_x(x, t), abs=1e-6
    )
    assert (b.phi(x, t + h) - b.phi(x, t - h)) / (2 * h) == pytest.approx(
        b.phi_t(x, t), abs=1e-6
    )
    assert b.phi(b.x0 + b.wx + 0.01, t) == 0.0
