import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from bfmhd.diagnostics import (
    MonitorRecord,
    absorbing_ball_radius,
    decay_envelope_check,
    energy_budget,
    literal_rate,
    monitor,
    monotonicity_check,
    monotonicity_constant_1d,
    rigorous_rate,
    stroock_varopoulos_check,
    sv_prefactor,
    young_constant,
)
from bfmhd.integrator import Sink, TimeControls, run
from bfmhd.rhs import PhysParams, State
from bfmhd.spectral import PhysicalField, SpectralVectorField, l2_norm_sq, make_grid, transform_forward
from bfmhd.verification import ICSpec, make_ic

from conftest import TWO_PI, solenoidal

# Minimum of the monotonicity ratio, from monotonicity_constant_1d on a
# 2_000_001-point grid (scripts/freeze_monotonicity_constants.py); equals 4^-alpha.
C_ALPHA = {1.5: 0.125, 2.0: 0.0625}


def record(t, E, **kw):
    base = dict(
        grad_u_sq=0.0, grad_b_sq=0.0, u_damp_norm=0.0, b_crit_norm=0.0, div_u_res=0.0, div_b_res=0.0,
        mean_u=(0.0, 0.0, 0.0), mean_b=(0.0, 0.0, 0.0),
    )
    base.update(kw)
    return MonitorRecord(t=t, E=E, **base)


class TestMonitor:
    def test_zero_state(self, grid16):
        z = SpectralVectorField.zeros(grid16)
        r = monitor(State(z, z.copy()), PhysParams(0.1, 0.1, 1.0, 2.0))
        assert r.E == r.grad_u_sq == r.grad_b_sq == r.u_damp_norm == r.b_crit_norm == 0.0
        assert r.div_u_res == r.div_b_res == 0.0

    def test_single_mode_energy(self):
        g = make_grid(16, 3.0)
        s = make_ic(ICSpec(kind="single_mode", amplitude=1.7, mode=(0, 2, 1), direction=(1, 0, 0)), g)
        r = monitor(s, PhysParams(0.1, 0.1, 1.0, 1.0))
        assert r.E == pytest.approx(1.7**2 * 3.0**3 / 2, rel=1e-14)
        assert r.grad_u_sq == pytest.approx(5 * g.k0**2 * r.E, rel=1e-14)

    def test_alpha_zero_has_no_critical_norm(self, grid16):
        s = State(solenoidal(grid16, 1), solenoidal(grid16, 2))
        r = monitor(s, PhysParams(0.1, 0.1, 1.0, 0.0))
        assert r.b_crit_norm is None
        assert r.u_damp_norm == pytest.approx(l2_norm_sq(s.u_hat), rel=1e-12)


class TestAbsorbingBall:
    def test_reference_value(self):
        R2 = absorbing_ball_radius(PhysParams(0.1, 0.1, 1.0, 2.0), TWO_PI)
        assert R2 == pytest.approx(TWO_PI**3 * 0.1, rel=1e-14)
        assert R2 == pytest.approx(24.805, abs=5e-4)

    def test_decreasing_in_a(self):
        vals = [absorbing_ball_radius(PhysParams(0.1, 0.2, a, 1.5), 3.0) for a in (0.1, 1, 10, 1e3, 1e6)]
        assert all(x > y for x, y in zip(vals, vals[1:]))
        assert vals[-1] < 1e-3 * vals[0]  # a^(-1/2) over seven decades

    @pytest.mark.parametrize("alpha", [0.5, 0.25, 0.0])
    def test_alpha_at_or_below_half(self, alpha):
        with pytest.raises(ValueError):
            absorbing_ball_radius(PhysParams(0.1, 0.1, 1.0, alpha), TWO_PI)

    def test_requires_positive_coefficients(self):
        with pytest.raises(ValueError):
            absorbing_ball_radius(PhysParams(0.1, 0.1, 0.0, 2.0), TWO_PI)


class TestRates:
    @pytest.mark.parametrize("alpha", [0.75, 1.0, 1.5, 2.0, 3.0])
    def test_young_constant_numeric(self, alpha):
        mu, a, vol = 0.37, 1.3, 11.0
        res = minimize_scalar(
            lambda X: -(mu * X - 2 * a * X ** (alpha + 1) * vol ** (-alpha)), bounds=(0, 1e4), method="bounded",
            options={"xatol": 1e-12},
        )
        assert young_constant(mu, a, alpha, vol) == pytest.approx(-res.fun, rel=1e-8)

    @given(
        st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.1, 10.0), st.floats(0.6, 4.0), st.floats(0.5, 10.0)
    )
    def test_steady_level_inside_ball(self, nu, kappa, a, alpha, L):
        p = PhysParams(nu, kappa, a, alpha)
        mu, K = rigorous_rate(p, L)
        assert mu > 0
        assert K / mu <= absorbing_ball_radius(p, L) * (1 + 1e-12)

    def test_literal_rate(self):
        assert literal_rate(PhysParams(0.1, 0.3, 1.0, 2.0), 1.0) == pytest.approx(0.6 / (2 * math.pi) ** 2)


class TestEnvelope:
    params = PhysParams(0.1, 0.1, 1.0, 2.0)

    def test_too_short(self):
        with pytest.raises(ValueError):
            decay_envelope_check([record(i, 1.0) for i in range(15)], self.params, TWO_PI)

    def test_start_inside_ball(self):
        series = [record(0.1 * i, 5.0 * math.exp(-0.1 * i)) for i in range(40)]
        rep = decay_envelope_check(series, self.params, TWO_PI)
        assert rep.rigorous_pass and rep.nonincreasing and rep.limsup_pass
        assert rep.entered_ball_at == 0.0 and rep.predicted_entry_time == 0.0

    def test_synthetic_violation(self):
        R2 = absorbing_ball_radius(self.params, TWO_PI)
        E = [10 * R2] * 20 + [20 * R2] * 20
        series = [record(0.5 * i, e) for i, e in enumerate(E)]
        rep = decay_envelope_check(series, self.params, TWO_PI)
        assert not rep.rigorous_pass and not rep.nonincreasing and not rep.limsup_pass
        # a constant 10 R^2 already exceeds the envelope after the first record
        assert rep.rigorous_first_violation == 0.5
        assert rep.entered_ball_at is None

    def test_small_amplitude_run(self, grid16):
        s = State(solenoidal(grid16, 1, 3, energy=1e-4), solenoidal(grid16, 2, 3, energy=1e-4))
        recs = []
        run(s, self.params, TimeControls.fixed(0.1, 3.0), [Sink(lambda k, st: recs.append(monitor(st, self.params)))])
        rep = decay_envelope_check(recs, self.params, TWO_PI)
        assert rep.rigorous_pass and rep.nonincreasing and rep.limsup_pass
        assert max(r.E for r in recs) < rep.R2


class TestMonotonicity:
    def test_identical_inputs(self):
        rep = monotonicity_check([1.0, -2.0, 0.5], [1.0, -2.0, 0.5], 1.5)
        assert rep.rhs == 0.0 and math.isnan(rep.ratio)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.5, 2.0])
    def test_y_zero(self, alpha):
        x = np.array([0.3, -1.2, 2.0])
        rep = monotonicity_check(x, np.zeros(3), alpha)
        nx = np.linalg.norm(x)
        assert rep.rhs == pytest.approx(nx ** (2 * alpha + 2), rel=1e-14)
        assert rep.ratio == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("alpha", [1.5, 2.0])
    def test_oracle_reproduces_frozen_constant(self, alpha):
        assert monotonicity_constant_1d(alpha) == pytest.approx(C_ALPHA[alpha], rel=1e-9)

    @pytest.mark.parametrize("alpha", [1.5, 2.0])
    def test_random_pairs_above_constant(self, alpha):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((100_000, 3)) * rng.lognormal(size=(100_000, 1))
        y = rng.standard_normal((100_000, 3)) * rng.lognormal(size=(100_000, 1))
        rep = monotonicity_check(x, y, alpha)
        assert np.all(rep.rhs >= 0)
        assert np.nanmin(rep.ratio) >= C_ALPHA[alpha] * (1 - 1e-12)

    def test_anti_collinear_equal_norm_attains_constant(self):
        rep = monotonicity_check([1.0, 0, 0], [-1.0, 0, 0], 2.0)
        assert rep.ratio == pytest.approx(C_ALPHA[2.0], rel=1e-14)

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
        st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
        st.floats(0.0, 4.0),
    )
    def test_rhs_nonnegative(self, x, y, alpha):
        rhs = monotonicity_check(x, y, alpha).rhs
        scale = (np.linalg.norm(x) + np.linalg.norm(y)) ** (2 * alpha + 2)
        assert rhs >= -1e-12 * scale

    def test_negative_alpha(self):
        with pytest.raises(ValueError):
            monotonicity_check([1, 0, 0], [0, 1, 0], -1.0)


class TestStroockVaropoulos:
    def test_prefactor_alpha_three(self):
        assert sv_prefactor(3.0) == pytest.approx(0.75, rel=1e-15)

    def test_zero_field(self, grid16):
        rep = stroock_varopoulos_check(SpectralVectorField.zeros(grid16), 1.5)
        assert rep.empty and rep.passed is None

    @pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
    def test_constant_magnitude(self, grid16, alpha):
        _, y, _ = grid16.coordinates()
        vals = np.zeros((3, 16, 16, 16))
        vals[0], vals[1] = 2.0 * np.cos(y), 2.0 * np.sin(y)
        rep = stroock_varopoulos_check(PhysicalField(vals, grid16), alpha)
        assert abs(rep.rhs0) < 1e-10 * rep.lhs
        assert rep.lhs > 0 and rep.passed

    @pytest.mark.parametrize("alpha, rel", [(1.0, 1e-10), (3.0, 1e-10), (1.5, 1e-3), (2.0, 1e-3)])
    def test_scalar_profile_is_sharp(self, grid16, alpha, rel):
        x, y, _ = grid16.coordinates()
        vals = np.zeros((3, 16, 16, 16))
        vals[2] = 1.0 + 0.8 * np.sin(x) * np.cos(2 * y) + 0.5 * np.cos(x + y)
        f = PhysicalField(vals, grid16)
        rep = stroock_varopoulos_check(f, alpha)
        fine = stroock_varopoulos_check(transform_forward(f), alpha, padding=4.0)
        assert fine.ratio == pytest.approx(1.0, rel=rel)
        assert rep.ratio == pytest.approx(fine.ratio, rel=rel)
        assert rep.passed

    @pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
    def test_random_fields(self, grid16, alpha):
        ratios = [stroock_varopoulos_check(solenoidal(grid16, s, 3), alpha).ratio for s in range(10)]
        assert min(ratios) >= 1 - 1e-3

    def test_polynomial_cases_use_tight_slack(self, grid16):
        b = solenoidal(grid16, 0)
        assert stroock_varopoulos_check(b, 1.0).slack == 1e-6
        assert stroock_varopoulos_check(b, 3.0).slack == 1e-6
        assert stroock_varopoulos_check(b, 1.5).slack == 1e-3


class TestEnergyBudget:
    def test_zero_solution(self):
        rep = energy_budget([record(0.0, 0.0), record(1.0, 0.0)], PhysParams(0.1, 0.1, 1.0, 2.0))
        assert rep.dE == rep.dissipation_integral == rep.residual == 0.0

    def test_too_short(self):
        with pytest.raises(ValueError):
            energy_budget([record(0.0, 0.0)], PhysParams(0.1, 0.1, 1.0, 2.0))

    def test_linear_single_mode(self, grid16):
        s = make_ic(ICSpec(kind="single_mode", amplitude=1.0), grid16)
        p = PhysParams(0.01, 0.01, 0.0, 1.0)
        recs = []
        with pytest.warns(UserWarning):
            run(s, p, TimeControls.fixed(0.01, 1.0), [Sink(lambda k, st: recs.append(monitor(st, p)))])
        rep = energy_budget(recs, p, rk_order=4, dt=0.01)
        # exact semigroup; what remains is trapezoid error ~ dt^2 rate^3 E0 / 12
        assert abs(rep.residual) / recs[0].E < 1e-10
        assert rep.expected_scale == pytest.approx(1e-4)

    def test_rk2_self_convergence(self, grid16):
        p = PhysParams(0.1, 0.1, 1.0, 2.0)
        s = State(solenoidal(grid16, 1, 3, energy=5.0), solenoidal(grid16, 2, 3, energy=5.0))
        res = []
        for dt in (2e-2, 1e-2, 5e-3):
            recs = []
            run(s, p, TimeControls.fixed(dt, 0.2, rk_order=2), [Sink(lambda k, st: recs.append(monitor(st, p)))])
            res.append(abs(energy_budget(recs, p).residual))
        orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
        assert min(orders) >= 1.8
