import numpy as np
import pytest

from relucert.descent import DivergenceError
from relucert.flow import (
    FlowTrace,
    apriori_general_check,
    cumulative_integral,
    flow_bound_check,
    integrate_flow,
    ito_residuals,
)
from relucert.network import ConstantTarget, ParamVector, PiecewisePolynomialTarget
from relucert.verify import random_phi

RAMP = ParamVector([1.0, 0.0, 1.0, 0.0])
ZERO = ParamVector([0.0, 0.0, 0.0, 0.0])
LINE = PiecewisePolynomialTarget([0.0, 1.0], [[0.0, 1.0]])


class TestCumulativeIntegral:
    def test_exact_for_cubics(self):
        h = 0.01
        t = h * np.arange(101)
        y = 2.0 * t**3 - t**2 + 0.5 * t - 3.0
        want = 0.5 * t**4 - t**3 / 3.0 + 0.25 * t**2 - 3.0 * t
        np.testing.assert_allclose(cumulative_integral(y, h), want, atol=1e-13)

    def test_fourth_order_on_smooth(self):
        def err(h):
            t = h * np.arange(int(round(1.0 / h)) + 1)
            got = cumulative_integral(np.exp(t), h)
            return np.max(np.abs(got - (np.exp(t) - 1.0)))

        assert err(0.01) / err(0.005) >= 12.0


class TestIntegrateFlow:
    def test_stationary_point_constant_trace(self):
        trace = integrate_flow(ZERO, ConstantTarget(0.0), T=2.0, h=0.01)
        assert np.all(trace.risks == 0.0)
        assert np.all(trace.states == 0.0)

    def test_ramp_decay_bound_at_horizon(self):
        trace = integrate_flow(RAMP, ConstantTarget(0.0), T=10.0, h=1e-3)
        # V(0) = 2, so the decay envelope at t=10 is 2/80
        assert trace.risks[-1] <= 2.0 / 80.0

    def test_only_output_bias_moves_from_origin(self):
        trace = integrate_flow(ZERO, ConstantTarget(1.0), T=1.0, h=1e-3)
        np.testing.assert_array_equal(trace.states[:, :3], 0.0)
        assert trace.states[-1, 3] > 0.5

    def test_grid_lands_on_horizon(self):
        trace = integrate_flow(RAMP, ConstantTarget(0.0), T=1.0, h=0.3)
        assert trace.times[-1] == pytest.approx(1.0)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            integrate_flow(RAMP, ConstantTarget(0.0), T=0.0, h=0.1)
        with pytest.raises(ValueError):
            integrate_flow(RAMP, ConstantTarget(0.0), T=1.0, h=2.0)
        with pytest.raises(ValueError):
            integrate_flow(RAMP, ConstantTarget(0.0), T=1.0, h=0.1, method="heun")


class TestItoResiduals:
    def test_stationary_residuals_zero(self):
        trace = integrate_flow(ZERO, ConstantTarget(0.0), T=1.0, h=0.01)
        res = ito_residuals(trace)
        assert res.v_identity_max == 0.0
        assert res.l_identity_max == 0.0

    def test_rk4_residuals_small(self):
        trace = integrate_flow(RAMP, ConstantTarget(0.0), T=5.0, h=1e-3)
        res = ito_residuals(trace)
        assert res.v_identity_max <= 1e-6
        assert res.l_identity_max <= 1e-6

    def test_lyapunov_never_increases_along_traces(self):
        rng = np.random.default_rng(23)
        for _ in range(5):
            phi = random_phi(rng, int(rng.integers(1, 5)), 1.0)
            trace = integrate_flow(phi, ConstantTarget(float(rng.uniform(-1, 1))),
                                   T=3.0, h=1e-3)
            tol = 1e-9 * (1.0 + trace.v_values[0])
            assert np.all(np.diff(trace.v_values) <= tol)

    def test_euler_worse_than_rk4(self):
        t = ConstantTarget(0.3)
        phi = ParamVector([0.8, -0.2, 0.9, 0.1])
        res_euler = ito_residuals(integrate_flow(phi, t, T=2.0, h=1e-2, method="euler"))
        res_rk4 = ito_residuals(integrate_flow(phi, t, T=2.0, h=1e-2, method="rk4"))
        assert res_rk4.v_identity_max < res_euler.v_identity_max
        assert res_rk4.l_identity_max < res_euler.l_identity_max

    def test_halving_reduces_residuals_at_expected_order(self):
        rng = np.random.default_rng(17)
        phi = random_phi(rng, 2, 1.0)
        t = ConstantTarget(0.4)
        coarse = ito_residuals(integrate_flow(phi, t, T=3.0, h=4e-3))
        fine = ito_residuals(integrate_flow(phi, t, T=3.0, h=2e-3))
        floor = 1e-13
        if fine.v_identity_max > floor:
            assert coarse.v_identity_max / fine.v_identity_max >= 8.0
        e_coarse = ito_residuals(integrate_flow(phi, t, T=3.0, h=4e-3, method="euler"))
        e_fine = ito_residuals(integrate_flow(phi, t, T=3.0, h=2e-3, method="euler"))
        assert e_coarse.v_identity_max / e_fine.v_identity_max >= 2.0


class TestFlowBoundCheck:
    def test_certified_run(self):
        trace = integrate_flow(RAMP, ConstantTarget(0.0), T=5.0, h=1e-3)
        checks = flow_bound_check(trace)
        assert checks.sup_norm_ok and checks.decay_ok and checks.monotone_ok

    def test_stationary_run(self):
        checks = flow_bound_check(integrate_flow(ZERO, ConstantTarget(0.0), T=1.0, h=0.01))
        assert checks.sup_norm_ok and checks.decay_ok and checks.monotone_ok

    def test_corrupted_trace_fails_monotonicity(self):
        trace = integrate_flow(RAMP, ConstantTarget(0.0), T=1.0, h=0.01)
        risks = trace.risks.copy()
        risks[len(risks) // 2] += 0.5
        bad = FlowTrace(times=trace.times, states=trace.states, risks=risks,
                        v_values=trace.v_values, grad_sq_norms=trace.grad_sq_norms,
                        step_size=trace.step_size, method=trace.method)
        assert not flow_bound_check(bad).monotone_ok


class TestAprioriGeneralCheck:
    def test_zero_target_reduces_to_decay(self):
        zero_f = PiecewisePolynomialTarget([0.0, 1.0], [[0.0]])
        trace = integrate_flow(RAMP, zero_f, T=2.0, h=1e-3)
        checks = apriori_general_check(trace, zero_f)
        assert checks.v_growth_ok and checks.norm_growth_ok

    def test_line_target(self):
        trace = integrate_flow(RAMP, LINE, T=10.0, h=1e-3)
        checks = apriori_general_check(trace, LINE)
        assert checks.v_growth_ok and checks.norm_growth_ok

    def test_constant_one_both_routes(self):
        # same dynamics certified twice: alpha route and degree-0 piece route
        one = PiecewisePolynomialTarget([0.0, 1.0], [[1.0]])
        phi = ParamVector([0.4, 0.1, -0.3, 0.2])
        const_trace = integrate_flow(phi, ConstantTarget(1.0), T=3.0, h=1e-3)
        checks_const = flow_bound_check(const_trace)
        assert checks_const.sup_norm_ok and checks_const.decay_ok and checks_const.monotone_ok
        gen_trace = integrate_flow(phi, one, T=3.0, h=1e-3)
        checks_gen = apriori_general_check(gen_trace, one)
        assert checks_gen.v_growth_ok and checks_gen.norm_growth_ok
        np.testing.assert_allclose(const_trace.risks, gen_trace.risks, atol=1e-12)


class TestDivergence:
    def test_partial_trace_on_blowup(self):
        # Euler with an absurd step amplifies the output bias ~99x per update
        phi = ParamVector([2.0, 0.5, 2.0, 1.0])
        with pytest.raises(DivergenceError) as err:
            integrate_flow(phi, ConstantTarget(0.0), T=10_000.0, h=50.0, method="euler")
        assert err.value.trace is not None
        assert 1 <= len(err.value.trace.times) < 201
