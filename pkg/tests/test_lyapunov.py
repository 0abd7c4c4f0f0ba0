import numpy as np
import pytest

from relucert.exact import grad_exact, risk_and_grad
from relucert.lyapunov import (
    certify,
    grad_v,
    grad_v_general,
    pairing_residuals,
    v_const,
    v_general,
    v_split,
)
from relucert.network import ConstantTarget, ParamVector
from relucert.oracle import fd_gradient
from relucert.verify import random_phi, random_poly_target

RAMP = ParamVector([1.0, 0.0, 1.0, 0.0])
ZERO = ParamVector([0.0, 0.0, 0.0, 0.0])


class TestVConst:
    def test_hand_values(self):
        assert v_const(RAMP, 0.0) == 2.0
        assert v_const(ZERO, 1.0) == 4.0

    def test_dominates_squared_norm(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            phi = random_phi(rng, int(rng.integers(1, 9)), 2.0)
            alpha = float(rng.uniform(-5, 5))
            assert v_const(phi, alpha) >= phi.norm_sq()

    def test_matches_textbook_expression(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            phi = random_phi(rng, int(rng.integers(1, 9)), 2.0)
            alpha = float(rng.uniform(-5, 5))
            direct = phi.norm_sq() + (phi.c - 2.0 * alpha) ** 2
            assert v_const(phi, alpha) == pytest.approx(direct, rel=1e-13, abs=1e-13)


class TestVSplit:
    def test_hand_values(self):
        assert v_split(RAMP, 0.0) == (1.0, 1.0)
        assert v_split(ZERO, 1.0) == (0.0, 0.0)

    def test_halves_may_be_negative(self):
        phi = ParamVector([0.0, 0.0, 0.0, 1.0])
        assert v_split(phi, 1.0) == (-1.0, -1.0)

    def test_sum_identity_bitwise(self):
        # fixed evaluation order makes the additive form exact, not approximate
        rng = np.random.default_rng(3)
        for _ in range(500):
            phi = random_phi(rng, int(rng.integers(1, 9)), 3.0)
            alpha = float(rng.uniform(-5, 5))
            v1, v2 = v_split(phi, alpha)
            assert (v1 + v2) + 4.0 * alpha * alpha == v_const(phi, alpha)


class TestGradV:
    def test_hand_values(self):
        np.testing.assert_array_equal(grad_v(RAMP, 0.0), [2.0, 0.0, 2.0, 0.0])
        np.testing.assert_array_equal(grad_v(ZERO, 1.0), [0.0, 0.0, 0.0, -4.0])

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            H = int(rng.integers(1, 5))
            phi = random_phi(rng, H, 2.0)
            alpha = float(rng.uniform(-3, 3))
            fd = fd_gradient(lambda d: v_const(ParamVector(d, H=H), alpha), phi.data, 1e-6)
            np.testing.assert_allclose(grad_v(phi, alpha), fd, atol=1e-7)


class TestVGeneral:
    def test_hand_values(self):
        assert v_general(RAMP) == 2.0
        assert v_general(ParamVector([0.0, 0.0, 0.0, 1.0])) == 2.0
        assert v_general(ZERO) == 0.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            H = int(rng.integers(1, 5))
            phi = random_phi(rng, H, 2.0)
            fd = fd_gradient(lambda d: v_general(ParamVector(d, H=H)), phi.data, 1e-6)
            np.testing.assert_allclose(grad_v_general(phi), fd, atol=1e-7)


class TestCertify:
    def test_ramp_report(self):
        rep = certify(RAMP, 0.0)
        assert rep.risk == pytest.approx(1.0 / 3.0, rel=1e-14)
        assert rep.pairing_v == pytest.approx(8.0 / 3.0, rel=1e-14)
        assert abs(rep.residual_v) <= 1e-12
        assert rep.sandwich_ok

    def test_zero_vector_report(self):
        rep = certify(ZERO, 1.0)
        assert rep.risk == 1.0
        assert rep.pairing_v == 8.0
        assert rep.residual_v == 0.0
        assert rep.grad_bound_slack == 0.0
        assert rep.sandwich_ok

    def test_exact_fit_all_quiet(self):
        phi = ParamVector([1.0, 1.0, 0.2, 0.2, 0.8, -0.8, 0.5], H=2)
        rep = certify(phi, 0.5)
        assert rep.risk == 0.0
        assert rep.pairing_v == 0.0
        assert rep.grad_bound_slack == 0.0


class TestPairingIdentities:
    def test_residuals_tiny_everywhere(self):
        rng = np.random.default_rng(6)
        hs = (1, 2, 4, 8)
        for k in range(500):
            phi = random_phi(rng, hs[k % 4], 2.0)
            alpha = float(rng.uniform(-5, 5))
            res = pairing_residuals(phi, alpha)
            assert max(res) <= 1e-10

    def test_negative_control_detected(self):
        # a sign flip in one gradient component must break the pairings
        def broken(phi, target):
            g = grad_exact(phi, target)
            g[-1] = -g[-1]
            return g

        phi = random_phi(np.random.default_rng(7), 2, 1.0)
        res = pairing_residuals(phi, 1.0, grad_fn=broken)
        assert max(res) > 1e-6


class TestSandwich:
    def test_two_sided_bound(self):
        rng = np.random.default_rng(8)
        for _ in range(2000):
            phi = random_phi(rng, int(rng.integers(1, 9)), 2.0)
            alpha = float(rng.uniform(-2, 2))
            v = v_const(phi, alpha)
            nsq = phi.norm_sq()
            assert nsq <= v <= 3.0 * nsq + 8.0 * alpha * alpha


class TestGeneralTargetPairing:
    def test_pairing_bounded_below(self):
        # <grad V, G_f> >= -2 int f^2 for the general-target gradient
        rng = np.random.default_rng(9)
        for _ in range(100):
            H = int(rng.integers(1, 5))
            phi = random_phi(rng, H, 1.5)
            f = random_poly_target(rng)
            _, grad = risk_and_grad(phi, f)
            pairing = float(grad_v_general(phi) @ grad)
            floor = -2.0 * f.square_integral()
            assert pairing >= floor - 1e-10 * (1.0 + abs(floor))
