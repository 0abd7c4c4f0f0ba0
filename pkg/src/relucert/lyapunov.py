"""Lyapunov functions for the training dynamics and their checkable certificates.

For a constant target alpha the descent certificate rests on

    V(phi) = ||phi||^2 + (c - 2 alpha)^2,

whose gradient pairs with the exact risk gradient G as <grad V, G> = 8 L.
V splits (up to the constant 4 alpha^2) into two halves V1, V2 that each pair
to 4 L; both are exposed purely so the identities can be tested — only V
drives the trainer.  For general targets the variant ||phi||^2 + c^2 is used
by the a priori flow bounds.

All inner products and sums here use one fixed evaluation order so certificate
residuals reproduce bit-for-bit across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import grad_exact, risk_and_grad
from .network import ConstantTarget, ParamVector


def _split_data(data: np.ndarray, H: int, alpha: float) -> tuple[float, float]:
    sw = float(data[:H] @ data[:H])
    sb = float(data[H : 2 * H] @ data[H : 2 * H])
    sv = float(data[2 * H : 3 * H] @ data[2 * H : 3 * H])
    c = float(data[3 * H])
    q = c * c - 2.0 * alpha * c
    return q + sv, q + (sw + sb)


def _v_const_data(data: np.ndarray, H: int, alpha: float) -> float:
    v1, v2 = _split_data(data, H, alpha)
    return (v1 + v2) + 4.0 * alpha * alpha


def _v_general_data(data: np.ndarray, H: int) -> float:
    c = float(data[3 * H])
    return float(data @ data) + c * c


def v_split(phi: ParamVector, alpha: float) -> tuple[float, float]:
    """The two halves (v1, v2); each may be negative, only their sum is pinned."""
    return _split_data(phi.data, phi.H, alpha)


def v_const(phi: ParamVector, alpha: float) -> float:
    """Lyapunov value ||phi||^2 + (c - 2 alpha)^2 for a constant target.

    Evaluated as (v1 + v2) + 4 alpha^2 so the split identity holds bitwise.
    """
    return _v_const_data(phi.data, phi.H, alpha)


def grad_v(phi: ParamVector, alpha: float) -> np.ndarray:
    """Gradient of v_const: 2 phi with 2(c - 2 alpha) added to the last entry."""
    g = 2.0 * phi.data
    g[-1] += 2.0 * (phi.c - 2.0 * alpha)
    return g


def v_general(phi: ParamVector) -> float:
    """Lyapunov value ||phi||^2 + c^2 used by the general-target flow bounds."""
    return _v_general_data(phi.data, phi.H)


def grad_v_general(phi: ParamVector) -> np.ndarray:
    """Gradient of v_general: 2 phi with 2 c added to the last entry."""
    g = 2.0 * phi.data
    g[-1] += 2.0 * phi.c
    return g


def _grad_v1(phi: ParamVector, alpha: float) -> np.ndarray:
    H = phi.H
    g = np.zeros(3 * H + 1)
    g[2 * H : 3 * H] = 2.0 * phi.v
    g[3 * H] = 2.0 * (phi.c - alpha)
    return g


def _grad_v2(phi: ParamVector, alpha: float) -> np.ndarray:
    H = phi.H
    g = np.zeros(3 * H + 1)
    g[: 2 * H] = 2.0 * phi.data[: 2 * H]
    g[3 * H] = 2.0 * (phi.c - alpha)
    return g


@dataclass(frozen=True)
class LyapunovReport:
    """One certificate evaluation at a parameter vector.

    residual_* measure how far each pairing identity is from its proved value
    (8 L for V, 4 L for each half); grad_bound_slack is the margin of
    ||G||^2 <= (8 ||phi||^2 + 4) L, and sandwich_ok records
    ||phi||^2 <= V <= 3 ||phi||^2 + 8 alpha^2.
    """

    v: float
    pairing_v: float
    pairing_v1: float
    pairing_v2: float
    risk: float
    residual_v: float
    residual_v1: float
    residual_v2: float
    grad_bound_slack: float
    sandwich_ok: bool


def certify(phi: ParamVector, alpha: float) -> LyapunovReport:
    """Evaluate every proved identity and bound at phi against a constant target."""
    risk, grad = risk_and_grad(phi, ConstantTarget(alpha))
    v = v_const(phi, alpha)
    pairing_v = float(grad_v(phi, alpha) @ grad)
    pairing_v1 = float(_grad_v1(phi, alpha) @ grad)
    pairing_v2 = float(_grad_v2(phi, alpha) @ grad)
    norm_sq = phi.norm_sq()
    grad_bound_slack = (8.0 * norm_sq + 4.0) * risk - float(grad @ grad)
    sandwich_ok = norm_sq <= v <= 3.0 * norm_sq + 8.0 * alpha * alpha
    return LyapunovReport(
        v=v,
        pairing_v=pairing_v,
        pairing_v1=pairing_v1,
        pairing_v2=pairing_v2,
        risk=risk,
        residual_v=pairing_v - 8.0 * risk,
        residual_v1=pairing_v1 - 4.0 * risk,
        residual_v2=pairing_v2 - 4.0 * risk,
        grad_bound_slack=grad_bound_slack,
        sandwich_ok=bool(sandwich_ok),
    )


def pairing_residuals(phi: ParamVector, alpha: float, grad_fn=grad_exact):
    """Scale-free residuals of the three pairing identities.

    `grad_fn` is the gradient evaluator to pair against; substituting a broken
    one is the supported negative control for the verification suites.
    """
    target = ConstantTarget(alpha)
    grad = grad_fn(phi, target)
    risk, _ = risk_and_grad(phi, target)
    scale = 1.0 + risk
    return (
        abs(float(grad_v(phi, alpha) @ grad) - 8.0 * risk) / scale,
        abs(float(_grad_v1(phi, alpha) @ grad) - 4.0 * risk) / scale,
        abs(float(_grad_v2(phi, alpha) @ grad) - 4.0 * risk) / scale,
    )
