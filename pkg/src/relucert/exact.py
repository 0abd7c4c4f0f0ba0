"""Closed-form risk and gradient evaluation, free of quadrature.

The realization is affine between kinks and the target is polynomial between
its own breakpoints, so every integral reduces to monomial antiderivatives on
the segments cut by the union of both breakpoint sets.  The gradient array
returned here follows the same (w, b, v, c) layout as the parameter vector;
components of a degenerate neuron (w_j = b_j = 0) come out exactly zero
because its active set is empty.
"""

from __future__ import annotations

import numpy as np

from .network import (
    MIN_SEGMENT_WIDTH,
    ConstantTarget,
    ParamVector,
    PiecewisePolynomialTarget,
    Target,
)

__all__ = ["risk_exact", "grad_exact", "risk_and_grad", "segment_moment"]


def segment_moment(seg, residual, k: int = 0) -> float:
    """Exact integral of x^k times a polynomial over one segment.

    `seg` is anything whose first two entries are the segment bounds (a bare
    (left, right) pair or a (left, right, slope, intercept) row); `residual`
    lists ascending-power polynomial coefficients.
    """
    left, right = float(seg[0]), float(seg[1])
    if left > right:
        raise ValueError(f"segment bounds inverted: {left} > {right}")
    coef = np.atleast_1d(np.asarray(residual, dtype=float))
    exps = np.arange(k + 1, k + coef.size + 1)
    return float(coef @ ((right**exps - left**exps) / exps))


def _segment_grid(w, b, extra_breaks):
    """Split points of [0, 1] at network kinks plus the given target breaks."""
    nz = w != 0.0
    kinks = -b[nz] / w[nz]
    kinks = kinks[(kinks >= MIN_SEGMENT_WIDTH) & (kinks <= 1.0 - MIN_SEGMENT_WIDTH)]
    pts = np.unique(np.concatenate((extra_breaks, kinks)))
    keep = np.concatenate(([True], np.diff(pts) >= MIN_SEGMENT_WIDTH))
    pts = pts[keep]
    if pts[-1] != 1.0:
        pts[-1] = 1.0
    return pts


_UNIT = np.array([0.0, 1.0])


def _core(data: np.ndarray, H: int, target: Target, want_grad: bool):
    """Shared segment decomposition behind risk_exact and grad_exact.

    Arithmetic may transiently overflow on diverging iterates; callers that
    feed unbounded data check the outputs for finiteness.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _core_impl(data, H, target, want_grad)


def _core_impl(data: np.ndarray, H: int, target: Target, want_grad: bool):
    w = data[:H]
    b = data[H : 2 * H]
    v = data[2 * H : 3 * H]
    c = data[3 * H]

    constant = isinstance(target, ConstantTarget)
    breaks = _UNIT if constant else target.breakpoints
    pts = _segment_grid(w, b, breaks)
    left, right = pts[:-1], pts[1:]
    mid = 0.5 * (left + right)

    active = np.outer(mid, w) + b > 0.0  # (S, H)
    slope = active @ (v * w)
    intercept = c + active @ (v * b)

    if constant:
        # Residual is affine per segment: r0 + r1 x.
        r0 = intercept - target.alpha
        r1 = slope
        p1 = right - left
        p2 = (right * right - left * left) / 2.0
        p3 = (right * right * right - left * left * left) / 3.0
        risk = float(r0 @ (r0 * p1) + 2.0 * (r0 @ (r1 * p2)) + r1 @ (r1 * p3))
        if not want_grad:
            return risk, None
        m0 = r0 * p1 + r1 * p2
        m1 = r0 * p2 + r1 * p3
    else:
        coefs = target.coefficients
        deg = coefs.shape[1] - 1
        piece = np.searchsorted(target.breakpoints, mid, side="right") - 1
        width = max(2, deg + 1)
        res = np.zeros((mid.size, width))
        res[:, 0] = intercept
        res[:, 1] = slope
        res[:, : deg + 1] -= coefs[piece]
        exps = np.arange(1, 2 * width)
        powers = (right[:, None] ** exps - left[:, None] ** exps) / exps  # (S, 2*width-1)
        idx = np.add.outer(np.arange(width), np.arange(width))
        risk = float(np.einsum("si,sj,sij->", res, res, powers[:, idx]))
        if not want_grad:
            return risk, None
        m0 = np.einsum("si,si->s", res, powers[:, :width])
        m1 = np.einsum("si,si->s", res, powers[:, 1 : width + 1])

    am0 = active.T @ m0
    am1 = active.T @ m1
    grad = np.empty(3 * H + 1)
    grad[:H] = 2.0 * v * am1
    grad[H : 2 * H] = 2.0 * v * am0
    grad[2 * H : 3 * H] = 2.0 * (w * am1 + b * am0)
    grad[3 * H] = 2.0 * m0.sum()
    grad += 0.0  # normalize signed zeros (degenerate or v_j == 0 neurons)
    return risk, grad


def risk_exact(phi: ParamVector, target: Target) -> float:
    """Exact mean squared error of the realization against the target on [0, 1]."""
    risk, _ = _core(phi.data, phi.H, target, want_grad=False)
    return risk


def grad_exact(phi: ParamVector, target: Target) -> np.ndarray:
    """Exact limit gradient of the risk, every component in closed form.

    For the weight and bias of neuron j the integrals run over its active
    interval only; for the output weight the integrand carries the rectified
    pre-activation, and the bias component integrates the plain residual.
    """
    _, grad = _core(phi.data, phi.H, target, want_grad=True)
    return grad


def risk_and_grad(phi: ParamVector, target: Target) -> tuple[float, np.ndarray]:
    """Risk and gradient from a single segment decomposition."""
    return _core(phi.data, phi.H, target, want_grad=True)
