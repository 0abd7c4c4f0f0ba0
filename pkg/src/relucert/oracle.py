"""Brute-force references used by tests and the verification suites.

Everything here is deliberately dumb: composite Simpson sums over pointwise
function evaluations, and central finite differences.  This module must stay
independent of the closed-form and quadrature evaluators it is used to check,
so it builds only on pointwise realization values; Simpson is also a different
quadrature family than the Gauss-Legendre panels used elsewhere, keeping the
two error sources uncorrelated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ParamVector, Target, active_interval, realize


class OracleError(RuntimeError):
    """A reference evaluation produced a non-finite sample."""


@dataclass(frozen=True)
class OracleConfig:
    simpson_panels: int = 2**14
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.simpson_panels < 2 or self.simpson_panels % 2 != 0:
            raise ValueError("simpson_panels must be an even integer >= 2")
        if not (0.0 < self.fd_step < 1e-2):
            raise ValueError("fd_step must lie in (0, 1e-2)")


def _simpson_grid(panels: int):
    if panels < 2 or panels % 2 != 0:
        raise ValueError("panels must be an even integer >= 2")
    x = np.linspace(0.0, 1.0, panels + 1)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= 1.0 / (3.0 * panels)
    return x, w


def simpson(fn, panels: int = 2**14) -> float:
    """Composite Simpson value of fn over [0, 1] with the given even panel count."""
    x, w = _simpson_grid(panels)
    try:
        y = np.asarray(fn(x), dtype=float)
        if y.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        y = np.array([float(fn(xi)) for xi in x])
    if not np.all(np.isfinite(y)):
        raise OracleError("integrand returned a non-finite sample")
    return float(w @ y)


def fd_gradient(fn, x0: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of fn: R^n -> R at x0."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.empty_like(x0)
    for i in range(x0.size):
        hi = x0.copy()
        lo = x0.copy()
        hi[i] += step
        lo[i] -= step
        f_hi = float(fn(hi))
        f_lo = float(fn(lo))
        if not (np.isfinite(f_hi) and np.isfinite(f_lo)):
            raise OracleError(f"non-finite evaluation while differencing coordinate {i}")
        grad[i] = (f_hi - f_lo) / (2.0 * step)
    return grad


def _pieces(phi: ParamVector, target: Target) -> np.ndarray:
    """Smooth-piece boundaries: network kinks plus target breakpoints."""
    w, b = phi.w, phi.b
    nz = w != 0.0
    kinks = -b[nz] / w[nz]
    kinks = kinks[(kinks > 0.0) & (kinks < 1.0)]
    t_breaks = getattr(target, "breakpoints", np.array([0.0, 1.0]))
    return np.unique(np.concatenate(([0.0, 1.0], kinks, np.asarray(t_breaks, dtype=float))))


def reference_risk(phi: ParamVector, target: Target, panels: int = 2**14) -> float:
    """Simpson value of the squared residual, applied piecewise between kinks.

    The integrand is smooth inside each piece, so Simpson converges at full
    order; integrating straight across a kink would leave an O(h^2) floor.
    """
    u, wts = _simpson_grid(panels)
    total = 0.0
    pts = _pieces(phi, target)
    for a, c in zip(pts[:-1], pts[1:]):
        x = a + (c - a) * u
        res = realize(phi, x) - target.value(x)
        if not np.all(np.isfinite(res)):
            raise OracleError("non-finite residual sample")
        total += (c - a) * float(wts @ (res * res))
    return total


def reference_grad(phi: ParamVector, target: Target, panels: int = 2**14) -> np.ndarray:
    """Simpson value of every gradient component, integrating each active
    interval directly.

    One residual evaluation per piece feeds all components; the integration
    itself remains plain Simpson on pointwise samples.
    """
    u, wts = _simpson_grid(panels)
    H = phi.H
    w, b, v = phi.w, phi.b, phi.v
    grad = np.zeros(3 * H + 1)
    pts = _pieces(phi, target)
    bounds = [active_interval(w[j], b[j]).bounds() for j in range(H)]
    for a, c in zip(pts[:-1], pts[1:]):
        x = a + (c - a) * u
        res = realize(phi, x) - target.value(x)
        if not np.all(np.isfinite(res)):
            raise OracleError("non-finite residual sample")
        scaled = (c - a) * wts
        i0 = float(scaled @ res)
        i1 = float(scaled @ (x * res))
        mid = 0.5 * (a + c)
        for j in range(H):
            if bounds[j] is not None and bounds[j][0] <= mid <= bounds[j][1]:
                grad[j] += 2.0 * v[j] * i1
                grad[H + j] += 2.0 * v[j] * i0
                grad[2 * H + j] += 2.0 * (w[j] * i1 + b[j] * i0)
        grad[3 * H] += 2.0 * i0
    return grad
