"""Smooth rectifier approximations and quadrature-based risks built on them.

The family sigma_r(x) = ln(1 + exp(r x)/r) / r, r >= 1, decreases to the
rectifier max{x, 0} pointwise as r grows; its derivative 1/(1 + r exp(-r x))
tends to the step indicator away from 0.  Both are evaluated through
overflow-safe branches and are pinned to their open-interval ranges
(0, max{x,0}+1) and (0, 1), which float rounding would otherwise touch.

Risks and gradients for a constant target are integrated with composite
Gauss-Legendre panels, dyadically refined around each kink -b_j/w_j because
the smoothing transition there has width of order 1/r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .network import ParamVector

# Branch switch for the exponential argument; e^30 is comfortably representable
# and the two branches agree to ~1e-14 across the overlap.
_BRANCH = 30.0

_TINY = np.nextafter(0.0, 1.0)
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _check_r(r: float) -> float:
    r = float(r)
    if not (r >= 1.0):
        raise ValueError(f"smoothing parameter r must be >= 1, got {r}")
    return r


def sigma_r(r: float, x):
    """Smoothed rectifier ln(1 + exp(r x)/r)/r, stable for any float argument."""
    r = _check_r(r)
    xs = np.asarray(x, dtype=float)
    z = r * xs
    big = z > _BRANCH
    z_lo = np.where(big, _BRANCH, z)
    z_hi = np.where(big, z, _BRANCH)
    out = np.where(
        big,
        xs + np.log(1.0 / r + np.exp(-z_hi)) / r,
        np.log1p(np.exp(z_lo) / r) / r,
    )
    out = np.maximum(out, _TINY)
    if np.isscalar(x) or xs.ndim == 0:
        return float(out)
    return out


def sigma_r_prime(r: float, x):
    """Derivative 1/(1 + r exp(-r x)) of the smoothed rectifier, in (0, 1)."""
    r = _check_r(r)
    xs = np.asarray(x, dtype=float)
    z = r * xs
    low = z < -_BRANCH
    z_lo = np.where(low, z, -_BRANCH)
    z_hi = np.where(low, -_BRANCH, z)
    e_lo = np.exp(z_lo)
    out = np.where(low, e_lo / (e_lo + r), 1.0 / (1.0 + r * np.exp(-z_hi)))
    out = np.clip(out, _TINY, _BELOW_ONE)
    if np.isscalar(x) or xs.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuadratureConfig:
    """Panel layout for the smoothed-risk quadrature.

    kink_refinement_width=None sizes the window around the kink of neuron j as
    35/(r |w_j|), matching the x-width 1/(r |w_j|) of the activation transition
    with enough margin that the leftover tail is at rounding level; within the
    window, panel edges are placed dyadically for `refinement_levels` halvings.
    An explicit width applies uniformly to every kink.
    """

    nodes_per_panel: int = 16
    base_panels: int = 8
    kink_refinement_width: float | None = None
    refinement_levels: int = 4

    def __post_init__(self):
        if self.nodes_per_panel < 2:
            raise ValueError("nodes_per_panel must be >= 2")
        if self.base_panels < 1:
            raise ValueError("base_panels must be >= 1")
        if self.refinement_levels < 0:
            raise ValueError("refinement_levels must be >= 0")
        if self.kink_refinement_width is not None and not (self.kink_refinement_width > 0):
            raise ValueError("kink_refinement_width must be positive")


DEFAULT_QUADRATURE = QuadratureConfig()


def _panel_nodes(phi: "ParamVector", r: float, config: QuadratureConfig):
    """Gauss-Legendre nodes and weights on [0, 1], refined near every kink."""
    edges = [np.linspace(0.0, 1.0, config.base_panels + 1)]
    w, b = phi.w, phi.b
    nz = w != 0.0
    kinks = -b[nz] / w[nz]
    inside = (kinks > 0.0) & (kinks < 1.0)
    kinks = kinks[inside]
    if kinks.size:
        if config.kink_refinement_width is None:
            widths = np.minimum(35.0 / (r * np.abs(w[nz][inside])), 1.0)
        else:
            widths = np.full(kinks.size, config.kink_refinement_width)
        offsets = widths[:, None] / 2.0 ** np.arange(config.refinement_levels + 1)
        around = np.concatenate([kinks, (kinks[:, None] + offsets).ravel(),
                                 (kinks[:, None] - offsets).ravel()])
        edges.append(around[(around > 0.0) & (around < 1.0)])
    pts = np.unique(np.concatenate(edges))
    pts = pts[np.concatenate(([True], np.diff(pts) > 1e-15))]
    if pts[0] != 0.0:
        pts = np.concatenate(([0.0], pts))
    if pts[-1] != 1.0:
        pts = np.concatenate((pts, [1.0]))
    gl_x, gl_w = np.polynomial.legendre.leggauss(config.nodes_per_panel)
    half = 0.5 * (pts[1:] - pts[:-1])
    mid = 0.5 * (pts[1:] + pts[:-1])
    nodes = (mid[:, None] + half[:, None] * gl_x).ravel()
    weights = (half[:, None] * gl_w).ravel()
    return nodes, weights


def risk_mollified(phi: "ParamVector", r: float, alpha: float,
                   config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Quadrature value of the mean squared error of the smoothed realization."""
    r = _check_r(r)
    nodes, weights = _panel_nodes(phi, r, config)
    pre = np.multiply.outer(nodes, phi.w) + phi.b
    residual = sigma_r(r, pre) @ phi.v + phi.c - alpha
    return float(weights @ (residual * residual))


def grad_mollified(phi: "ParamVector", r: float, alpha: float,
                   config: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Gradient of the smoothed risk, one quadrature pass over all components.

    The returned array follows the (w, b, v, c) parameter layout.
    """
    r = _check_r(r)
    H = phi.H
    nodes, weights = _panel_nodes(phi, r, config)
    pre = np.multiply.outer(nodes, phi.w) + phi.b  # (N, H)
    act = sigma_r(r, pre)
    slope = sigma_r_prime(r, pre)
    residual = act @ phi.v + phi.c - alpha
    wr = weights * residual
    wrx = wr * nodes
    grad = np.empty(3 * H + 1)
    grad[:H] = 2.0 * phi.v * (wrx @ slope)
    grad[H : 2 * H] = 2.0 * phi.v * (wr @ slope)
    grad[2 * H : 3 * H] = 2.0 * (wr @ act)
    grad[3 * H] = 2.0 * wr.sum()
    grad += 0.0  # normalize signed zeros from v_j == 0 prefactors
    return grad


def limit_gap_sweep(phi: "ParamVector", alpha: float, rs,
                    config: QuadratureConfig = DEFAULT_QUADRATURE):
    """Distance of the smoothed-risk gradient from its rectifier limit, per r.

    Returns [(r, ||grad_mollified(r) - limit||)] for the given increasing rs.
    """
    rs = [float(r) for r in rs]
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ValueError("rs must be strictly increasing")
    from .exact import grad_exact
    from .network import ConstantTarget

    limit = grad_exact(phi, ConstantTarget(alpha))
    out = []
    for r in rs:
        gap = float(np.linalg.norm(grad_mollified(phi, r, alpha, config) - limit))
        out.append((r, gap))
    return out
