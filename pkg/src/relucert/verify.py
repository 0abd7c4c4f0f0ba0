"""Randomized invariant suites behind the `verify` command.

Each suite draws fresh instances from a counter-based generator keyed by
(seed, suite id), checks one proved identity or bound at its pinned tolerance,
and reports the worst case it saw.  The gradient evaluator used by the pairing
suite can be swapped out (`grad_fn`), which is how a deliberately corrupted
build is shown to fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descent import gate_random, train
from .exact import grad_exact, risk_and_grad
from .flow import flow_bound_check, integrate_flow, ito_residuals
from .lyapunov import pairing_residuals, v_const
from .mollifier import grad_mollified
from .network import (
    ConstantTarget,
    ParamVector,
    PiecewisePolynomialTarget,
    active_interval,
    interior_kinks,
    piecewise_form,
    realize,
)
from .oracle import fd_gradient, reference_grad, reference_risk

SCALES = ("small", "full")


@dataclass(frozen=True)
class SuiteResult:
    """Outcome of one randomized check.

    `worst` is the largest violation-style metric observed (suite-specific;
    zero or negative always means clean), `bound` the threshold it is held to.
    """

    suite: str
    check: str
    cases: int
    worst: float
    bound: float
    passed: bool


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


def random_phi(rng: np.random.Generator, H: int, scale: float = 1.0) -> ParamVector:
    return ParamVector(rng.uniform(-scale, scale, size=3 * H + 1), H=H)


def nondegenerate_phi(rng: np.random.Generator, H: int, scale: float = 1.0,
                      margin: float = 0.01, weight_floor: float = 0.1) -> ParamVector:
    """Draw phi whose risk is differentiable with room to spare: every neuron
    has |w|+|b| above the floor and no kink within `margin` of 0 or 1."""
    while True:
        phi = random_phi(rng, H, scale)
        w, b = phi.w, phi.b
        if np.any(np.abs(w) + np.abs(b) <= weight_floor):
            continue
        nz = w != 0.0
        t = -b[nz] / w[nz]
        if np.any((np.abs(t) <= margin) | (np.abs(t - 1.0) <= margin)):
            continue
        return phi


def random_poly_target(rng: np.random.Generator, max_pieces: int = 3,
                       max_degree: int = 3, scale: float = 1.0) -> PiecewisePolynomialTarget:
    """Continuous piecewise polynomial with random knots; continuity is forced
    by solving each piece's constant term at the shared knot."""
    pieces = int(rng.integers(1, max_pieces + 1))
    degree = int(rng.integers(0, max_degree + 1))
    interior = np.sort(rng.uniform(0.05, 0.95, size=pieces - 1))
    breaks = np.concatenate(([0.0], interior, [1.0]))
    coefs = rng.uniform(-scale, scale, size=(pieces, degree + 1))
    powers = np.arange(degree + 1)
    for i in range(1, pieces):
        x = breaks[i]
        left_val = coefs[i - 1] @ x**powers
        coefs[i, 0] = 0.0
        coefs[i, 0] = left_val - coefs[i] @ x**powers
    return PiecewisePolynomialTarget(breaks, coefs)


def _sizes(scale: str) -> dict:
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    small = scale == "small"
    return {
        "form": 300 if small else 1000,
        "active": 500 if small else 2000,
        "range_x": 401 if small else 2001,
        "limit": 10 if small else 50,
        "oracle": 30 if small else 200,
        "fd": 20 if small else 100,
        "pairing": 100 if small else 500,
        "bounds": 1000 if small else 10000,
        "descent": 4 if small else 20,
        "descent_steps": 20_000 if small else 100_000,
        "flow": 3 if small else 10,
        "flow_T": 5.0 if small else 10.0,
    }


def run_verification(seed: int = 0, scale: str = "small", grad_fn=None) -> list[SuiteResult]:
    """Run every suite; deterministic for a fixed (seed, scale)."""
    n = _sizes(scale)
    if grad_fn is None:
        grad_fn = grad_exact
    results: list[SuiteResult] = []
    hs = (1, 2, 4, 8)

    # 1. Piecewise-affine form reproduces pointwise realization.
    rng = _rng(seed, 1)
    worst = 0.0
    for k in range(n["form"]):
        phi = random_phi(rng, hs[k % 4], 2.0)
        x = float(rng.uniform(0, 1))
        val = realize(phi, x)
        dev = abs(piecewise_form(phi)(x) - val) / (1.0 + abs(val))
        worst = max(worst, dev)
    results.append(SuiteResult("realization", "affine segments match pointwise values",
                               n["form"], worst, 1e-12, worst <= 1e-12))

    # 2. Active set empty exactly when the pre-activation peak is <= 0.
    rng = _rng(seed, 2)
    mismatches = 0
    for _ in range(n["active"]):
        w, b = rng.uniform(-2, 2, size=2)
        if rng.uniform() < 0.1:
            w = 0.0
        empty = active_interval(w, b).is_empty()
        if empty != (max(b, w + b) <= 0.0):
            mismatches += 1
    results.append(SuiteResult("active_set", "empty iff max(b; w+b) <= 0",
                               n["active"], float(mismatches), 0.0, mismatches == 0))

    # 3. Smoothed activation stays inside its proved open ranges.
    xs = np.linspace(-1000.0, 1000.0, n["range_x"])
    excess = -np.inf
    from .mollifier import sigma_r, sigma_r_prime
    for r in np.logspace(0, 8, 9):
        s = sigma_r(r, xs)
        p = sigma_r_prime(r, xs)
        excess = max(excess,
                     float((-s).max()), float((s - (np.maximum(xs, 0) + 1)).max()),
                     float((-p).max()), float((p - 1.0).max()))
    results.append(SuiteResult("mollifier_range", "0 < sigma_r < relu+1 and 0 < sigma_r' < 1",
                               9 * n["range_x"], excess, 0.0, excess < 0.0))

    # 4. Smoothed-risk gradients approach the exact limit gradient.
    rng = _rng(seed, 4)
    worst_gap = 0.0
    mono_bad = 0
    for k in range(n["limit"]):
        phi = nondegenerate_phi(rng, hs[k % 3], 1.0)
        alpha = float(rng.uniform(-2, 2))
        limit = grad_exact(phi, ConstantTarget(alpha))
        scale_g = 1.0 + float(np.linalg.norm(limit))
        gaps = [float(np.linalg.norm(grad_mollified(phi, r, alpha) - limit))
                for r in (1e2, 1e3, 1e4, 1e5)]
        worst_gap = max(worst_gap, gaps[-1] / scale_g)
        # Ties at the float floor mean the limit was reached, not a stall.
        floor = 1e-12 * scale_g
        if any(b >= a and b > floor for a, b in zip(gaps, gaps[1:])):
            mono_bad += 1
    results.append(SuiteResult("mollified_limit", "gap to limit gradient at r=1e5",
                               n["limit"], worst_gap, 1e-3, worst_gap <= 1e-3))
    results.append(SuiteResult("mollified_limit", "gap decreasing along r sweep",
                               n["limit"], float(mono_bad), 0.05 * n["limit"],
                               mono_bad <= 0.05 * n["limit"]))

    # 5. Closed-form risk and gradient match the Simpson reference.
    rng = _rng(seed, 5)
    worst_risk = 0.0
    worst_grad = 0.0
    for k in range(n["oracle"]):
        H = hs[k % 4]
        phi = random_phi(rng, H, 1.0)
        target = (ConstantTarget(float(rng.uniform(-2, 2))) if k % 2 == 0
                  else random_poly_target(rng))
        risk, grad = risk_and_grad(phi, target)
        worst_risk = max(worst_risk,
                         abs(risk - reference_risk(phi, target)) / (1.0 + risk))
        worst_grad = max(worst_grad,
                         float(np.abs(grad - reference_grad(phi, target)).max()))
    results.append(SuiteResult("exact_oracle", "risk matches piecewise Simpson",
                               n["oracle"], worst_risk, 1e-10, worst_risk <= 1e-10))
    results.append(SuiteResult("exact_oracle", "gradient matches piecewise Simpson",
                               n["oracle"], worst_grad, 1e-8, worst_grad <= 1e-8))

    # 6. Gradient components equal central differences of the risk.
    rng = _rng(seed, 6)
    worst_fd = 0.0
    for k in range(n["fd"]):
        H = hs[k % 3]
        phi = nondegenerate_phi(rng, H, 1.0)
        target = ConstantTarget(float(rng.uniform(-2, 2)))
        grad = grad_exact(phi, target)
        fd = fd_gradient(lambda d: risk_and_grad(ParamVector(d, H=H), target)[0],
                         phi.data, 1e-6)
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - grad) / (1.0 + np.abs(grad)))))
    results.append(SuiteResult("fd_consistency", "grad equals finite differences of risk",
                               n["fd"], worst_fd, 1e-4, worst_fd <= 1e-4))

    # 7. Pairing identities <grad V, G> = 8L and <grad V_i, G> = 4L.
    rng = _rng(seed, 7)
    worst_pair = 0.0
    for k in range(n["pairing"]):
        phi = random_phi(rng, hs[k % 4], 2.0)
        alpha = float(rng.uniform(-5, 5))
        worst_pair = max(worst_pair, *pairing_residuals(phi, alpha, grad_fn))
    results.append(SuiteResult("lyapunov_pairing", "pairing of grad V with G is 8L; halves give 4L",
                               n["pairing"], worst_pair, 1e-10, worst_pair <= 1e-10))

    # 8. Norm sandwich and gradient bound.
    rng = _rng(seed, 8)
    sandwich_bad = 0
    worst_slack = 0.0
    for k in range(n["bounds"]):
        phi = random_phi(rng, hs[k % 4], 2.0)
        alpha = float(rng.uniform(-2, 2))
        nsq = phi.norm_sq()
        v = v_const(phi, alpha)
        if not (nsq <= v <= 3.0 * nsq + 8.0 * alpha * alpha):
            sandwich_bad += 1
        risk, grad = risk_and_grad(phi, ConstantTarget(alpha))
        slack = (8.0 * nsq + 4.0) * risk - float(grad @ grad)
        worst_slack = max(worst_slack, -slack / (1.0 + risk))
    results.append(SuiteResult("norm_sandwich", "|phi|^2 <= V <= 3|phi|^2 + 8a^2",
                               n["bounds"], float(sandwich_bad), 0.0, sandwich_bad == 0))
    results.append(SuiteResult("gradient_bound", "|G|^2 <= (8|phi|^2 + 4) L",
                               n["bounds"], worst_slack, 1e-9, worst_slack <= 1e-9))

    # 9. Descent certificates along gated runs.
    rng = _rng(seed, 9)
    worst_desc = 0.0
    worst_norm = 0.0
    worst_sum = 0.0
    for k in range(n["descent"]):
        H = hs[k % 4]
        phi0 = random_phi(rng, H, 1.0)
        alpha = float(rng.uniform(-2, 2))
        gamma = gate_random(1.0, H, alpha)
        tr = train(phi0, gamma, ConstantTarget(alpha),
                   max_steps=n["descent_steps"], risk_tol=1e-8, keep_states=False)
        v0 = tr.v_values[0]
        worst_desc = max(worst_desc,
                         float(np.max(-tr.descent_slacks / (1.0 + tr.v_values))))
        worst_norm = max(worst_norm, tr.max_norm - float(np.sqrt(v0)))
        worst_sum = max(worst_sum,
                        float(np.max(np.cumsum(tr.risks)) - v0 / (4.0 * gamma)))
    results.append(SuiteResult("descent", "V(n+1) - V(n) <= -4 gamma L(n)",
                               n["descent"], worst_desc, 1e-9, worst_desc <= 1e-9))
    results.append(SuiteResult("descent", "|theta_n| <= sqrt(V(0))",
                               n["descent"], worst_norm, 1e-9, worst_norm <= 1e-9))
    results.append(SuiteResult("descent", "sum of risks <= V(0)/(4 gamma)",
                               n["descent"], worst_sum, 1e-6, worst_sum <= 1e-6))

    # 10. Flow identities and trajectory bounds.
    rng = _rng(seed, 10)
    worst_res = 0.0
    bounds_bad = 0
    for k in range(n["flow"]):
        H = hs[k % 3]
        phi0 = random_phi(rng, H, 1.0)
        alpha = float(rng.uniform(-1, 1))
        trace = integrate_flow(phi0, ConstantTarget(alpha), T=n["flow_T"], h=1e-3)
        res = ito_residuals(trace)
        worst_res = max(worst_res, res.v_identity_max, res.l_identity_max)
        checks = flow_bound_check(trace)
        if not (checks.sup_norm_ok and checks.decay_ok and checks.monotone_ok):
            bounds_bad += 1
    results.append(SuiteResult("flow", "accumulated-risk and gradient identities",
                               n["flow"], worst_res, 1e-6, worst_res <= 1e-6))
    results.append(SuiteResult("flow", "sup-norm / decay / monotone bounds",
                               n["flow"], float(bounds_bad), 0.0, bounds_bad == 0))

    return results
