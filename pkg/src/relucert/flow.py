"""Fixed-step integration of the gradient flow theta' = -G(theta) and its certificates.

Along the exact flow two integral identities hold: the Lyapunov value drops by
8 times the accumulated risk, and the risk drops by the accumulated squared
gradient norm.  The integrator reports how far a numerical trajectory is from
satisfying both, together with the sup-norm, decay, and monotonicity bounds
they imply.  Time integrals in these checks are formed by a fourth-order
cumulative rule on the stored grid, so the certificate never reuses the ODE
stepper's own arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descent import DivergenceError
from .exact import _core
from .lyapunov import _v_const_data, _v_general_data, v_general
from .network import ConstantTarget, ParamVector, PiecewisePolynomialTarget, Target

METHODS = ("rk4", "euler")


@dataclass(frozen=True, eq=False)
class FlowTrace:
    """Trajectory samples of one flow integration.

    v_values hold the constant-target Lyapunov value when the trace was
    produced against a constant target, and ||theta||^2 + c^2 otherwise.
    """

    times: np.ndarray
    states: np.ndarray = field(repr=False)
    risks: np.ndarray
    v_values: np.ndarray
    grad_sq_norms: np.ndarray
    step_size: float
    method: str

    def state(self, i: int) -> ParamVector:
        return ParamVector(self.states[i])

    def prefix(self, n: int) -> "FlowTrace":
        """The trace restricted to its first n grid points."""
        if not 1 <= n <= len(self.times):
            raise ValueError(f"prefix length {n} outside 1..{len(self.times)}")
        return FlowTrace(
            times=self.times[:n],
            states=self.states[:n],
            risks=self.risks[:n],
            v_values=self.v_values[:n],
            grad_sq_norms=self.grad_sq_norms[:n],
            step_size=self.step_size,
            method=self.method,
        )


@dataclass(frozen=True)
class ItoResiduals:
    """Worst deviation over the grid from the two flow identities."""

    v_identity_max: float
    l_identity_max: float


@dataclass(frozen=True)
class FlowBounds:
    sup_norm_ok: bool
    decay_ok: bool
    monotone_ok: bool


@dataclass(frozen=True)
class GeneralTargetBounds:
    v_growth_ok: bool
    norm_growth_ok: bool


def integrate_flow(
    phi0: ParamVector,
    target: Target,
    T: float,
    h: float,
    method: str = "rk4",
) -> FlowTrace:
    """Integrate theta' = -G(theta) from phi0 over [0, T] with fixed step h.

    The step is nudged to T / round(T / h) so the grid lands exactly on T.
    Raises DivergenceError with the partial trace if the state leaves the
    range of finite floats.
    """
    if not T > 0.0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if not 0.0 < h <= T:
        raise ValueError(f"step h must lie in (0, T], got {h}")
    method = method.lower()
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")

    n_steps = max(1, int(round(T / h)))
    h = T / n_steps
    H = phi0.H
    constant = isinstance(target, ConstantTarget)
    if constant:
        alpha = target.alpha
        lyap = lambda d: _v_const_data(d, H, alpha)  # noqa: E731
    else:
        lyap = lambda d: _v_general_data(d, H)  # noqa: E731

    times = h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, 3 * H + 1))
    risks = np.empty(n_steps + 1)
    v_values = np.empty(n_steps + 1)
    grad_sq = np.empty(n_steps + 1)

    def partial(count: int) -> FlowTrace:
        return FlowTrace(
            times=times[:count],
            states=states[:count],
            risks=risks[:count],
            v_values=v_values[:count],
            grad_sq_norms=grad_sq[:count],
            step_size=h,
            method=method,
        )

    data = phi0.data.copy()
    for i in range(n_steps + 1):
        risk, grad = _core(data, H, target, want_grad=True)
        if not (np.isfinite(risk) and np.all(np.isfinite(grad)) and np.all(np.isfinite(data))):
            raise DivergenceError(f"non-finite state at t={times[i]:g}", partial(i))
        states[i] = data
        risks[i] = risk
        v_values[i] = lyap(data)
        grad_sq[i] = grad @ grad
        if i == n_steps:
            break
        if method == "euler":
            data = data - h * grad
        else:
            k1 = -grad
            _, g2 = _core(data + (0.5 * h) * k1, H, target, want_grad=True)
            k2 = -g2
            _, g3 = _core(data + (0.5 * h) * k2, H, target, want_grad=True)
            k3 = -g3
            _, g4 = _core(data + h * k3, H, target, want_grad=True)
            k4 = -g4
            data = data + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return partial(n_steps + 1)


def cumulative_integral(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral of uniformly sampled y, fourth order at every grid point.

    Each increment integrates the cubic through the surrounding four samples
    (exact for cubics); short inputs fall back to the trapezoid rule.
    """
    y = np.asarray(y, dtype=float)
    n = y.size - 1
    if n < 3:
        inc = 0.5 * h * (y[1:] + y[:-1])
    else:
        inc = np.empty(n)
        inc[0] = h * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3]) / 24.0
        inc[1:-1] = h * (-y[:-3] + 13.0 * y[1:-2] + 13.0 * y[2:-1] - y[3:]) / 24.0
        inc[-1] = h * (y[-4] - 5.0 * y[-3] + 19.0 * y[-2] + 9.0 * y[-1]) / 24.0
    out = np.empty(y.size)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    return out


def smooth_arc_length(trace: FlowTrace, degeneracy_tol: float = 1e-8) -> int:
    """Number of leading grid points during which no neuron changes regime.

    A neuron's active set inside [0, 1] is classified by the signs of its
    pre-activation at the two endpoints; when either sign flips, or a neuron
    passes within degeneracy_tol of (w, b) = (0, 0), the risk loses smoothness
    in time and integrator-order measurements stop being meaningful.  The
    returned count is the largest n such that trace.prefix(n) stays inside the
    initial regime.
    """
    H = (trace.states.shape[1] - 1) // 3
    w = trace.states[:, :H]
    b = trace.states[:, H : 2 * H]
    s0 = np.sign(b)
    s1 = np.sign(w + b)
    changed = (
        np.any(s0 != s0[0], axis=1)
        | np.any(s1 != s1[0], axis=1)
        | ((np.abs(w) + np.abs(b)).min(axis=1) < degeneracy_tol)
    )
    if not changed.any():
        return len(trace.times)
    return max(int(np.argmax(changed)), 1)


def ito_residuals(trace: FlowTrace) -> ItoResiduals:
    """Worst-case defect of the two integral identities along the trace.

    The accumulated-risk identity predicts v(t) = v(0) - 8 * int_0^t risk; the
    accumulated-gradient identity predicts risk(t) = risk(0) - int_0^t |G|^2.
    """
    if trace.times.size == 0:
        raise ValueError("trace is empty")
    acc_risk = cumulative_integral(trace.risks, trace.step_size)
    acc_gsq = cumulative_integral(trace.grad_sq_norms, trace.step_size)
    v_res = trace.v_values - (trace.v_values[0] - 8.0 * acc_risk)
    l_res = trace.risks - (trace.risks[0] - acc_gsq)
    return ItoResiduals(
        v_identity_max=float(np.abs(v_res).max()),
        l_identity_max=float(np.abs(l_res).max()),
    )


def flow_bound_check(trace: FlowTrace, tol_scale: float = 1e-6) -> FlowBounds:
    """Check the three proved trajectory bounds, each with slack tol_scale*(1+V(0)):

    sup_t ||theta_t|| <= sqrt(V(0)),  8 t * risk(t) <= V(0),  and risk non-increasing.
    """
    if trace.times.size == 0:
        raise ValueError("trace is empty")
    v0 = float(trace.v_values[0])
    tol = tol_scale * (1.0 + v0)
    norms = np.linalg.norm(trace.states, axis=1)
    sup_norm_ok = bool(np.all(norms <= np.sqrt(max(v0, 0.0)) + tol))
    positive = trace.times > 0.0
    decay_ok = bool(
        np.all(8.0 * trace.times[positive] * trace.risks[positive] <= v0 + tol)
    )
    monotone_ok = bool(np.all(np.diff(trace.risks) <= tol))
    return FlowBounds(sup_norm_ok=sup_norm_ok, decay_ok=decay_ok, monotone_ok=monotone_ok)


def apriori_general_check(
    trace: FlowTrace,
    target: PiecewisePolynomialTarget,
    tol_scale: float = 1e-6,
) -> GeneralTargetBounds:
    """Check the two a priori growth bounds for a general-target flow trace:

    v(t) <= v(0) + 2 t * int f^2   and
    ||theta_t|| <= sqrt(v(0)) + sqrt(2 int f^2) * sqrt(t),

    with v = ||theta||^2 + c^2 and int f^2 evaluated exactly from the
    polynomial pieces.
    """
    if trace.times.size == 0:
        raise ValueError("trace is empty")
    v0 = float(v_general(trace.state(0)))
    two_f_sq = 2.0 * target.square_integral()
    tol = tol_scale * (1.0 + v0)
    v_vals = np.array([_v_general_data(s, (s.size - 1) // 3) for s in trace.states])
    v_growth_ok = bool(np.all(v_vals <= v0 + two_f_sq * trace.times + tol))
    norms = np.linalg.norm(trace.states, axis=1)
    bound = np.sqrt(max(v0, 0.0)) + np.sqrt(two_f_sq) * np.sqrt(trace.times)
    norm_growth_ok = bool(np.all(norms <= bound + tol))
    return GeneralTargetBounds(v_growth_ok=v_growth_ok, norm_growth_ok=norm_growth_ok)
