"""Plain gradient descent on the exact risk, with per-step descent certificates.

The iteration is theta_{n+1} = theta_n - gamma * G(theta_n) with the exact
closed-form gradient.  For a constant target, any learning rate passing the
gate 1/(4 V(theta_0) + 2) guarantees V(theta_{n+1}) - V(theta_n)
<= -4 gamma L(theta_n); each step's margin against that inequality is recorded
as a slack.  Larger rates (and non-constant targets, for which no gate is
proved here) still run but the trace is flagged uncertified and nothing is
asserted about it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exact import _core
from .lyapunov import _v_const_data, _v_general_data, v_const
from .network import ConstantTarget, ParamVector, Target

GATE_NAMES = ("exact", "conservative")


class DivergenceError(RuntimeError):
    """Iteration produced non-finite values; carries the trace gathered so far."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = trace


def gate_exact(phi0: ParamVector, alpha: float) -> float:
    """Largest certified learning rate 1/(4 V(theta_0) + 2)."""
    return 1.0 / (4.0 * v_const(phi0, alpha) + 2.0)


def gate_conservative(phi0: ParamVector, alpha: float) -> float:
    """Certified rate 1/(12 ||theta_0||^2 + 32 alpha^2 + 2); never above gate_exact."""
    return 1.0 / (12.0 * phi0.norm_sq() + 32.0 * alpha * alpha + 2.0)


def gate_random(c: float, H: int, alpha: float) -> float:
    """Certified rate for any start inside [-c, c]^{3H+1}:
    1/(12 c^2 (3H+1) + 32 alpha^2 + 2)."""
    if not c > 0.0:
        raise ValueError(f"box half-width c must be positive, got {c}")
    return 1.0 / (12.0 * c * c * (3 * H + 1) + 32.0 * alpha * alpha + 2.0)


def gd_step(phi: ParamVector, gamma: float, target: Target) -> ParamVector:
    """One descent update with the exact gradient."""
    if not gamma > 0.0:
        raise ValueError(f"learning rate must be positive, got {gamma}")
    _, grad = _core(phi.data, phi.H, target, want_grad=True)
    return ParamVector(phi.data - gamma * grad, H=phi.H)


@dataclass(frozen=True)
class StepRecord:
    n: int
    phi: ParamVector
    risk: float
    grad_norm: float
    v: float
    descent_slack: float


@dataclass(frozen=True, eq=False)
class TrainTrace:
    """Per-step history of one descent run.

    descent_slacks[n] = V(theta_n) - V(theta_{n+1}) - 4 gamma L(theta_n); the
    final entry, which has no successor step, is zero by convention.  `states`
    is None when the run was asked not to retain parameter vectors.
    """

    gamma: float
    gate_used: str
    terminated_by: str
    certified: bool
    H: int
    risks: np.ndarray
    grad_norms: np.ndarray
    v_values: np.ndarray
    descent_slacks: np.ndarray
    max_norm: float
    states: np.ndarray | None = field(repr=False, default=None)

    @property
    def steps(self) -> int:
        """Number of gradient updates performed."""
        return len(self.risks) - 1

    @property
    def final_risk(self) -> float:
        return float(self.risks[-1])

    @property
    def records(self) -> list[StepRecord]:
        if self.states is None:
            raise ValueError("trace was captured without parameter states")
        return [
            StepRecord(
                n=n,
                phi=ParamVector(self.states[n], H=self.H),
                risk=float(self.risks[n]),
                grad_norm=float(self.grad_norms[n]),
                v=float(self.v_values[n]),
                descent_slack=float(self.descent_slacks[n]),
            )
            for n in range(len(self.risks))
        ]


def _resolve_gamma(gamma, phi0: ParamVector, target: Target):
    if isinstance(gamma, str):
        if not isinstance(target, ConstantTarget):
            raise ValueError("gate names require a constant target")
        if gamma == "exact":
            return gate_exact(phi0, target.alpha), "exact"
        if gamma == "conservative":
            return gate_conservative(phi0, target.alpha), "conservative"
        raise ValueError(f"unknown gate name {gamma!r}; expected one of {GATE_NAMES}")
    gamma = float(gamma)
    if not gamma > 0.0:
        raise ValueError(f"learning rate must be positive, got {gamma}")
    return gamma, "explicit"


def train(
    phi0: ParamVector,
    gamma,
    target: Target,
    max_steps: int = 100_000,
    risk_tol: float = 1e-10,
    keep_states: bool = True,
) -> TrainTrace:
    """Run gradient descent until the risk falls below risk_tol or max_steps updates.

    `gamma` is either an explicit rate or a gate name ("exact" or
    "conservative") resolved at theta_0.  The trace is certified only when the
    target is constant and the rate passes the exact gate.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    gamma, gate_used = _resolve_gamma(gamma, phi0, target)
    constant = isinstance(target, ConstantTarget)
    certified = constant and gamma <= gate_exact(phi0, target.alpha)

    H = phi0.H
    if constant:
        alpha = target.alpha
        lyap = lambda d: _v_const_data(d, H, alpha)  # noqa: E731
    else:
        lyap = lambda d: _v_general_data(d, H)  # noqa: E731
    dim = 3 * H + 1
    data = phi0.data.copy()
    risks: list[float] = []
    grad_norms: list[float] = []
    v_values: list[float] = []
    states: list[np.ndarray] | None = [] if keep_states else None
    max_norm = 0.0
    terminated_by = "max_steps"

    def build_trace() -> TrainTrace:
        r = np.asarray(risks)
        gn = np.asarray(grad_norms)
        vv = np.asarray(v_values)
        slacks = np.zeros_like(r)
        if len(r) > 1:
            slacks[:-1] = vv[:-1] - vv[1:] - 4.0 * gamma * r[:-1]
        return TrainTrace(
            gamma=gamma,
            gate_used=gate_used,
            terminated_by=terminated_by,
            certified=certified,
            H=H,
            risks=r,
            grad_norms=gn,
            v_values=vv,
            descent_slacks=slacks,
            max_norm=max_norm,
            states=np.asarray(states) if states is not None else None,
        )

    for n in range(max_steps + 1):
        risk, grad = _core(data, H, target, want_grad=True)
        if not (np.isfinite(risk) and np.all(np.isfinite(grad))):
            terminated_by = "diverged"
            raise DivergenceError(f"non-finite risk or gradient at step {n}", build_trace())
        risks.append(risk)
        grad_norms.append(float(np.linalg.norm(grad)))
        v_values.append(lyap(data))
        max_norm = max(max_norm, float(np.linalg.norm(data)))
        if states is not None:
            states.append(data.copy())
        if risk <= risk_tol:
            terminated_by = "risk_tol"
            break
        if n == max_steps:
            terminated_by = "max_steps"
            break
        data = data - gamma * grad
        if not np.all(np.isfinite(data)):
            terminated_by = "diverged"
            raise DivergenceError(f"non-finite parameters after step {n}", build_trace())
    return build_trace()


def _batched_risk_grad(data: np.ndarray, H: int, alpha: np.ndarray):
    """Exact risk and gradient for a batch of parameter rows, constant targets.

    Invalid or exterior kinks are pinned to 1.0 before sorting, which only
    creates zero-width segments that integrate to nothing, so no per-row
    deduplication is needed.  Matches the scalar path to rounding.
    """
    B = data.shape[0]
    w = data[:, :H]
    b = data[:, H : 2 * H]
    v = data[:, 2 * H : 3 * H]
    c = data[:, 3 * H]

    with np.errstate(divide="ignore", invalid="ignore"):
        kinks = np.where(w != 0.0, -b / w, 1.0)
    kinks = np.where((kinks > 0.0) & (kinks < 1.0), kinks, 1.0)
    pts = np.empty((B, H + 2))
    pts[:, 0] = 0.0
    pts[:, -1] = 1.0
    pts[:, 1:-1] = np.sort(kinks, axis=1)
    left = pts[:, :-1]
    right = pts[:, 1:]
    mid = 0.5 * (left + right)  # (B, S)

    active = w[:, None, :] * mid[:, :, None] + b[:, None, :] > 0.0  # (B, S, H)
    vw = v * w
    vb = v * b
    slope = np.einsum("bsh,bh->bs", active, vw)
    intercept = c[:, None] + np.einsum("bsh,bh->bs", active, vb)

    r0 = intercept - alpha[:, None]
    r1 = slope
    p1 = right - left
    p2 = 0.5 * (right * right - left * left)
    p3 = (right * right * right - left * left * left) / 3.0
    risk = np.einsum("bs,bs->b", r0 * r0, p1) + 2.0 * np.einsum("bs,bs->b", r0 * r1, p2) \
        + np.einsum("bs,bs->b", r1 * r1, p3)
    m0 = r0 * p1 + r1 * p2
    m1 = r0 * p2 + r1 * p3
    am0 = np.einsum("bsh,bs->bh", active, m0)
    am1 = np.einsum("bsh,bs->bh", active, m1)

    grad = np.empty_like(data)
    grad[:, :H] = 2.0 * v * am1
    grad[:, H : 2 * H] = 2.0 * v * am0
    grad[:, 2 * H : 3 * H] = 2.0 * (w * am1 + b * am0)
    grad[:, 3 * H] = 2.0 * m0.sum(axis=1)
    grad += 0.0
    return risk, grad


def _batched_descent(data0: np.ndarray, H: int, alpha: np.ndarray, gamma: np.ndarray,
                     max_steps: int, risk_tol: float):
    """Run all rows of data0 simultaneously until each meets risk_tol or the cap.

    Frozen rows stop updating but stay in the batch; per-row histories are
    truncated at each row's own stopping step.  Returns per-row risk arrays,
    Lyapunov arrays, step counts, peak norms, and final states.
    """
    B, dim = data0.shape
    data = data0.copy()
    sq_alpha4 = 4.0 * alpha * alpha
    risks = np.empty((max_steps + 1, B))
    vs = np.empty((max_steps + 1, B))
    max_norm = np.zeros(B)
    stopped_at = np.full(B, max_steps, dtype=int)
    running = np.ones(B, dtype=bool)
    for n in range(max_steps + 1):
        risk, grad = _batched_risk_grad(data, H, alpha)
        if not (np.all(np.isfinite(risk)) and np.all(np.isfinite(grad))):
            raise DivergenceError(f"non-finite batched iterate at step {n}", None)
        c = data[:, 3 * H]
        norm_sq = np.einsum("bi,bi->b", data, data)
        risks[n] = risk
        vs[n] = norm_sq + c * c - 2.0 * (2.0 * alpha) * c + sq_alpha4
        max_norm = np.maximum(max_norm, np.sqrt(norm_sq))
        hit = running & (risk <= risk_tol)
        stopped_at[hit] = n
        running &= ~hit
        if n == max_steps or not running.any():
            stopped_at[running] = n
            break
        data[running] -= gamma[running, None] * grad[running]
    risk_hist = [risks[: stopped_at[i] + 1, i].copy() for i in range(B)]
    v_hist = [vs[: stopped_at[i] + 1, i].copy() for i in range(B)]
    return risk_hist, v_hist, stopped_at, max_norm, data


@dataclass(frozen=True, eq=False)
class RandomInitSummary:
    """Aggregate of independent descent runs from uniform box initializations.

    mean_risk_trajectory averages risks across trials step by step; trials
    that stopped early contribute their final risk from then on.
    """

    gamma: float
    sup_norm_bound: float
    seed: int
    final_risks: np.ndarray
    steps: np.ndarray
    max_norms: np.ndarray
    sup_norm_ok: np.ndarray
    mean_risk_trajectory: np.ndarray

    @property
    def mean_final_risk(self) -> float:
        return float(self.final_risks.mean())

    @property
    def all_bounded(self) -> bool:
        return bool(self.sup_norm_ok.all())


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # Counter-based generator; each trial owns the substream keyed by its index.
    return np.random.Generator(np.random.Philox(key=np.array([seed, trial], dtype=np.uint64)))


def random_init_experiment(
    c: float,
    H: int,
    alpha: float,
    n_trials: int,
    max_steps: int,
    seed: int,
    risk_tol: float = 1e-10,
) -> RandomInitSummary:
    """Descent from n_trials uniform draws in [-c, c]^{3H+1} at the certified box rate.

    Every trial must stay inside the ball of radius
    sqrt(3 c^2 (3H+1) + 8 alpha^2); the per-trial check is reported rather than
    asserted.  Fixed (seed, trial) pairs make reruns byte-identical; trials are
    independent and merged by trial index.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    gamma = gate_random(c, H, alpha)
    bound = float(np.sqrt(3.0 * c * c * (3 * H + 1) + 8.0 * alpha * alpha))

    data0 = np.stack([
        _trial_rng(seed, trial).uniform(-c, c, size=3 * H + 1) for trial in range(n_trials)
    ])
    trajectories, _, stopped_at, max_norms, _ = _batched_descent(
        data0, H, np.full(n_trials, float(alpha)), np.full(n_trials, gamma),
        max_steps, risk_tol,
    )
    final_risks = np.array([t[-1] for t in trajectories])
    steps = np.asarray(stopped_at)

    longest = max(len(t) for t in trajectories)
    mean = np.zeros(longest)
    for t in trajectories:
        mean[: len(t)] += t
        mean[len(t) :] += t[-1]
    mean /= n_trials

    return RandomInitSummary(
        gamma=gamma,
        sup_norm_bound=bound,
        seed=seed,
        final_risks=final_risks,
        steps=steps,
        max_norms=max_norms,
        sup_norm_ok=max_norms <= bound + 1e-9,
        mean_risk_trajectory=mean,
    )
