"""Figure rendering for the command-line reports.

Each trace-producing command can drop a PNG next to its CSV; the CSV stays the
canonical record, the figure is a convenience view of the same arrays.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .descent import TrainTrace
from .flow import FlowTrace

_DPI = 150


def render_train(trace: TrainTrace, path) -> None:
    """Risk decay and Lyapunov descent of one training run."""
    steps = np.arange(len(trace.risks))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.semilogy(steps, np.maximum(trace.risks, 1e-18), color="tab:blue")
    ax1.set_xlabel("step")
    ax1.set_ylabel("risk")
    ax1.set_title(f"risk (final {trace.final_risk:.3e})")
    ax2.plot(steps, trace.v_values, color="tab:orange")
    ax2.set_xlabel("step")
    ax2.set_ylabel("V")
    label = "certified" if trace.certified else "uncertified"
    ax2.set_title(f"Lyapunov value ({label}, gamma={trace.gamma:.3g})")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_flow(trace: FlowTrace, path) -> None:
    """Risk along the flow with its V(0)/(8t) decay envelope, and V itself."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    t = trace.times
    ax1.semilogy(t, np.maximum(trace.risks, 1e-18), color="tab:blue", label="risk")
    pos = t > 0
    if pos.any():
        envelope = trace.v_values[0] / (8.0 * t[pos])
        ax1.semilogy(t[pos], envelope, "--", color="tab:gray", label="V(0)/(8t)")
    ax1.set_xlabel("t")
    ax1.set_ylabel("risk")
    ax1.legend()
    ax1.set_title(f"flow risk ({trace.method}, h={trace.step_size:g})")
    ax2.plot(t, trace.v_values, color="tab:orange")
    ax2.set_xlabel("t")
    ax2.set_ylabel("V")
    ax2.set_title("Lyapunov value")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_sweep(rows, path) -> None:
    """Gradient gap against the smoothing parameter, log-log."""
    rows = list(rows)
    rs = np.array([r for r, _ in rows])
    gaps = np.array([g for _, g in rows])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.loglog(rs, np.maximum(gaps, 1e-18), "o-", color="tab:blue")
    ax.set_xlabel("r")
    ax.set_ylabel("|grad L_r - G|")
    ax.set_title("distance to the limit gradient")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
