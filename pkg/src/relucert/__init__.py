"""Exact risk calculus, Lyapunov certificates, and certified gradient descent
for one-hidden-layer rectifier networks trained against targets on [0, 1]."""

from .descent import (
    DivergenceError,
    RandomInitSummary,
    StepRecord,
    TrainTrace,
    gate_conservative,
    gate_exact,
    gate_random,
    gd_step,
    random_init_experiment,
    train,
)
from .exact import grad_exact, risk_and_grad, risk_exact, segment_moment
from .flow import (
    FlowBounds,
    FlowTrace,
    GeneralTargetBounds,
    ItoResiduals,
    apriori_general_check,
    cumulative_integral,
    flow_bound_check,
    integrate_flow,
    ito_residuals,
    smooth_arc_length,
)
from .lyapunov import (
    LyapunovReport,
    certify,
    grad_v,
    grad_v_general,
    pairing_residuals,
    v_const,
    v_general,
    v_split,
)
from .mollifier import (
    QuadratureConfig,
    grad_mollified,
    limit_gap_sweep,
    risk_mollified,
    sigma_r,
    sigma_r_prime,
)
from .network import (
    ActiveInterval,
    ConstantTarget,
    IntervalKind,
    LayoutError,
    ParamVector,
    PiecewiseAffineForm,
    PiecewisePolynomialTarget,
    Target,
    active_interval,
    interior_kinks,
    piecewise_form,
    realize,
    realize_mollified,
    unpack,
)
from .oracle import OracleConfig, OracleError, fd_gradient, reference_grad, reference_risk, simpson

__version__ = "0.1.0"

__all__ = [
    "ActiveInterval",
    "ConstantTarget",
    "DivergenceError",
    "FlowBounds",
    "FlowTrace",
    "GeneralTargetBounds",
    "IntervalKind",
    "ItoResiduals",
    "LayoutError",
    "LyapunovReport",
    "OracleConfig",
    "OracleError",
    "ParamVector",
    "PiecewiseAffineForm",
    "PiecewisePolynomialTarget",
    "QuadratureConfig",
    "RandomInitSummary",
    "StepRecord",
    "Target",
    "TrainTrace",
    "active_interval",
    "apriori_general_check",
    "certify",
    "cumulative_integral",
    "fd_gradient",
    "flow_bound_check",
    "gate_conservative",
    "gate_exact",
    "gate_random",
    "gd_step",
    "grad_exact",
    "grad_mollified",
    "grad_v",
    "grad_v_general",
    "integrate_flow",
    "interior_kinks",
    "ito_residuals",
    "limit_gap_sweep",
    "pairing_residuals",
    "piecewise_form",
    "random_init_experiment",
    "realize",
    "realize_mollified",
    "reference_grad",
    "reference_risk",
    "risk_and_grad",
    "risk_exact",
    "risk_mollified",
    "segment_moment",
    "sigma_r",
    "smooth_arc_length",
    "sigma_r_prime",
    "simpson",
    "train",
    "unpack",
    "v_const",
    "v_general",
    "v_split",
]
