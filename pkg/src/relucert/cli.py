"""Command-line front end: JSON-configured experiments emitting CSV and figures.

Usage:
    relucert <command> --config experiment.json [--output out.csv] [--seed N]

Commands: risk | grad | train | flow | sweep | verify.  The configuration is
one JSON document (see README for the schema); --output routes the CSV to a
file (stdout otherwise) and --seed overrides any seed found in the config.
Floats are serialized with shortest round-trip notation (up to 17 significant
digits) and files are written atomically, so identical (config, seed) pairs
produce byte-identical CSV.

Exit codes: 0 success, 1 verification failure, 2 bad configuration,
3 uncertified learning rate, 4 divergence (partial trace still written),
5 output I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .descent import GATE_NAMES, DivergenceError, TrainTrace, gate_random, train
from .exact import grad_exact, risk_exact
from .flow import apriori_general_check, flow_bound_check, integrate_flow, ito_residuals
from .mollifier import limit_gap_sweep, risk_mollified
from .network import ConstantTarget, ParamVector, PiecewisePolynomialTarget, Target
from .verify import SCALES, run_verification

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_UNCERTIFIED = 3
EXIT_DIVERGED = 4
EXIT_IO = 5

COMMANDS = ("risk", "grad", "train", "flow", "sweep", "verify")


class ConfigError(Exception):
    """Invalid configuration; `field` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path: str | None, header: str, rows) -> None:
    lines = [header] + [",".join(_fmt(cell) if not isinstance(cell, str) else cell
                                 for cell in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def _require(cfg: dict, field: str, kind, check=None, message: str = "invalid value"):
    if field not in cfg:
        raise ConfigError(field, "missing")
    value = cfg[field]
    try:
        value = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(field, message) from None
    if isinstance(value, float) and not np.isfinite(value):
        raise ConfigError(field, "must be finite")
    if check is not None and not check(value):
        raise ConfigError(field, message)
    return value


def _build_target(cfg: dict) -> Target:
    has_alpha = "alpha" in cfg
    has_pieces = "target" in cfg
    if has_alpha == has_pieces:
        raise ConfigError("alpha", "exactly one of 'alpha' or 'target' is required")
    if has_alpha:
        return ConstantTarget(_require(cfg, "alpha", float))
    pieces = cfg["target"]
    if not isinstance(pieces, dict) or "breakpoints" not in pieces or "coefficients" not in pieces:
        raise ConfigError("target", "needs 'breakpoints' and 'coefficients'")
    try:
        return PiecewisePolynomialTarget(np.asarray(pieces["breakpoints"], dtype=float),
                                         pieces["coefficients"])
    except (ValueError, TypeError) as exc:
        raise ConfigError("target", str(exc)) from None


def _build_phi0(cfg: dict, H: int, seed_override: int | None) -> tuple[ParamVector, float | None]:
    """Returns (phi0, box half-width c when randomly drawn)."""
    has_explicit = "phi0" in cfg
    has_random = "init" in cfg
    if has_explicit == has_random:
        raise ConfigError("phi0", "exactly one of 'phi0' or 'init' is required")
    if has_explicit:
        try:
            return ParamVector(np.asarray(cfg["phi0"], dtype=float), H=H), None
        except (ValueError, TypeError) as exc:
            raise ConfigError("phi0", str(exc)) from None
    init = cfg["init"]
    if not isinstance(init, dict):
        raise ConfigError("init", "must be an object with 'c' and optional 'seed'")
    c = _require(init, "c", float, lambda x: x > 0, "must be positive")
    if seed_override is not None:
        seed = seed_override
    else:
        seed = _require(init, "seed", int, lambda x: x >= 0, "must be a non-negative integer")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    return ParamVector(rng.uniform(-c, c, size=3 * H + 1), H=H), c


def _build_gamma(cfg: dict, target: Target, c: float | None, H: int):
    has_gamma = "gamma" in cfg
    has_gate = "gate" in cfg
    if has_gamma == has_gate:
        raise ConfigError("gamma", "exactly one of 'gamma' or 'gate' is required")
    if has_gamma:
        return _require(cfg, "gamma", float, lambda x: x > 0, "must be positive")
    gate = cfg["gate"]
    if gate in GATE_NAMES:
        if not isinstance(target, ConstantTarget):
            raise ConfigError("gate", "gate names require a constant target")
        return gate
    if gate == "random":
        if not isinstance(target, ConstantTarget):
            raise ConfigError("gate", "gate names require a constant target")
        if c is None:
            raise ConfigError("gate", "'random' needs a random 'init' with box width c")
        return gate_random(c, H, target.alpha)
    raise ConfigError("gate", f"unknown gate {gate!r}")


def _sweep_list(cfg: dict, required: bool):
    if "r_sweep" not in cfg:
        if required:
            raise ConfigError("r_sweep", "missing")
        return None
    rs = cfg["r_sweep"]
    try:
        rs = [float(r) for r in rs]
    except (TypeError, ValueError):
        raise ConfigError("r_sweep", "must be a list of numbers") from None
    if not rs or any(not np.isfinite(r) or r < 1.0 for r in rs):
        raise ConfigError("r_sweep", "entries must be finite and >= 1")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ConfigError("r_sweep", "must be strictly increasing")
    return rs


def _figure_path(output: str) -> str:
    stem, _ = os.path.splitext(output)
    return stem + ".png"


def _maybe_render(cfg: dict, output: str | None, renderer, payload) -> None:
    if output is None or not cfg.get("plots", True):
        return
    try:
        from . import figures

        renderer_fn = getattr(figures, renderer)
        renderer_fn(payload, _figure_path(output))
    except Exception as exc:  # pragma: no cover - auxiliary artifact only
        print(f"warning: figure rendering failed: {exc}", file=sys.stderr)


def _role(index: int, H: int) -> str:
    if index < H:
        return "w"
    if index < 2 * H:
        return "b"
    if index < 3 * H:
        return "v"
    return "c"


def cmd_risk(cfg: dict, output: str | None, seed: int | None) -> int:
    H = _require(cfg, "H", int, lambda x: x >= 1, "must be a positive integer")
    target = _build_target(cfg)
    phi0, _ = _build_phi0(cfg, H, seed)
    rows = [("inf", risk_exact(phi0, target))]
    rs = _sweep_list(cfg, required=False)
    if rs:
        if not isinstance(target, ConstantTarget):
            raise ConfigError("r_sweep", "smoothed risks are defined for constant targets only")
        rows += [(_fmt(r), risk_mollified(phi0, r, target.alpha)) for r in rs]
    _write_rows(output, "r,risk", rows)
    return EXIT_OK


def cmd_grad(cfg: dict, output: str | None, seed: int | None) -> int:
    H = _require(cfg, "H", int, lambda x: x >= 1, "must be a positive integer")
    target = _build_target(cfg)
    phi0, _ = _build_phi0(cfg, H, seed)
    grad = grad_exact(phi0, target)
    rows = [(i + 1, _role(i, H), grad[i]) for i in range(grad.size)]
    _write_rows(output, "index,role,value", rows)
    return EXIT_OK


def cmd_train(cfg: dict, output: str | None, seed: int | None) -> int:
    H = _require(cfg, "H", int, lambda x: x >= 1, "must be a positive integer")
    target = _build_target(cfg)
    phi0, c = _build_phi0(cfg, H, seed)
    gamma = _build_gamma(cfg, target, c, H)
    max_steps = _require(cfg, "max_steps", int, lambda x: x >= 0) if "max_steps" in cfg else 100_000
    risk_tol = _require(cfg, "risk_tol", float, lambda x: x > 0) if "risk_tol" in cfg else 1e-10

    def emit(trace: TrainTrace) -> None:
        rows = [(n, trace.risks[n], trace.grad_norms[n], trace.v_values[n],
                 trace.descent_slacks[n]) for n in range(len(trace.risks))]
        _write_rows(output, "n,risk,grad_norm,v,descent_slack", rows)
        _maybe_render(cfg, output, "render_train", trace)
        print(f"summary: final_risk={_fmt(trace.final_risk)} steps={trace.steps} "
              f"certified={_fmt(trace.certified)} gamma={_fmt(trace.gamma)} "
              f"gate={trace.gate_used} terminated_by={trace.terminated_by}")

    try:
        trace = train(phi0, gamma, target, max_steps=max_steps, risk_tol=risk_tol,
                      keep_states=False)
    except DivergenceError as exc:
        emit(exc.trace)
        return EXIT_DIVERGED
    emit(trace)
    return EXIT_OK if trace.certified else EXIT_UNCERTIFIED


def cmd_flow(cfg: dict, output: str | None, seed: int | None) -> int:
    H = _require(cfg, "H", int, lambda x: x >= 1, "must be a positive integer")
    target = _build_target(cfg)
    phi0, _ = _build_phi0(cfg, H, seed)
    T = _require(cfg, "T", float, lambda x: x > 0) if "T" in cfg else 10.0
    h = _require(cfg, "h", float, lambda x: 0 < x <= T) if "h" in cfg else 1e-3
    method = cfg.get("method", "rk4")
    if method not in ("rk4", "euler"):
        raise ConfigError("method", "must be 'rk4' or 'euler'")

    def emit(trace) -> int:
        rows = [(trace.times[i], trace.risks[i], trace.v_values[i], trace.grad_sq_norms[i])
                for i in range(len(trace.times))]
        _write_rows(output, "t,risk,v,grad_sq_norm", rows)
        _maybe_render(cfg, output, "render_flow", trace)
        if len(trace.times) < 2:
            return EXIT_DIVERGED
        res = ito_residuals(trace)
        parts = [f"v_identity_max={_fmt(res.v_identity_max)}",
                 f"l_identity_max={_fmt(res.l_identity_max)}"]
        if isinstance(target, ConstantTarget):
            checks = flow_bound_check(trace)
            parts += [f"sup_norm_ok={_fmt(checks.sup_norm_ok)}",
                      f"decay_ok={_fmt(checks.decay_ok)}",
                      f"monotone_ok={_fmt(checks.monotone_ok)}"]
        else:
            checks = apriori_general_check(trace, target)
            parts += [f"v_growth_ok={_fmt(checks.v_growth_ok)}",
                      f"norm_growth_ok={_fmt(checks.norm_growth_ok)}"]
        print("summary: " + " ".join(parts))
        return EXIT_OK

    try:
        trace = integrate_flow(phi0, target, T=T, h=h, method=method)
    except DivergenceError as exc:
        emit(exc.trace)
        return EXIT_DIVERGED
    return emit(trace)


def cmd_sweep(cfg: dict, output: str | None, seed: int | None) -> int:
    H = _require(cfg, "H", int, lambda x: x >= 1, "must be a positive integer")
    target = _build_target(cfg)
    if not isinstance(target, ConstantTarget):
        raise ConfigError("alpha", "the sweep command needs a constant target")
    phi0, _ = _build_phi0(cfg, H, seed)
    rs = _sweep_list(cfg, required=True)
    rows = limit_gap_sweep(phi0, target.alpha, rs)
    _write_rows(output, "r,gap", rows)
    _maybe_render(cfg, output, "render_sweep", rows)
    return EXIT_OK


def cmd_verify(cfg: dict, output: str | None, seed: int | None) -> int:
    scale = cfg.get("scale", "small")
    if scale not in SCALES:
        raise ConfigError("scale", f"must be one of {SCALES}")
    results = run_verification(seed=seed if seed is not None else 0, scale=scale)
    rows = [(r.suite, r.check, r.cases, r.worst, r.bound, "pass" if r.passed else "FAIL")
            for r in results]
    _write_rows(output, "suite,check,cases,worst,bound,status", rows)
    width = max(len(r.check) for r in results)
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"[{status}] {r.suite:<18} {r.check:<{width}} cases={r.cases:<6} "
              f"worst={r.worst:.3e}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} suites passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY_FAILED


_DISPATCH = {
    "risk": cmd_risk,
    "grad": cmd_grad,
    "train": cmd_train,
    "flow": cmd_flow,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="relucert",
        description="certified training experiments for shallow rectifier networks on [0, 1]",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="path to the JSON experiment configuration")
    parser.add_argument("--output", help="CSV destination (stdout when omitted)")
    parser.add_argument("--seed", type=int, help="overrides any seed in the configuration")
    args = parser.parse_args(argv)

    cfg: dict = {}
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                cfg = json.load(f)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except json.JSONDecodeError as exc:
            print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(cfg, dict):
            print("error: config must be a JSON object", file=sys.stderr)
            return EXIT_CONFIG
    elif args.command != "verify":
        print("error: config field 'config': --config is required", file=sys.stderr)
        return EXIT_CONFIG

    output = args.output if args.output is not None else cfg.get("output")
    if output is not None and not isinstance(output, str):
        print("error: config field 'output': must be a path string", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _DISPATCH[args.command](cfg, output, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:  # pragma: no cover - console-script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
