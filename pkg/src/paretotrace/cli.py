"""Command-line driver.

``paretotrace trace --config run.json [--output-dir DIR] [--verbose]``
    Start point, forward and backward traces, CSV, manifest and plots.
``paretotrace order-study --config run.json --steps 0.1,0.05,0.025``
    Endpoint errors and fitted convergence order over a list of steps.
``paretotrace validate --config run.json``
    Check the configuration without solving anything.

Exit status: 0 on success (truncated traces included), 2 for configuration
errors, 3 for numerical failures. Failures print one JSON error record on
stderr and, when the output directory is known, write it to ``error.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import InputError, criticality
from .init import DescentResult, WeightRecovery, armijo_descent, recover_weight
from .integrate import (BACKWARD, COMPLETED, FORWARD, TraceConfig, endpoint_errors,
                        front_agreement, merge_traces, trace, trace_bidirectional)
from .ode_rhs import gronwall_bound, lipschitz_estimates
from .quadratic import QuadraticProblem, analytic_solution
from .report import svg_diagnostics, svg_front, write_trace_csv
from .runconfig import ConfigError, RunConfig, load_config
from .shape_fem import kernels

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

TRACE_CSV = "trace.csv"
MANIFEST = "manifest.json"
FRONT_SVG = "front.svg"
DIAGNOSTICS_SVG = "diagnostics.svg"
ERROR_JSON = "error.json"
ORDER_CSV = "order_study.csv"
ORDER_JSON = "order_study.json"
# reference step divisor when no analytic solution is available
REFERENCE_REFINEMENT = 16

log = logging.getLogger("paretotrace")


@dataclass
class Start:
    lambda0: float
    x0: np.ndarray
    descent: Optional[DescentResult] = None
    recovery: Optional[WeightRecovery] = None
    extra: list[tuple[str, np.ndarray]] = field(default_factory=list)
    skipped_iterations: list[int] = field(default_factory=list)


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(_json_safe(doc), indent=2, allow_nan=False) + "\n",
                          encoding="utf-8")


def prepare_start(cfg: RunConfig) -> Start:
    """Run the configured initializer."""
    init, problem = cfg.initializer, cfg.problem
    if init.kind == "exact-oracle":
        return Start(init.lambda0, analytic_solution(problem, init.lambda0))
    if init.kind == "given-point":
        return Start(init.lambda0, init.x.copy())
    if init.kind == "recover-lambda":
        rec = recover_weight(problem, init.x)
        log.info("recovered lambda0 = %r (residual %.3e)", rec.lam, rec.residual)
        return Start(rec.lam, init.x.copy(), recovery=rec)
    res = armijo_descent(problem, init.lambda0, init.x, init.descent)
    log.info("descent: %d iterations, |grad| = %.3e, converged = %s",
             res.iterations, res.final_grad_norm, res.converged)
    start = Start(init.lambda0, res.x, descent=res)
    for k in init.log_iterations:
        if res.iterates is not None and k < len(res.iterates):
            start.extra.append((f"iter{k}", res.iterates[k]))
        else:
            start.skipped_iterations.append(k)
    return start


def _trace_summary(tr) -> dict:
    return {"termination": tr.termination, "message": tr.message,
            "records": len(tr.records), "lambda_end": tr.endpoint.lam,
            "rhs_evaluations": tr.rhs_evaluations}


def _gronwall(cfg: RunConfig, tcfg: TraceConfig, start: Start) -> Optional[dict]:
    spec = cfg.gronwall
    if spec is None:
        return None
    problem = cfg.problem
    lam0, x0 = start.lambda0, start.x0
    est = lipschitz_estimates(problem, lam0, x0, spec.delta, spec.rho, spec.samples)
    if cfg.initializer.kind == "exact-oracle":
        e0, source = 0.0, "exact start"
    else:
        # |x0 - x(lam0)| <= |grad J(x0)| / Lam for a locally strongly convex J
        crit = criticality(problem, lam0, x0, tcfg.epsilon)
        e0 = crit.grad_norm / est.min_eigenvalue
        source = "grad_norm / min_eigenvalue at the start"
    bound = gronwall_bound(e0, spec.rhs_error, est.L_f, lam0 - tcfg.lambda_low,
                           tcfg.lambda_high - lam0)
    return {"inputs": {"delta": spec.delta, "samples": spec.samples, "rho": spec.rho,
                       "rhs_error": spec.rhs_error, "initial_error": e0,
                       "initial_error_source": source,
                       "span_backward": bound.span_left, "span_forward": bound.span_right},
            "estimates": asdict(est),
            "bound": bound.bound,
            "note": "Lipschitz constants are sampled estimates, not rigorous bounds"}


def _problem_doc(problem) -> dict:
    # problems built in code (e.g. FunctionProblem) have no replay document
    to_json = getattr(problem, "to_json", None)
    if to_json is None:
        return {"type": type(problem).__name__, "n": problem.dimension}
    return to_json()


def _oracle_errors(problem: QuadraticProblem, records) -> float:
    worst = 0.0
    for r in records:
        ref = analytic_solution(problem, r.lam)
        worst = max(worst, float(np.linalg.norm(r.x - ref) / (1.0 + np.linalg.norm(ref))))
    return worst


def run(cfg: RunConfig) -> dict:
    """Execute a ``trace`` run and write its artifacts; returns the manifest."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    start = prepare_start(cfg)
    timings["initializer"] = time.perf_counter() - t0
    try:
        tcfg = cfg.trace.resolve(start.lambda0)
    except InputError as exc:
        raise ConfigError(f"trace: {exc}") from None

    t0 = time.perf_counter()
    fwd, bwd = trace_bidirectional(cfg.problem, tcfg, start.x0, workers=cfg.trace.workers)
    timings["trace"] = time.perf_counter() - t0
    merged = merge_traces(fwd, bwd)
    log.info("forward: %s after %d records; backward: %s after %d records",
             fwd.termination, len(fwd.records), bwd.termination, len(bwd.records))

    t0 = time.perf_counter()
    extra = []

    def run_extra(item):
        label, x = item
        f, b = trace_bidirectional(cfg.problem, tcfg, x)
        return label, f, b

    if start.extra:
        if cfg.trace.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.trace.workers) as pool:
                extra = list(pool.map(run_extra, start.extra))
        else:
            extra = [run_extra(item) for item in start.extra]
    timings["extra_traces"] = time.perf_counter() - t0

    artifacts = []
    csv_paths = []
    if "csv" in cfg.outputs or any(o.startswith("svg") for o in cfg.outputs):
        write_trace_csv(out / TRACE_CSV, merged)
        csv_paths.append(out / TRACE_CSV)
        artifacts.append(TRACE_CSV)
        for label, f, b in extra:
            name = f"trace_{label}.csv"
            write_trace_csv(out / name, merge_traces(f, b))
            csv_paths.append(out / name)
            artifacts.append(name)
    if "svg-front" in cfg.outputs:
        svg_front(csv_paths, out / FRONT_SVG,
                  labels=["trace"] + [f"start {label}" for label, _, _ in extra])
        artifacts.append(FRONT_SVG)
    if "svg-diagnostics" in cfg.outputs:
        svg_diagnostics(out / TRACE_CSV, out / DIAGNOSTICS_SVG)
        artifacts.append(DIAGNOSTICS_SVG)

    t0 = time.perf_counter()
    gronwall = _gronwall(cfg, tcfg, start)
    timings["gronwall"] = time.perf_counter() - t0

    manifest = {
        "version": __version__,
        "command": "trace",
        "kernel_backend": kernels.BACKEND,
        "config": cfg.document,
        "problem": _problem_doc(cfg.problem),
        "start": {
            "initializer": cfg.initializer.kind,
            "lambda0": start.lambda0,
            "x0": start.x0,
            "grad_norm": fwd.records[0].grad_norm,
            "min_eigenvalue": fwd.records[0].min_eigenvalue,
        },
        "trace_config": {"lambda_low": tcfg.lambda_low, "lambda_high": tcfg.lambda_high,
                         "step": tcfg.step, "tableau": tcfg.tableau.name,
                         "order": tcfg.tableau.order},
        "traces": {FORWARD: _trace_summary(fwd), BACKWARD: _trace_summary(bwd)},
        "extra_traces": {label: {FORWARD: _trace_summary(f), BACKWARD: _trace_summary(b)}
                         for label, f, b in extra},
        "gronwall": gronwall,
        "artifacts": artifacts,
    }
    if start.descent is not None:
        d = start.descent
        manifest["start"]["descent"] = {
            "iterations": d.iterations, "final_grad_norm": d.final_grad_norm,
            "converged": d.converged, "backtracks": d.backtracks,
            "skipped_log_iterations": start.skipped_iterations}
    if start.recovery is not None:
        manifest["start"]["recovery_residual"] = start.recovery.residual
    if isinstance(cfg.problem, QuadraticProblem):
        manifest["oracle_max_relative_error"] = _oracle_errors(cfg.problem, merged)
    if hasattr(cfg.problem, "evaluations"):
        manifest["objective_evaluations"] = cfg.problem.evaluations
    manifest["timings"] = timings
    if "json" in cfg.outputs:
        manifest["artifacts"].append(MANIFEST)
        write_json(out / MANIFEST, manifest)
    return manifest


def order_study(cfg: RunConfig, steps: list[float]) -> dict:
    """Endpoint errors over ``steps`` against the analytic solution (quadratic
    problems) or a trace at ``min(steps)/16``; writes CSV and JSON tables."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    start = prepare_start(cfg)
    try:
        tcfg = cfg.trace.resolve(start.lambda0)
    except InputError as exc:
        raise ConfigError(f"trace: {exc}") from None
    direction = FORWARD if tcfg.lambda_high > start.lambda0 else BACKWARD
    if tcfg.lambda_high == tcfg.lambda_low:
        raise ConfigError("order study needs a non-empty weight interval")
    try:
        tcfg = TraceConfig(tcfg.lambda0, tcfg.lambda_low, tcfg.lambda_high, max(steps),
                           tcfg.tableau, tcfg.stop_on_definiteness, tcfg.epsilon)
    except InputError as exc:
        raise ConfigError(f"steps: {exc}") from None
    t0 = time.perf_counter()
    if isinstance(cfg.problem, QuadraticProblem):
        def reference(lam):
            return analytic_solution(cfg.problem, lam)
        ref_desc = "analytic"
    else:
        h_ref = min(steps) / REFERENCE_REFINEMENT
        fine = trace(cfg.problem, TraceConfig(tcfg.lambda0, tcfg.lambda_low,
                                              tcfg.lambda_high, h_ref, tcfg.tableau,
                                              tcfg.stop_on_definiteness, tcfg.epsilon),
                     start.x0, direction)
        if fine.termination != COMPLETED:
            raise ArithmeticError(f"reference trace ended early: {fine.message}")
        end = fine.endpoint

        def reference(lam):
            if abs(lam - end.lam) > 1e-12:
                raise ArithmeticError("reference only available at the interval end")
            return end.x
        ref_desc = f"trace at h={h_ref!r}"
    est = endpoint_errors(cfg.problem, tcfg, start.x0, steps, reference, direction)
    elapsed = time.perf_counter() - t0
    finest = est.traces[int(np.argmin(est.steps))].records
    agreement = []
    for h, tr in zip(est.steps, est.traces):
        shared, dev = front_agreement(tr.records, finest)
        agreement.append({"step": h, "shared_weights": shared,
                          "max_relative_deviation": dev})
    with open(out / ORDER_CSV, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "error", "ratio"])
        for i, (h, e) in enumerate(zip(est.steps, est.errors)):
            w.writerow([repr(h), repr(e), repr(est.ratios[i - 1]) if i else ""])
    report = {
        "version": __version__,
        "command": "order-study",
        "config": cfg.document,
        "tableau": tcfg.tableau.name,
        "declared_order": tcfg.tableau.order,
        "direction": direction,
        "interval": [tcfg.lambda_low, tcfg.lambda_high],
        "lambda0": start.lambda0,
        "reference": ref_desc,
        "steps": est.steps,
        "errors": est.errors,
        "ratios": est.ratios,
        "slope": est.slope,
        "order": "exact" if est.exact else est.slope,
        "front_agreement": agreement,
        "timings": {"study": elapsed},
    }
    write_json(out / ORDER_JSON, report)
    return report


def parse_steps(text: str) -> list[float]:
    try:
        steps = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--steps must be a comma-separated list of numbers: {text!r}") from None
    if len(steps) < 2 or any(not (h > 0 and math.isfinite(h)) for h in steps):
        raise ConfigError("--steps needs at least two positive step sizes")
    return steps


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paretotrace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("trace", "trace a Pareto front"),
                           ("order-study", "measure the convergence order"),
                           ("validate", "check a configuration file")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON run configuration")
        if name != "validate":
            p.add_argument("--output-dir", help="overrides output_dir of the config")
        if name == "order-study":
            p.add_argument("--steps", required=True, help="comma-separated step sizes")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def _error_record(kind: str, exc: BaseException, code: int) -> dict:
    return {"status": "error", "kind": kind, "exit_code": code,
            "error_type": type(exc).__name__, "message": str(exc)}


def _fail(kind, exc, code, out_dir: Optional[Path]) -> int:
    rec = _error_record(kind, exc, code)
    print(json.dumps(rec), file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_json(out_dir / ERROR_JSON, rec)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    out_dir = None
    try:
        cfg = load_config(args.config, getattr(args, "output_dir", None))
        if args.command == "validate":
            print(json.dumps({"status": "valid", "problem": type(cfg.problem).__name__,
                              "dimension": cfg.problem.dimension,
                              "initializer": cfg.initializer.kind}))
            return EXIT_OK
        out_dir = cfg.output_dir
        steps = parse_steps(args.steps) if args.command == "order-study" else None
    except InputError as exc:
        return _fail("config", exc, EXIT_CONFIG, None)
    try:
        if args.command == "trace":
            manifest = run(cfg)
            summary = {"status": "ok", "output_dir": str(out_dir),
                       "terminations": {k: v["termination"]
                                        for k, v in manifest["traces"].items()}}
        else:
            report = order_study(cfg, steps)
            summary = {"status": "ok", "output_dir": str(out_dir), "order": report["order"]}
    except InputError as exc:
        return _fail("config", exc, EXIT_CONFIG, out_dir)
    except Exception as exc:  # every remaining failure is numerical by contract
        log.debug("numerical failure", exc_info=True)
        return _fail("numerical", exc, EXIT_NUMERICAL, out_dir)
    print(json.dumps(_json_safe(summary)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
