"""Run configuration documents for the command-line driver.

A run is described by one JSON object::

    {
      "problem":     {"type": "quadratic", "n": 100, "seed": 7},
      "initializer": {"type": "exact-oracle", "lambda0": 0.5},
      "trace":       {"tableau": "rk4", "step": 0.05,
                      "steps_backward": 10, "steps_forward": 10},
      "outputs":     ["csv", "json", "svg-front", "svg-diagnostics"],
      "output_dir":  "runs/qp_reference"
    }

Problem types are ``quadratic`` (``n``, ``seed``), ``quadratic-explicit``
(``Q0``, ``Q1``, ``chi0``, ``chi1`` as nested lists) and ``shape`` (the
shape-problem document, optionally with ``"preset": "test-case-1"``).

Initializers:

``exact-oracle``
    ``lambda0``; quadratic problems only.
``armijo``
    ``lambda0``, ``x_start`` (list, or ``"zeros"``), optional ``descent``
    block with the :class:`DescentConfig` fields and ``log_iterations``, a
    list of iteration indices whose iterates seed extra traces.
``given-point``
    ``x`` and ``lambda0``.
``recover-lambda``
    ``x`` (for shape problems it defaults to the configured design);
    ``lambda0`` is recovered from the gradients.

The trace interval is either absolute (``lambda_low``, ``lambda_high``),
relative to ``lambda0`` (``span_backward``, ``span_forward``) or a step
count per direction (``steps_backward``, ``steps_forward``); relative
bounds are clipped to [0, 1]. Other trace keys: ``tableau`` (``euler``,
``rk2``/``midpoint``, ``rk4``), ``step``, ``stop_on_definiteness``,
``epsilon``, ``workers``.

The optional ``gronwall`` block (``delta``, ``samples``, ``rho``,
``rhs_error``) controls the deviation bound recorded in the manifest; set
it to ``null`` to skip the estimate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .core import BiCriteriaProblem, InputError
from .init import DescentConfig
from .integrate import ButcherTableau, TraceConfig, get_tableau
from .quadratic import QuadraticProblem
from .shape_fem import ShapeProblem

OUTPUT_KINDS = ("csv", "json", "svg-front", "svg-diagnostics")
INITIALIZERS = ("exact-oracle", "armijo", "given-point", "recover-lambda")
DEFAULT_OUTPUTS = ("csv", "json")


class ConfigError(InputError):
    """The run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class Initializer:
    kind: str
    lambda0: Optional[float] = None
    x: Optional[np.ndarray] = None
    descent: DescentConfig = field(default_factory=DescentConfig)
    log_iterations: tuple[int, ...] = ()


@dataclass(frozen=True)
class TraceSpec:
    """Trace settings before ``lambda0`` is known."""

    tableau: ButcherTableau
    step: float
    lambda_low: Optional[float] = None
    lambda_high: Optional[float] = None
    span_backward: Optional[float] = None
    span_forward: Optional[float] = None
    stop_on_definiteness: bool = True
    epsilon: float = 1e-6
    workers: int = 1

    def resolve(self, lambda0: float) -> TraceConfig:
        low = self.lambda_low if self.span_backward is None else \
            max(0.0, lambda0 - self.span_backward)
        high = self.lambda_high if self.span_forward is None else \
            min(1.0, lambda0 + self.span_forward)
        low = lambda0 if low is None else low
        high = lambda0 if high is None else high
        return TraceConfig(lambda0, low, high, self.step, self.tableau,
                           self.stop_on_definiteness, self.epsilon)


@dataclass(frozen=True)
class GronwallSpec:
    delta: float = 1e-2
    samples: int = 32
    rho: float = 0.5
    rhs_error: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    problem: BiCriteriaProblem
    initializer: Initializer
    trace: TraceSpec
    outputs: tuple[str, ...]
    output_dir: Path
    gronwall: Optional[GronwallSpec]
    document: dict

    @property
    def is_quadratic(self) -> bool:
        return isinstance(self.problem, QuadraticProblem)


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"{where}: missing key {key!r}")
    return block[key]


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _as_block(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a JSON object")
    return value


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return float(value)


def _vector(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of numbers") from None
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where} must be a finite one-dimensional list")
    return arr


def parse_problem(block: dict) -> BiCriteriaProblem:
    block = _as_block(block, "problem")
    kind = _require(block, "type", "problem")
    body = {k: v for k, v in block.items() if k != "type"}
    try:
        if kind == "quadratic":
            _check_keys(body, {"n", "seed", "stream"}, "problem")
            n = _require(body, "n", "problem")
            seed = _require(body, "seed", "problem")
            if not isinstance(n, int) or isinstance(n, bool) or n < 1:
                raise ConfigError("problem.n must be a positive integer")
            if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
                raise ConfigError("problem.seed must be a non-negative integer")
            return QuadraticProblem.from_json(block)
        if kind == "quadratic-explicit":
            _check_keys(body, {"n", "Q0", "Q1", "chi0", "chi1"}, "problem")
            return QuadraticProblem.from_json(block)
        if kind == "shape":
            return ShapeProblem.from_json(body)
    except ConfigError:
        raise
    except (InputError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"problem: {exc!s}") from None
    raise ConfigError(f"problem: unknown type {kind!r}")


def parse_initializer(block: dict, problem: BiCriteriaProblem) -> Initializer:
    block = _as_block(block, "initializer")
    kind = _require(block, "type", "initializer")
    if kind not in INITIALIZERS:
        raise ConfigError(f"initializer: unknown type {kind!r}")
    n = problem.dimension

    def point(key):
        value = _require(block, key, "initializer")
        if kind == "armijo" and value == "zeros":
            return np.zeros(n)
        x = _vector(value, f"initializer.{key}")
        if x.size != n:
            raise ConfigError(f"initializer.{key} has length {x.size}, expected {n}")
        return x

    def weight():
        lam = _number(_require(block, "lambda0", "initializer"), "initializer.lambda0")
        if not 0.0 <= lam <= 1.0:
            raise ConfigError("initializer.lambda0 must lie in [0, 1]")
        return lam

    if kind == "exact-oracle":
        _check_keys(block, {"type", "lambda0"}, "initializer")
        if not isinstance(problem, QuadraticProblem):
            raise ConfigError("exact-oracle initializer needs a quadratic problem")
        return Initializer(kind, weight())
    if kind == "armijo":
        _check_keys(block, {"type", "lambda0", "x_start", "descent", "log_iterations"},
                    "initializer")
        descent_block = _as_block(block.get("descent", {}), "initializer.descent")
        names = {f.name for f in fields(DescentConfig)}
        _check_keys(descent_block, names, "initializer.descent")
        logs = block.get("log_iterations", [])
        if not isinstance(logs, list) or not all(
                isinstance(k, int) and not isinstance(k, bool) and k >= 0 for k in logs):
            raise ConfigError("initializer.log_iterations must be a list of "
                              "non-negative integers")
        try:
            descent = DescentConfig(**{**descent_block, "log_iterates": bool(logs)
                                       or descent_block.get("log_iterates", False)})
        except (InputError, TypeError) as exc:
            raise ConfigError(f"initializer.descent: {exc}") from None
        return Initializer(kind, weight(), point("x_start"), descent,
                           tuple(sorted(set(logs))))
    if kind == "given-point":
        _check_keys(block, {"type", "x", "lambda0"}, "initializer")
        return Initializer(kind, weight(), point("x"))
    _check_keys(block, {"type", "x"}, "initializer")
    if "x" not in block:
        if not isinstance(problem, ShapeProblem):
            raise ConfigError("recover-lambda initializer needs a point 'x'")
        return Initializer(kind, None, problem.geometry.design.copy())
    return Initializer(kind, None, point("x"))


def parse_trace(block: dict) -> TraceSpec:
    block = _as_block(block, "trace")
    _check_keys(block, {"tableau", "step", "lambda_low", "lambda_high",
                        "span_backward", "span_forward", "steps_backward",
                        "steps_forward", "stop_on_definiteness", "epsilon",
                        "workers"}, "trace")
    try:
        tableau = get_tableau(block.get("tableau", "rk4"))
    except InputError as exc:
        raise ConfigError(f"trace: {exc}") from None
    step = _number(_require(block, "step", "trace"), "trace.step")
    if not step > 0:
        raise ConfigError("trace.step must be positive")
    bounds = {}
    for side, absolute, span, count in (("backward", "lambda_low", "span_backward",
                                         "steps_backward"),
                                        ("forward", "lambda_high", "span_forward",
                                         "steps_forward")):
        given = [k for k in (absolute, span, count) if k in block]
        if len(given) > 1:
            raise ConfigError(f"trace: give at most one of {given} for the {side} side")
        if absolute in block:
            bounds[absolute] = _number(block[absolute], f"trace.{absolute}")
        elif span in block:
            value = _number(block[span], f"trace.{span}")
            if value < 0:
                raise ConfigError(f"trace.{span} must be non-negative")
            bounds[span] = value
        elif count in block:
            value = block[count]
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(f"trace.{count} must be a non-negative integer")
            bounds[span] = value * step
    workers = block.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        raise ConfigError("trace.workers must be a positive integer")
    stop = block.get("stop_on_definiteness", True)
    if not isinstance(stop, bool):
        raise ConfigError("trace.stop_on_definiteness must be true or false")
    epsilon = _number(block.get("epsilon", 1e-6), "trace.epsilon")
    if not epsilon > 0:
        raise ConfigError("trace.epsilon must be positive")
    return TraceSpec(tableau, step, stop_on_definiteness=stop, epsilon=epsilon,
                     workers=workers, **bounds)


def parse_gronwall(block) -> Optional[GronwallSpec]:
    if block is None:
        return None
    block = _as_block(block, "gronwall")
    _check_keys(block, {f.name for f in fields(GronwallSpec)}, "gronwall")
    spec = GronwallSpec(**block)
    if not (spec.delta > 0 and spec.rhs_error >= 0 and 0 < spec.rho < 1
            and isinstance(spec.samples, int) and spec.samples >= 0):
        raise ConfigError("gronwall: need delta > 0, samples >= 0, 0 < rho < 1, "
                          "rhs_error >= 0")
    return spec


def parse_config(doc: Any, output_dir: Optional[str] = None) -> RunConfig:
    """Validate a configuration document (without solving anything)."""
    doc = _as_block(doc, "configuration")
    _check_keys(doc, {"problem", "initializer", "trace", "outputs", "output_dir",
                      "gronwall"}, "configuration")
    problem = parse_problem(_require(doc, "problem", "configuration"))
    init = parse_initializer(_require(doc, "initializer", "configuration"), problem)
    spec = parse_trace(_require(doc, "trace", "configuration"))
    if init.lambda0 is not None:
        try:
            spec.resolve(init.lambda0)
        except InputError as exc:
            raise ConfigError(f"trace: {exc}") from None
    outputs = doc.get("outputs", list(DEFAULT_OUTPUTS))
    if not isinstance(outputs, list) or any(o not in OUTPUT_KINDS for o in outputs):
        raise ConfigError(f"outputs must be a list drawn from {list(OUTPUT_KINDS)}")
    out_dir = output_dir if output_dir is not None else doc.get("output_dir", ".")
    if not isinstance(out_dir, str):
        raise ConfigError("output_dir must be a path string")
    gronwall = parse_gronwall(doc.get("gronwall", {}))
    if isinstance(problem, ShapeProblem) and spec.workers > 1:
        problem.workers = spec.workers
    # keep first-seen order while dropping duplicates
    outputs = tuple(dict.fromkeys(outputs))
    return RunConfig(problem, init, spec, outputs, Path(out_dir), gronwall, doc)


def load_config(path, output_dir: Optional[str] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from None
    return parse_config(doc, output_dir)
