"""Explicit Runge-Kutta integration of the tracing ODE.

Each stage uses the textbook form

    k_i = f(lam + c_i h, x + h * sum_{j<i} a_ij k_j),
    x_next = x + h * sum_i b_i k_i.

A negative ``h`` integrates toward smaller weights.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BiCriteriaProblem, InputError, check_weight
from .ode_rhs import LostDefinitenessError, RhsReport, rhs

FORWARD = "forward"
BACKWARD = "backward"

COMPLETED = "completed"
DEFINITENESS_LOST = "definiteness-lost"
RHS_ERROR = "rhs-error"


class StageError(RuntimeError):
    """An exception raised by the right-hand side inside an RK stage."""

    def __init__(self, stage: int, lam: float, cause: BaseException):
        self.stage = stage
        self.lam = lam
        self.cause = cause
        super().__init__(f"stage {stage} at lambda={lam:.6g}: {cause}")


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.size
        if a.shape != (s, s) or c.shape != (s,):
            raise InputError(f"tableau {self.name}: inconsistent shapes")
        if np.any(np.triu(a) != 0.0):
            raise InputError(f"tableau {self.name}: a must be strictly lower triangular")
        if abs(b.sum() - 1.0) > 1e-12:
            raise InputError(f"tableau {self.name}: weights b must sum to 1")
        if c[0] != 0.0 or np.any(np.abs(a.sum(axis=1) - c) > 1e-12):
            raise InputError(f"tableau {self.name}: c_i must equal the row sums of a")
        if self.order < 1:
            raise InputError(f"tableau {self.name}: order must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size


def _frac(rows):
    return np.array([[float(Fraction(v)) for v in row] for row in rows])


EULER = ButcherTableau("euler", np.zeros((1, 1)), np.array([1.0]), np.array([0.0]), 1)
MIDPOINT = ButcherTableau(
    "rk2", _frac([[0, 0], ["1/2", 0]]), np.array([0.0, 1.0]), np.array([0.0, 0.5]), 2)
RK4 = ButcherTableau(
    "rk4",
    _frac([[0, 0, 0, 0], ["1/2", 0, 0, 0], [0, "1/2", 0, 0], [0, 0, 1, 0]]),
    _frac([["1/6", "1/3", "1/3", "1/6"]])[0],
    np.array([0.0, 0.5, 0.5, 1.0]),
    4,
)


def builtin_tableaus() -> list[ButcherTableau]:
    return [EULER, MIDPOINT, RK4]


TABLEAUS = {t.name: t for t in builtin_tableaus()}
TABLEAUS["midpoint"] = MIDPOINT


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUS[name.lower()]
    except KeyError:
        raise InputError(f"unknown tableau {name!r}; choose from {sorted(TABLEAUS)}") from None


RhsFn = Callable[[float, np.ndarray], np.ndarray]


def rk_step(tableau: ButcherTableau, rhs_fn: RhsFn, lam: float, x: np.ndarray,
            h: float, k1: Optional[np.ndarray] = None) -> np.ndarray:
    """One explicit RK step of size ``h`` (negative for backward).

    ``k1`` may be supplied when ``rhs_fn(lam, x)`` is already known.
    Exceptions from ``rhs_fn`` are wrapped in :class:`StageError` carrying
    the 1-based stage index.
    """
    if h == 0.0:
        raise InputError("step size must be nonzero")
    x = np.asarray(x, dtype=float)
    ks: list[np.ndarray] = []
    for i in range(tableau.stages):
        if i == 0 and k1 is not None:
            ks.append(np.asarray(k1, dtype=float))
            continue
        xi = x.copy()
        for j in range(i):
            if tableau.a[i, j] != 0.0:
                xi += h * tableau.a[i, j] * ks[j]
        li = lam + tableau.c[i] * h
        try:
            ks.append(np.asarray(rhs_fn(li, xi), dtype=float))
        except Exception as exc:
            raise StageError(i + 1, li, exc) from exc
    incr = np.zeros_like(x)
    for bi, ki in zip(tableau.b, ks):
        if bi != 0.0:
            incr += bi * ki
    return x + h * incr


@dataclass(frozen=True)
class TraceConfig:
    lambda0: float
    lambda_low: float
    lambda_high: float
    step: float
    tableau: ButcherTableau = RK4
    stop_on_definiteness: bool = True
    epsilon: float = 1e-6

    def __post_init__(self):
        for v in (self.lambda0, self.lambda_low, self.lambda_high):
            check_weight(v)
        if not self.lambda_low <= self.lambda0 <= self.lambda_high:
            raise InputError("need lambda_low <= lambda0 <= lambda_high")
        if not self.step > 0:
            raise InputError("step must be positive")
        span = self.lambda_high - self.lambda_low
        if span > 0 and self.step > span + 1e-12:
            raise InputError(f"step {self.step} exceeds the weight span {span}")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")


@dataclass(frozen=True)
class TraceRecord:
    lam: float
    x: np.ndarray
    J0: float
    J1: float
    grad_norm: float
    min_eigenvalue: float


@dataclass
class ParetoTrace:
    records: list[TraceRecord]
    direction: str
    termination: str = COMPLETED
    message: str = ""
    rhs_evaluations: int = 0

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    @property
    def points(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def endpoint(self) -> TraceRecord:
        return self.records[-1]


def weight_grid(lambda0: float, boundary: float, step: float) -> list[float]:
    """``lambda0 + i*step`` up to ``boundary``; the last step is shortened so
    the grid lands exactly on the boundary."""
    span = abs(boundary - lambda0)
    if span == 0.0:
        return [lambda0]
    sign = 1.0 if boundary > lambda0 else -1.0
    n = max(1, math.ceil(span / step - 1e-9))
    grid = [lambda0 + sign * i * step for i in range(n)]
    grid.append(boundary)
    return grid


def _record(problem: BiCriteriaProblem, lam: float, x: np.ndarray,
            report: RhsReport) -> TraceRecord:
    j0, j1 = problem.objectives(x)
    return TraceRecord(lam, x.copy(), float(j0), float(j1),
                       float(np.linalg.norm(report.scalarized_gradient)),
                       float(report.min_eigenvalue))


def _clip_weight(lam: float) -> float:
    # stage abscissae can round a hair outside [0, 1]
    return min(1.0, max(0.0, lam))


def trace(problem: BiCriteriaProblem, config: TraceConfig, x0,
          direction: str = FORWARD) -> ParetoTrace:
    """Integrate from ``(lambda0, x0)`` to ``lambda_high`` (forward) or
    ``lambda_low`` (backward), recording every accepted step.

    If the scalarized Hessian stops being positive definite mid-trace the
    trace is truncated (``termination == "definiteness-lost"``) unless
    ``stop_on_definiteness`` is false, in which case the error propagates.
    Failure at the start point always raises.
    """
    if direction not in (FORWARD, BACKWARD):
        raise InputError(f"direction must be {FORWARD!r} or {BACKWARD!r}")
    x = problem.check_point(x0).copy()
    lam0 = config.lambda0
    report = rhs(problem, lam0, x)
    out = ParetoTrace([_record(problem, lam0, x, report)], direction, rhs_evaluations=1)
    boundary = config.lambda_high if direction == FORWARD else config.lambda_low
    grid = weight_grid(lam0, boundary, config.step)

    def fn(lam, y):
        out.rhs_evaluations += 1
        return rhs(problem, _clip_weight(lam), y, with_eigenvalue=False).f

    for lam_prev, lam_next in zip(grid[:-1], grid[1:]):
        h = lam_next - lam_prev
        try:
            x = rk_step(config.tableau, fn, lam_prev, x, h, k1=report.f)
            report = rhs(problem, lam_next, x)
            out.rhs_evaluations += 1
        except Exception as exc:
            cause = exc.cause if isinstance(exc, StageError) else exc
            if isinstance(cause, LostDefinitenessError):
                if not config.stop_on_definiteness:
                    raise cause
                out.termination = DEFINITENESS_LOST
            else:
                out.termination = RHS_ERROR
            out.message = str(exc)
            break
        out.records.append(_record(problem, lam_next, x, report))
    return out


def trace_bidirectional(problem: BiCriteriaProblem, config: TraceConfig, x0,
                        workers: int = 1) -> tuple[ParetoTrace, ParetoTrace]:
    """Forward and backward traces from the same start.

    The two initial value problems are independent; with ``workers > 1``
    they run on separate threads.
    """
    if workers > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fwd = pool.submit(trace, problem, config, x0, FORWARD)
            bwd = pool.submit(trace, problem, config, x0, BACKWARD)
            return fwd.result(), bwd.result()
    return trace(problem, config, x0, FORWARD), trace(problem, config, x0, BACKWARD)


def merge_traces(forward: ParetoTrace, backward: ParetoTrace) -> list[TraceRecord]:
    """Records of both traces ordered by increasing weight; the shared start
    appears once."""
    return list(reversed(backward.records)) + forward.records[1:]


@dataclass
class OrderEstimate:
    steps: list[float]
    errors: list[float]
    slope: Optional[float]
    exact: bool = False
    ratios: list[float] = field(default_factory=list)
    traces: list[ParetoTrace] = field(default_factory=list, repr=False)


def fit_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(step)``."""
    logs_h = np.log(np.asarray(steps, dtype=float))
    logs_e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(logs_h, logs_e, 1)[0])


def endpoint_errors(problem: BiCriteriaProblem, config: TraceConfig, x0,
                    steps: Sequence[float], reference: Callable[[float], np.ndarray],
                    direction: str = FORWARD) -> OrderEstimate:
    """Endpoint error of traces at each of ``steps`` against ``reference``,
    with the fitted order. All errors at rounding level mean the field is
    integrated exactly: the estimate is flagged ``exact`` and ``slope`` is
    None."""
    if len(steps) < 2:
        raise InputError("need at least two step sizes")
    errors, traces = [], []
    end_lam = None
    for h in steps:
        cfg = replace(config, step=float(h))
        tr = trace(problem, cfg, x0, direction)
        if tr.termination != COMPLETED:
            raise ArithmeticError(f"trace at h={h} ended early: {tr.message}")
        traces.append(tr)
        end = tr.endpoint
        end_lam = end.lam
        errors.append(float(np.linalg.norm(end.x - np.asarray(reference(end.lam), dtype=float))))
    steps = [float(h) for h in steps]
    ratios = [errors[i] / errors[i + 1] if errors[i + 1] > 0 else math.inf
              for i in range(len(errors) - 1)]
    ref_scale = 1.0 + float(np.linalg.norm(reference(end_lam)))
    if max(errors) <= 64 * np.finfo(float).eps * ref_scale:
        return OrderEstimate(steps, errors, None, True, ratios, traces)
    return OrderEstimate(steps, errors, fit_order(steps, errors), False, ratios, traces)


def empirical_order(problem: BiCriteriaProblem, config: TraceConfig, x0,
                    reference: Callable[[float], np.ndarray],
                    refinements: int = 3,
                    direction: str = FORWARD) -> OrderEstimate:
    """Observed global order from endpoint errors at ``h, h/2, h/4, ...``
    where ``h = config.step``; ``reference`` maps a weight to the exact (or
    a much finer) solution."""
    steps = [config.step / 2**r for r in range(refinements)]
    return endpoint_errors(problem, config, x0, steps, reference, direction)


def front_agreement(a: Sequence[TraceRecord], b: Sequence[TraceRecord],
                    tol: float = 1e-9) -> tuple[int, float]:
    """Compare two fronts at their shared weights (matched within ``tol``).

    Returns the number of shared weights and the largest relative deviation
    of ``(J0, J1)`` there, each objective scaled by its own magnitude.
    """
    lams_b = np.array([r.lam for r in b])
    shared, worst = 0, 0.0
    for r in a:
        if lams_b.size == 0:
            break
        i = int(np.argmin(np.abs(lams_b - r.lam)))
        if abs(lams_b[i] - r.lam) > tol:
            continue
        shared += 1
        for u, v in ((r.J0, b[i].J0), (r.J1, b[i].J1)):
            worst = max(worst, abs(u - v) / max(abs(u), abs(v), np.finfo(float).tiny))
    return shared, worst
