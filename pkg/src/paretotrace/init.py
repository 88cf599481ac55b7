"""Starting points for tracing: Armijo gradient descent on ``J_lam`` and
recovery of the weight for which a given point is (nearly) critical."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (BiCriteriaProblem, InputError, check_weight,
                   scalarized_gradient, scalarized_value)

# backtracking gives up once the trial step is this small
MIN_STEP = 1e-30


class NonFiniteObjectiveError(ArithmeticError):
    def __init__(self, x: np.ndarray, value: float):
        self.x = np.array(x, dtype=float)
        self.value = value
        super().__init__(f"objective is {value} at a descent iterate")


@dataclass(frozen=True)
class DescentConfig:
    rho: float = 0.5
    armijo_slope: float = 1e-4
    max_iterations: int = 1000
    grad_tolerance: float = 1e-6
    initial_step: float = 1.0
    log_iterates: bool = False

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InputError("rho must lie in (0, 1)")
        if not 0.0 < self.armijo_slope < 1.0:
            raise InputError("armijo_slope must lie in (0, 1)")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be positive")
        if not self.grad_tolerance > 0:
            raise InputError("grad_tolerance must be positive")
        if not self.initial_step > 0:
            raise InputError("initial_step must be positive")


@dataclass
class DescentResult:
    x: np.ndarray
    iterations: int
    final_grad_norm: float
    converged: bool
    iterates: Optional[list[np.ndarray]] = None
    values: list[float] = field(default_factory=list)
    backtracks: int = 0


def armijo_descent(problem: BiCriteriaProblem, lam: float, x_start,
                   config: DescentConfig = DescentConfig()) -> DescentResult:
    """Steepest descent on ``J_lam`` with backtracking Armijo steps.

    The trial step starts at ``initial_step`` and is multiplied by ``rho``
    until ``J(x - t g) <= J(x) - armijo_slope * t * |g|^2``. Iteration stops
    at ``|g| <= grad_tolerance`` or after ``max_iterations`` steps. With
    ``log_iterates`` the result holds every iterate ``x_{0,0}, x_{0,1}, ...``.
    """
    lam = check_weight(lam)
    x = problem.check_point(x_start).copy()
    value = scalarized_value(problem, lam, x)
    if not math.isfinite(value):
        raise NonFiniteObjectiveError(x, value)
    g = scalarized_gradient(problem, lam, x)
    gnorm = float(np.linalg.norm(g))
    iterates = [x.copy()] if config.log_iterates else None
    values = [value]
    k = 0
    backtracks = 0
    while gnorm > config.grad_tolerance and k < config.max_iterations:
        t = config.initial_step
        g2 = gnorm * gnorm
        while True:
            trial = x - t * g
            trial_value = scalarized_value(problem, lam, trial)
            if not math.isfinite(trial_value) and t <= MIN_STEP:
                raise NonFiniteObjectiveError(trial, trial_value)
            if math.isfinite(trial_value) and \
                    trial_value <= value - config.armijo_slope * t * g2:
                break
            t *= config.rho
            backtracks += 1
            if t < MIN_STEP:
                # no acceptable step: return the current point unconverged
                return DescentResult(x, k, gnorm, False, iterates, values, backtracks)
        x, value = trial, trial_value
        g = scalarized_gradient(problem, lam, x)
        gnorm = float(np.linalg.norm(g))
        k += 1
        values.append(value)
        if iterates is not None:
            iterates.append(x.copy())
    return DescentResult(x, k, gnorm, gnorm <= config.grad_tolerance,
                         iterates, values, backtracks)


@dataclass(frozen=True)
class WeightRecovery:
    lam: float
    residual: float


class DegenerateGradientsError(ValueError):
    """Both gradients coincide, so every weight is equally good."""


def lambda_for_critical(g0: Sequence[float], g1: Sequence[float]) -> WeightRecovery:
    """Weight minimizing ``|(1-lam) g0 + lam g1|`` over [0, 1], and the
    residual norm there."""
    g0 = np.asarray(g0, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    d = g0 - g1
    scale = max(np.linalg.norm(g0), np.linalg.norm(g1))
    dd = float(d @ d)
    if scale == 0.0 or math.sqrt(dd) <= 1e-14 * scale:
        raise DegenerateGradientsError("gradients coincide; the weight is undetermined")
    lam = min(1.0, max(0.0, float(g0 @ d) / dd))
    residual = float(np.linalg.norm((1.0 - lam) * g0 + lam * g1))
    return WeightRecovery(lam, residual)


def recover_weight(problem: BiCriteriaProblem, x) -> WeightRecovery:
    x = problem.check_point(x)
    return lambda_for_critical(problem.grad0(x), problem.grad1(x))
