"""Bi-criteria problem abstraction and weighted-sum scalarization.

All norms are Euclidean for vectors and spectral for matrices.
"""
from __future__ import annotations

import abc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class InputError(ValueError):
    """Malformed input: wrong dimension, weight outside [0, 1], and so on."""


class FiniteDifferenceError(ValueError):
    """Evaluation failed at a finite-difference probe along ``coordinate``."""

    def __init__(self, coordinate: int, cause: BaseException):
        self.coordinate = coordinate
        self.cause = cause
        super().__init__(f"finite-difference probe along coordinate {coordinate} "
                         f"failed: {cause}")


class BiCriteriaProblem(abc.ABC):
    """Two smooth objectives ``J0, J1`` on R^n with gradients and Hessians.

    Subclasses implement the six evaluators. They must be pure functions of
    ``x`` so that they can be called concurrently.
    """

    dimension: int

    @abc.abstractmethod
    def j0(self, x: np.ndarray) -> float: ...

    @abc.abstractmethod
    def j1(self, x: np.ndarray) -> float: ...

    @abc.abstractmethod
    def grad0(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def grad1(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def hess0(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def hess1(self, x: np.ndarray) -> np.ndarray: ...

    def objectives(self, x: np.ndarray) -> tuple[float, float]:
        return self.j0(x), self.j1(x)

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dimension:
            raise InputError(
                f"point has shape {x.shape}, expected ({self.dimension},)")
        return x


@dataclass(frozen=True)
class FunctionProblem(BiCriteriaProblem):
    """Problem assembled from plain callables.

    Missing Hessians are approximated by central differences of the
    gradients (see :func:`fd_hessian`).
    """

    dimension: int
    f0: Callable[[np.ndarray], float]
    f1: Callable[[np.ndarray], float]
    g0: Callable[[np.ndarray], np.ndarray]
    g1: Callable[[np.ndarray], np.ndarray]
    h0: Optional[Callable[[np.ndarray], np.ndarray]] = None
    h1: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = 1e-6

    def j0(self, x):
        return float(self.f0(self.check_point(x)))

    def j1(self, x):
        return float(self.f1(self.check_point(x)))

    def grad0(self, x):
        return np.asarray(self.g0(self.check_point(x)), dtype=float)

    def grad1(self, x):
        return np.asarray(self.g1(self.check_point(x)), dtype=float)

    def hess0(self, x):
        x = self.check_point(x)
        if self.h0 is None:
            return fd_hessian(self.g0, x, self.fd_step)
        return np.asarray(self.h0(x), dtype=float)

    def hess1(self, x):
        x = self.check_point(x)
        if self.h1 is None:
            return fd_hessian(self.g1, x, self.fd_step)
        return np.asarray(self.h1(x), dtype=float)


def check_weight(lam) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"weight {lam!r} outside [0, 1]")
    return lam


def scalarized_value(problem: BiCriteriaProblem, lam: float, x) -> float:
    lam = check_weight(lam)
    x = problem.check_point(x)
    return (1.0 - lam) * problem.j0(x) + lam * problem.j1(x)


def scalarized_gradient(problem: BiCriteriaProblem, lam: float, x) -> np.ndarray:
    lam = check_weight(lam)
    x = problem.check_point(x)
    return (1.0 - lam) * problem.grad0(x) + lam * problem.grad1(x)


def scalarized_hessian(problem: BiCriteriaProblem, lam: float, x) -> np.ndarray:
    lam = check_weight(lam)
    x = problem.check_point(x)
    return (1.0 - lam) * problem.hess0(x) + lam * problem.hess1(x)


@dataclass(frozen=True)
class CriticalityReport:
    grad_norm: float
    epsilon: float
    is_critical: bool
    # eps / min(lam, 1 - lam); None at lam in {0, 1} where it is undefined
    pareto_epsilon: Optional[float]


def criticality(problem: BiCriteriaProblem, lam: float, x,
                epsilon: float) -> CriticalityReport:
    """Check ``||grad J_lam(x)|| <= epsilon``.

    An epsilon-critical point for ``lam`` in (0, 1) is also
    epsilon'-Pareto critical with ``epsilon' = epsilon / min(lam, 1 - lam)``.
    """
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    lam = check_weight(lam)
    gnorm = float(np.linalg.norm(scalarized_gradient(problem, lam, x)))
    pareto_eps = None
    if 0.0 < lam < 1.0:
        pareto_eps = epsilon / min(lam, 1.0 - lam)
    return CriticalityReport(gnorm, epsilon, gnorm <= epsilon, pareto_eps)


def symmetrize(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h + h.T)


def _relative_steps(x: np.ndarray, step: float) -> np.ndarray:
    return step * (1.0 + np.abs(x))


def fd_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                step: float = 1e-6, workers: int = 1) -> np.ndarray:
    """Central-difference gradient with per-coordinate step
    ``step * (1 + |x_j|)``. Coordinates are independent and may be
    evaluated on ``workers`` threads."""
    x = np.asarray(x, dtype=float)
    steps = _relative_steps(x, step)

    def column(j):
        e = np.zeros_like(x)
        e[j] = steps[j]
        try:
            return (fn(x + e) - fn(x - e)) / (2.0 * steps[j])
        except FiniteDifferenceError:
            raise
        except Exception as exc:
            raise FiniteDifferenceError(j, exc) from exc

    return np.array(_map(column, range(x.size), workers), dtype=float)


def fd_hessian(grad_fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
               step: float = 1e-6, workers: int = 1) -> np.ndarray:
    """Hessian by central differences of ``grad_fn``, symmetrized."""
    x = np.asarray(x, dtype=float)
    steps = _relative_steps(x, step)

    def column(j):
        e = np.zeros_like(x)
        e[j] = steps[j]
        try:
            return (np.asarray(grad_fn(x + e)) - np.asarray(grad_fn(x - e))) / (2.0 * steps[j])
        except FiniteDifferenceError:
            raise
        except Exception as exc:
            raise FiniteDifferenceError(j, exc) from exc

    cols = _map(column, range(x.size), workers)
    return symmetrize(np.column_stack(cols))


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
