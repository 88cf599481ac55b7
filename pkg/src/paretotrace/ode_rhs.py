"""Right-hand side of the tracing ODE and its stability constants.

Differentiating ``grad J_lam(x(lam)) = 0`` in ``lam`` gives

    H_lam(x) x'(lam) = grad J0(x) - grad J1(x),

which is an explicit ODE ``x' = f(lam, x)`` wherever the scalarized Hessian
``H_lam`` is positive definite. When it stops being positive definite the
solution has reached the boundary of its maximal interval of existence;
:class:`LostDefinitenessError` signals that event.

The existence interval around ``lam0`` is ``[lam0 - D', lam0 + D']``, symmetric
about the start weight.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.special import ndtri
from scipy.stats import qmc

from .core import (BiCriteriaProblem, InputError, check_weight,
                   scalarized_hessian)

DENSE_EIG_MAX_N = 64
SYMMETRY_TOL = 1e-8
_EXP_MAX = math.log(np.finfo(float).max)


class LostDefinitenessError(ArithmeticError):
    """The scalarized Hessian is not positive definite at ``(lam, x)``."""

    def __init__(self, lam: float, x: np.ndarray, min_eigenvalue: float):
        self.lam = lam
        self.x = np.array(x, dtype=float)
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"lost second-order optimality at lambda={lam:.6g}: "
            f"smallest Hessian eigenvalue {min_eigenvalue:.6g}")


@dataclass(frozen=True)
class RhsReport:
    f: np.ndarray
    min_eigenvalue: Optional[float]
    solve_residual: float
    grad0: np.ndarray
    grad1: np.ndarray
    lam: float

    @property
    def scalarized_gradient(self) -> np.ndarray:
        return (1.0 - self.lam) * self.grad0 + self.lam * self.grad1


def rhs(problem: BiCriteriaProblem, lam: float, x,
        with_eigenvalue: bool = True) -> RhsReport:
    """Solve ``H_lam(x) f = grad J0(x) - grad J1(x)`` by Cholesky.

    Raises :class:`LostDefinitenessError` if the factorization fails or the
    smallest eigenvalue is not positive. Pass ``with_eigenvalue=False`` to
    skip the eigenvalue computation (``min_eigenvalue`` is then ``None``);
    the factorization still guards definiteness.
    """
    lam = check_weight(lam)
    x = problem.check_point(x)
    h = scalarized_hessian(problem, lam, x)
    g0 = problem.grad0(x)
    g1 = problem.grad1(x)
    d = g0 - g1
    lmin = min_eigenvalue(h) if with_eigenvalue else None
    if lmin is not None and lmin <= 0.0:
        raise LostDefinitenessError(lam, x, lmin)
    try:
        factor = scipy.linalg.cho_factor(h, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        raise LostDefinitenessError(
            lam, x, lmin if lmin is not None else min_eigenvalue(h)) from None
    f = scipy.linalg.cho_solve(factor, d)
    residual = float(np.linalg.norm(h @ f - d))
    return RhsReport(f, lmin, residual, g0, g1, lam)


def _check_symmetric(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InputError(f"expected a square matrix, got shape {h.shape}")
    scale = 1.0 + (np.max(np.abs(h)) if h.size else 0.0)
    if h.size and np.max(np.abs(h - h.T)) > SYMMETRY_TOL * scale:
        raise InputError("matrix is not symmetric")
    return h


def min_eigenvalue(h, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Dense symmetric eigensolver up to n = 64; above that, shifted inverse
    iteration with the shift kept below the spectrum (verified by Cholesky
    succeeding on ``H - shift*I``).
    """
    h = _check_symmetric(h)
    n = h.shape[0]
    if n <= DENSE_EIG_MAX_N:
        return float(scipy.linalg.eigvalsh(h, subset_by_index=[0, 0])[0])
    return _inverse_iteration_min(h, tol, max_iter)


def _inverse_iteration_min(h: np.ndarray, tol: float, max_iter: int) -> float:
    n = h.shape[0]
    radii = np.sum(np.abs(h), axis=1) - np.abs(np.diag(h))
    lower = float(np.min(np.diag(h) - radii))
    upper = float(np.max(np.diag(h) + radii))
    scale = max(abs(lower), abs(upper), 1.0)
    shift = lower - 1e-3 * scale
    eye = np.eye(n)
    factor = scipy.linalg.cho_factor(h - shift * eye, lower=True)
    v = np.ones(n) / math.sqrt(n)
    rq = float(v @ h @ v)
    for _ in range(max_iter):
        w = scipy.linalg.cho_solve(factor, v)
        v = w / np.linalg.norm(w)
        hv = h @ v
        rq = float(v @ hv)
        resid = float(np.linalg.norm(hv - rq * v))
        if resid <= tol * max(1.0, abs(rq)):
            return rq
        # move the shift toward rq while keeping it below the spectrum
        target = rq - 2.0 * resid
        while target > shift:
            try:
                factor = scipy.linalg.cho_factor(h - target * eye, lower=True)
                shift = target
                break
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                target = 0.5 * (shift + target)
                if target - shift <= 1e-14 * scale:
                    break
    return rq


def spectral_norm(h: np.ndarray) -> float:
    return float(np.linalg.norm(h, 2)) if np.size(h) else 0.0


def lambda_sensitivity(problem: BiCriteriaProblem, x) -> float:
    """Lipschitz constant in ``lam`` of the smallest eigenvalue at ``x``:
    ``||hess J0(x)|| + ||hess J1(x)||``."""
    x = problem.check_point(x)
    return spectral_norm(problem.hess0(x)) + spectral_norm(problem.hess1(x))


@dataclass(frozen=True)
class LipschitzEstimates:
    """Sampled stability constants on the ball ``B_delta(x)``.

    The suprema are taken over a finite point set, so every field (and
    ``L_f`` built from them) is a statistical *lower* estimate of the true
    constant, not a rigorous bound.
    """

    L_lambda: float
    L_H: float
    C1: float
    C2: float
    L_f: float
    delta: float
    rho: float
    min_eigenvalue: float


def lipschitz_f(min_eig: float, rho: float, C1: float, C2: float,
                L_H: float) -> float:
    """``2 * (C2 / (rho*Lam) + L_H * C1 / (rho*Lam)**2)``."""
    inv = 1.0 / (rho * min_eig)
    return 2.0 * (inv * C2 + inv * inv * L_H * C1)


def ball_samples(center: np.ndarray, delta: float, samples: int) -> np.ndarray:
    """Deterministic low-discrepancy points in the closed ball.

    Unscrambled Halton points in dimension n+1: the first n coordinates are
    pushed through the normal inverse CDF to get a direction, the last gives
    the radius ``delta * u**(1/n)``.
    """
    n = center.size
    if samples <= 0:
        return np.empty((0, n))
    sampler = qmc.Halton(d=n + 1, scramble=False)
    sampler.fast_forward(1)  # the first Halton point is the origin
    u = sampler.random(samples)
    z = ndtri(np.clip(u[:, :n], 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    norms[norms == 0.0] = 1.0
    radius = delta * u[:, n] ** (1.0 / n)
    return center + (z / norms[:, None]) * radius[:, None]


def lipschitz_estimates(problem: BiCriteriaProblem, lam: float, x,
                        delta: float, rho: float = 0.5,
                        samples: int = 32) -> LipschitzEstimates:
    """Estimate ``L_lambda, L_H, C1, C2`` on ``B_delta(x)`` and assemble
    ``L_f`` with ``rho * Lam(lam, x)`` in the denominators."""
    if not delta > 0:
        raise InputError("delta must be positive")
    if not 0.0 < rho < 1.0:
        raise InputError("rho must lie in (0, 1)")
    if samples < 0:
        raise InputError("samples must be non-negative")
    lam = check_weight(lam)
    x = problem.check_point(x)
    lmin = min_eigenvalue(scalarized_hessian(problem, lam, x))
    if lmin <= 0.0:
        raise LostDefinitenessError(lam, x, lmin)

    points = np.vstack([x[None, :], ball_samples(x, delta, samples)])
    hess = [(problem.hess0(p), problem.hess1(p)) for p in points]
    C1 = max(max(np.linalg.norm(problem.grad0(p)), np.linalg.norm(problem.grad1(p)))
             for p in points)
    C2 = max(max(spectral_norm(a), spectral_norm(b)) for a, b in hess)
    L_H = 0.0
    for i, j in itertools.combinations(range(len(points)), 2):
        dist = np.linalg.norm(points[i] - points[j])
        if dist == 0.0:
            continue
        for k in (0, 1):
            L_H = max(L_H, spectral_norm(hess[i][k] - hess[j][k]) / dist)
    L_lambda = spectral_norm(hess[0][0]) + spectral_norm(hess[0][1])
    L_f = lipschitz_f(lmin, rho, C1, C2, L_H)
    return LipschitzEstimates(L_lambda, L_H, float(C1), C2, L_f, delta, rho, lmin)


@dataclass(frozen=True)
class GronwallBound:
    initial_error: float
    rhs_error: float
    L_f: float
    span_left: float
    span_right: float
    bound: float


def gronwall_bound(initial_error: float, rhs_error: float, L_f: float,
                   span_left: float, span_right: float) -> GronwallBound:
    """Deviation bound for a perturbed start and an approximate RHS:

        e0 * exp(L_f m) + (eps_f / L_f) * (exp(L_f m) - 1),
        m = max(span_left, span_right).

    With ``L_f = 0`` the second term is replaced by its limit ``eps_f * m``.
    Bounds beyond the float range are returned as ``inf``.
    """
    for name, v in (("initial_error", initial_error), ("rhs_error", rhs_error),
                    ("L_f", L_f), ("span_left", span_left),
                    ("span_right", span_right)):
        if not v >= 0:
            raise InputError(f"{name} must be non-negative")
    m = max(span_left, span_right)
    # past exp's range the bound is uninformative; report inf instead of failing
    growth = math.exp(L_f * m) if L_f * m < _EXP_MAX else math.inf
    if L_f == 0.0:
        rhs_term = rhs_error * m
    elif growth == math.inf:
        rhs_term = math.inf if rhs_error > 0 else 0.0
    else:
        rhs_term = rhs_error * math.expm1(L_f * m) / L_f
    bound = initial_error * growth + rhs_term if initial_error > 0 else rhs_term
    return GronwallBound(initial_error, rhs_error, L_f, span_left, span_right, bound)
