"""Convex quadratic benchmark with a closed-form Pareto set.

``J_i(x) = 1/2 (x - chi_i)^T Q_i (x - chi_i)`` with SPD ``Q_i``. The
critical point of ``J_lam`` solves

    [(1-lam) Q0 + lam Q1] x = (1-lam) Q0 chi0 + lam Q1 chi1.

Random instances
----------------
``random_qp(n, seed)`` uses the stream ``philox4x64-boxmuller-v1``:

1. Philox-4x64-10 with key words ``(seed, 0)`` applied to the counters
   ``(1, 0, 0, 0), (2, 0, 0, 0), ...``; the four output words of each
   block, in order, give the raw 64-bit values ``r_0, r_1, ...`` (this is
   numpy's ``Philox(key=seed).random_raw``).
2. Uniforms ``u_k = ((r_k >> 11) + 1) * 2**-53`` in (0, 1].
3. Box-Muller on consecutive pairs:
   ``z_{2i} = sqrt(-2 ln u_{2i}) cos(2 pi u_{2i+1})``,
   ``z_{2i+1} = sqrt(-2 ln u_{2i}) sin(2 pi u_{2i+1})``.
4. The normals fill, in order, ``M0`` (row-major n*n), ``M1``, ``chi0``,
   ``chi1``; then ``Q_j = M_j^T M_j``.

Each step is specified, so another implementation can reproduce instances
exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .core import BiCriteriaProblem, InputError, check_weight

STREAM_NAME = "philox4x64-boxmuller-v1"


def standard_normals(count: int, seed: int) -> np.ndarray:
    """``count`` standard normal variates from the documented stream."""
    pairs = (count + 1) // 2
    bitgen = np.random.Philox(key=int(seed))
    raw = np.asarray(bitgen.random_raw(2 * pairs), dtype=np.uint64)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u[0::2]))
    theta = 2.0 * np.pi * u[1::2]
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:count]


@dataclass(frozen=True, eq=False)
class QuadraticProblem(BiCriteriaProblem):
    Q0: np.ndarray
    Q1: np.ndarray
    chi0: np.ndarray
    chi1: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        q0 = np.array(self.Q0, dtype=float)
        q1 = np.array(self.Q1, dtype=float)
        c0 = np.array(self.chi0, dtype=float)
        c1 = np.array(self.chi1, dtype=float)
        n = c0.size
        if q0.shape != (n, n) or q1.shape != (n, n) or c1.shape != (n,) or n == 0:
            raise InputError("inconsistent quadratic problem shapes")
        for name, q in (("Q0", q0), ("Q1", q1)):
            if not np.allclose(q, q.T, rtol=0, atol=1e-12 * (1 + np.abs(q).max())):
                raise InputError(f"{name} is not symmetric")
            try:
                np.linalg.cholesky(q)
            except np.linalg.LinAlgError:
                raise InputError(f"{name} is not positive definite") from None
        for arr in (q0, q1, c0, c1):
            arr.setflags(write=False)
        object.__setattr__(self, "Q0", q0)
        object.__setattr__(self, "Q1", q1)
        object.__setattr__(self, "chi0", c0)
        object.__setattr__(self, "chi1", c1)

    @property
    def dimension(self) -> int:
        return self.chi0.size

    def j0(self, x):
        d = self.check_point(x) - self.chi0
        return 0.5 * float(d @ self.Q0 @ d)

    def j1(self, x):
        d = self.check_point(x) - self.chi1
        return 0.5 * float(d @ self.Q1 @ d)

    def grad0(self, x):
        return self.Q0 @ (self.check_point(x) - self.chi0)

    def grad1(self, x):
        return self.Q1 @ (self.check_point(x) - self.chi1)

    def hess0(self, x):
        self.check_point(x)
        return self.Q0.copy()

    def hess1(self, x):
        self.check_point(x)
        return self.Q1.copy()

    def to_json(self, explicit: bool = False) -> dict:
        """Replay document. Seeded instances serialize as ``(n, seed)``
        unless ``explicit`` is set."""
        if self.seed is not None and not explicit:
            return {"type": "quadratic", "n": self.dimension, "seed": self.seed,
                    "stream": STREAM_NAME}
        return {"type": "quadratic-explicit", "n": self.dimension,
                "Q0": self.Q0.tolist(), "Q1": self.Q1.tolist(),
                "chi0": self.chi0.tolist(), "chi1": self.chi1.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "QuadraticProblem":
        kind = doc.get("type", "quadratic")
        if kind == "quadratic":
            stream = doc.get("stream", STREAM_NAME)
            if stream != STREAM_NAME:
                raise InputError(f"unsupported random stream {stream!r}")
            return random_qp(int(doc["n"]), int(doc["seed"]))
        if kind == "quadratic-explicit":
            return cls(np.array(doc["Q0"]), np.array(doc["Q1"]),
                       np.array(doc["chi0"]), np.array(doc["chi1"]))
        raise InputError(f"not a quadratic problem document: {kind!r}")

    def dumps(self, explicit: bool = False) -> str:
        return json.dumps(self.to_json(explicit))


def random_qp(n: int, seed: int) -> QuadraticProblem:
    """Random instance with ``Q_j = M_j^T M_j`` for standard normal ``M_j``
    and standard normal ``chi_j``."""
    if n < 1:
        raise InputError("dimension must be at least 1")
    z = standard_normals(2 * n * n + 2 * n, seed)
    m0 = z[: n * n].reshape(n, n)
    m1 = z[n * n: 2 * n * n].reshape(n, n)
    chi0 = z[2 * n * n: 2 * n * n + n]
    chi1 = z[2 * n * n + n:]
    q0 = m0.T @ m0
    q1 = m1.T @ m1
    # exact symmetry; the product is symmetric only up to rounding
    q0 = 0.5 * (q0 + q0.T)
    q1 = 0.5 * (q1 + q1.T)
    return QuadraticProblem(q0, q1, chi0, chi1, seed=seed)


def _combined(qp: QuadraticProblem, lam: float) -> np.ndarray:
    return (1.0 - lam) * qp.Q0 + lam * qp.Q1


def analytic_solution(qp: QuadraticProblem, lam: float) -> np.ndarray:
    lam = check_weight(lam)
    rhs = (1.0 - lam) * (qp.Q0 @ qp.chi0) + lam * (qp.Q1 @ qp.chi1)
    return scipy.linalg.solve(_combined(qp, lam), rhs, assume_a="pos")


def qp_rhs_closed_form(qp: QuadraticProblem, lam: float, x) -> np.ndarray:
    """``[(1-lam)Q0 + lam Q1]^{-1} (Q0 (x - chi0) - Q1 (x - chi1))``."""
    lam = check_weight(lam)
    x = qp.check_point(x)
    b = qp.Q0 @ (x - qp.chi0) - qp.Q1 @ (x - qp.chi1)
    return scipy.linalg.solve(_combined(qp, lam), b, assume_a="pos")
