import numpy as np
import pytest

from paretotrace.core import FunctionProblem
from paretotrace.quadratic import QuadraticProblem, random_qp

# criterion id -> (title, passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(
            f"[{'PASS' if ok else 'FAIL'}] criterion {cid:2d}: {title} -- {detail}")


@pytest.fixture
def qp10():
    return random_qp(10, 3)


@pytest.fixture
def scalar_qp():
    """J0 = x^2/2, J1 = (x-1)^2/2 with x(lam) = lam."""
    return QuadraticProblem(np.eye(1), np.eye(1), np.zeros(1), np.ones(1))


def quadratic_function_problem(q0, q1, c0, c1, hessians=True):
    q0, q1 = np.asarray(q0, float), np.asarray(q1, float)
    c0, c1 = np.asarray(c0, float), np.asarray(c1, float)
    return FunctionProblem(
        dimension=c0.size,
        f0=lambda x: 0.5 * (x - c0) @ q0 @ (x - c0),
        f1=lambda x: 0.5 * (x - c1) @ q1 @ (x - c1),
        g0=lambda x: q0 @ (x - c0),
        g1=lambda x: q1 @ (x - c1),
        h0=(lambda x: q0) if hessians else None,
        h1=(lambda x: q1) if hessians else None,
    )


def quartic_problem(n=3):
    """Smooth non-quadratic pair: J0 = sum(x^4)/4 + |x|^2/2, J1 = |x - 1|^2/2.

    Each coordinate of the critical point solves (1 - lam) x^3 + x - lam = 0,
    which has a single real root in [0, 1].
    """
    one = np.ones(n)
    return FunctionProblem(
        dimension=n,
        f0=lambda x: 0.25 * np.sum(x**4) + 0.5 * x @ x,
        f1=lambda x: 0.5 * (x - one) @ (x - one),
        g0=lambda x: x**3 + x,
        g1=lambda x: x - one,
        h0=lambda x: np.diag(3 * x**2 + 1),
        h1=lambda x: np.eye(n),
    )


def quartic_solution(lam, n=3):
    from scipy.optimize import brentq
    r = brentq(lambda t: (1 - lam) * t**3 + t - lam, 0.0, 1.0, xtol=1e-16, rtol=1e-15)
    return np.full(n, r)
