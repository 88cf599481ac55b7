import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paretotrace.core import (FiniteDifferenceError, InputError, check_weight,
                              criticality, fd_gradient, fd_hessian,
                              scalarized_gradient, scalarized_hessian,
                              scalarized_value)

from conftest import quadratic_function_problem


def test_check_weight_bounds():
    assert check_weight(0) == 0.0
    assert check_weight(1) == 1.0
    for bad in (-1e-12, 1.0000001, np.nan):
        with pytest.raises(InputError):
            check_weight(bad)


def test_scalarization_endpoints(qp10):
    x = np.linspace(-1, 1, 10)
    assert scalarized_value(qp10, 0.0, x) == qp10.j0(x)
    assert scalarized_value(qp10, 1.0, x) == qp10.j1(x)
    np.testing.assert_array_equal(scalarized_gradient(qp10, 0.0, x), qp10.grad0(x))
    np.testing.assert_array_equal(scalarized_hessian(qp10, 1.0, x), qp10.Q1)


def test_dimension_mismatch_rejected(qp10):
    with pytest.raises(InputError):
        scalarized_value(qp10, 0.5, np.zeros(9))
    with pytest.raises(InputError):
        qp10.grad0(np.zeros((10, 1)))


def test_criticality_symmetric_gradients():
    # grad J0 = (1,0), grad J1 = (-1,0) at x=0 cancel at lam = 1/2
    p = quadratic_function_problem(np.eye(2), np.eye(2), [-1.0, 0.0], [1.0, 0.0])
    rep = criticality(p, 0.5, np.zeros(2), 1e-12)
    assert rep.grad_norm == 0.0
    assert rep.is_critical
    assert rep.pareto_epsilon == pytest.approx(2e-12)


def test_criticality_pareto_epsilon_undefined_at_endpoints(qp10):
    rep = criticality(qp10, 0.0, qp10.chi0, 1e-8)
    assert rep.is_critical
    assert rep.pareto_epsilon is None
    with pytest.raises(InputError):
        criticality(qp10, 0.3, qp10.chi0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(1e-6, 1.0))
def test_pareto_epsilon_formula(lam, eps):
    p = quadratic_function_problem(np.eye(1), np.eye(1), [0.0], [1.0])
    rep = criticality(p, lam, np.array([lam]), eps)
    assert rep.pareto_epsilon == pytest.approx(eps / min(lam, 1 - lam))


def test_fd_gradient_and_hessian_of_quadratic():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    q = a.T @ a + np.eye(4)
    c = rng.standard_normal(4)
    x = rng.standard_normal(4)
    f = lambda y: 0.5 * (y - c) @ q @ (y - c)
    g = fd_gradient(f, x)
    np.testing.assert_allclose(g, q @ (x - c), rtol=1e-6, atol=1e-8)
    h = fd_hessian(lambda y: q @ (y - c), x)
    np.testing.assert_allclose(h, q, rtol=1e-7, atol=1e-7)
    np.testing.assert_array_equal(h, h.T)


def test_fd_threads_match_serial():
    f = lambda y: float(np.sin(y).sum() + (y**3).sum())
    x = np.linspace(0.1, 0.9, 6)
    np.testing.assert_array_equal(fd_gradient(f, x, workers=1), fd_gradient(f, x, workers=3))


def test_fd_error_names_coordinate():
    def f(y):
        if y[2] > 0.5:
            raise ValueError("left the domain")
        return float(y.sum())

    with pytest.raises(FiniteDifferenceError) as info:
        fd_gradient(f, np.array([0.0, 0.0, 0.5]), step=1e-3)
    assert info.value.coordinate == 2


def test_function_problem_fd_hessian_fallback():
    q = np.array([[2.0, 0.5], [0.5, 1.0]])
    p = quadratic_function_problem(q, np.eye(2), [0, 0], [1, 1], hessians=False)
    np.testing.assert_allclose(p.hess0(np.array([0.3, -0.2])), q, atol=1e-7)
