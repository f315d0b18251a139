import numpy as np
import pytest

from ngfreg.lbfgs import (
    LbfgsConfig,
    StoppingRules,
    lbfgs_minimize,
    two_loop_direction,
)


def quadratic_problem(rng, n=12):
    Q = rng.standard_normal((n, n))
    A = Q.T @ Q + n * np.eye(n)
    b = rng.standard_normal(n)

    def f(x):
        return 0.5 * float(x @ (A @ x)) - float(b @ x), A @ x - b

    x_star = np.linalg.solve(A, b)
    return f, x_star


def rosenbrock(x):
    J = float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))
    g = np.zeros_like(x)
    g[:-1] = -400.0 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2.0 * (1 - x[:-1])
    g[1:] += 200.0 * (x[1:] - x[:-1] ** 2)
    return J, g


def test_config_validation():
    with pytest.raises(ValueError):
        LbfgsConfig(memory=0)
    with pytest.raises(ValueError):
        LbfgsConfig(c1=1.5)
    with pytest.raises(ValueError):
        StoppingRules(tol_J=0.0)


def test_two_loop_empty_history_is_steepest_descent(rng):
    g = rng.standard_normal(8)
    assert np.array_equal(two_loop_direction([], g), -g)


def test_two_loop_matches_closed_form_inverse(rng):
    # with a single (s, y) pair the implicit inverse Hessian is known in
    # closed form (BFGS update of gamma * I)
    n = 6
    s = rng.standard_normal(n)
    y = rng.standard_normal(n)
    if float(s @ y) < 0:
        y = -y
    g = rng.standard_normal(n)
    rho = 1.0 / float(s @ y)
    gamma = float(s @ y) / float(y @ y)
    V = np.eye(n) - rho * np.outer(y, s)
    H = V.T @ (gamma * np.eye(n)) @ V + rho * np.outer(s, s)
    d = two_loop_direction([(s, y)], g)
    assert np.allclose(d, -H @ g, atol=1e-12)


def test_quadratic_converges_to_solution(rng):
    f, x_star = quadratic_problem(rng)
    x, trace = lbfgs_minimize(f, np.zeros_like(x_star),
                              stop=StoppingRules(tol_grad=1e-8, tol_J=1e-16,
                                                 tol_step=1e-12))
    assert np.max(np.abs(x - x_star)) < 1e-6
    assert trace.iterations < 60


def test_rosenbrock_converges(rng):
    x0 = np.full(8, -1.2)
    x, trace = lbfgs_minimize(
        rosenbrock, x0,
        cfg=LbfgsConfig(max_iterations=300),
        stop=StoppingRules(tol_grad=1e-10, tol_J=1e-18, tol_step=1e-14),
    )
    assert np.max(np.abs(x - 1.0)) < 1e-5
    assert trace.stop_reason != "max iterations"


def test_stationary_start_returns_immediately():
    def f(x):
        return 0.0, np.zeros_like(x)

    x, trace = lbfgs_minimize(f, np.ones(4))
    assert trace.iterations == 0
    assert trace.stop_reason == "stationary start"


def test_monotone_decrease(rng):
    f, _ = quadratic_problem(rng, n=20)
    _, trace = lbfgs_minimize(f, rng.standard_normal(20))
    js = [r.J for r in trace.records]
    assert all(b <= a + 1e-12 for a, b in zip(js, js[1:]))


def test_line_search_failure_reported():
    # the "gradient" points away from descent, so every probe increases J
    # and backtracking must give up cleanly, returning the start point
    def f(x):
        return float(np.sum(x)), -np.ones_like(x)

    x, trace = lbfgs_minimize(f, np.ones(3), cfg=LbfgsConfig(max_ls_steps=5))
    assert trace.line_search_failed
    assert trace.stop_reason == "line search failed"
    assert np.array_equal(x, np.ones(3))


def test_respects_max_iterations(rng):
    f, _ = quadratic_problem(rng, n=30)
    _, trace = lbfgs_minimize(
        f, rng.standard_normal(30),
        cfg=LbfgsConfig(max_iterations=2),
        stop=StoppingRules(tol_grad=1e-16, tol_J=1e-18, tol_step=1e-16, min_iterations=1),
    )
    assert trace.iterations <= 2
