import numpy as np
import pytest

from automsc.errors import NonFinite
from automsc.optimize import minimize_lbfgs


def quadratic(A, b):
    def fun(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b

    return fun


def test_converges_on_convex_quadratic():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6))
    A = M @ M.T + 0.5 * np.eye(6)
    b = rng.normal(size=6)
    res = minimize_lbfgs(quadratic(A, b), np.zeros(6), tolerance=1e-8, max_iterations=200)
    assert res.converged and res.status == "converged"
    assert res.grad_max_norm <= 1e-8
    assert np.allclose(res.x, np.linalg.solve(A, b), atol=1e-6)


def test_loss_history_is_decreasing():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(10, 10))
    A = M @ M.T + np.eye(10)
    res = minimize_lbfgs(quadratic(A, rng.normal(size=10)), np.zeros(10), tolerance=1e-10, max_iterations=100)
    hist = res.loss_history
    assert len(hist) == res.n_iterations + 1
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_rosenbrock():
    def rosen(x):
        f = 100.0 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
        g = np.array(
            [
                -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1 - x[0]),
                200.0 * (x[1] - x[0] ** 2),
            ]
        )
        return f, g

    res = minimize_lbfgs(rosen, np.array([-1.2, 1.0]), tolerance=1e-6, max_iterations=500)
    assert res.converged
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_iteration_budget_respected():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(8, 8))
    A = M @ M.T + 0.1 * np.eye(8)
    res = minimize_lbfgs(quadratic(A, rng.normal(size=8)), np.zeros(8), tolerance=1e-14, max_iterations=3)
    assert res.n_iterations <= 3
    if not res.converged:
        assert res.status == "max_iterations"


def test_already_converged_at_start():
    res = minimize_lbfgs(quadratic(np.eye(2), np.zeros(2)), np.zeros(2), tolerance=1e-4, max_iterations=10)
    assert res.converged and res.n_iterations == 0


def test_memory_one_still_converges():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(5, 5))
    A = M @ M.T + np.eye(5)
    res = minimize_lbfgs(quadratic(A, rng.normal(size=5)), np.zeros(5), tolerance=1e-8, max_iterations=300, memory=1)
    assert res.converged


def test_non_finite_start_raises():
    def bad(x):
        return np.inf, np.zeros_like(x)

    with pytest.raises(NonFinite):
        minimize_lbfgs(bad, np.zeros(2), tolerance=1e-6, max_iterations=10)


def test_deterministic_across_runs():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(7, 7))
    A = M @ M.T + np.eye(7)
    b = rng.normal(size=7)
    r1 = minimize_lbfgs(quadratic(A, b), np.zeros(7), tolerance=1e-9, max_iterations=100)
    r2 = minimize_lbfgs(quadratic(A, b), np.zeros(7), tolerance=1e-9, max_iterations=100)
    assert np.array_equal(r1.x, r2.x)
    assert r1.loss_history == r2.loss_history
