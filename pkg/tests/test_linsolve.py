"""
无矩阵 GMRES
"""
import numpy as np
import pytest

from stdg.core.linsolve import KrylovConfig, gmres
from stdg.utils.errors import ConvergenceError, SolverError


def _random_system(seed, n=50):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    return A, b


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_solve(seed):
    A, b = _random_system(seed)
    result = gmres(lambda x: A @ x, b, config=KrylovConfig(tol=1e-12))
    assert result.converged
    assert np.allclose(result.solution, np.linalg.solve(A, b), atol=1e-9)


def test_restarted_nonsymmetric():
    rng = np.random.default_rng(7)
    n = 50
    A = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    result = gmres(lambda x: A @ x, b, config=KrylovConfig(tol=1e-11, restart=8, max_iter=2000))
    assert result.converged
    assert result.iterations > 8
    assert np.allclose(result.solution, np.linalg.solve(A, b), atol=1e-9)


def test_array_shaped_unknowns():
    A, b = _random_system(3, 24)
    result = gmres(lambda x: (A @ x.ravel()).reshape(2, 3, 4), b.reshape(2, 3, 4))
    assert result.solution.shape == (2, 3, 4)
    assert np.allclose(result.solution.ravel(), np.linalg.solve(A, b), atol=1e-8)


def test_zero_rhs_returns_zero():
    result = gmres(lambda x: 2 * x, np.zeros(10))
    assert result.iterations == 0
    assert not result.solution.any()


def test_initial_guess_used_when_allowed():
    A, b = _random_system(1, 20)
    exact = np.linalg.solve(A, b)
    result = gmres(lambda x: A @ x, b, x0=exact, config=KrylovConfig(zero_guess=False))
    assert result.iterations == 0
    assert np.allclose(result.solution, exact)


def test_non_convergence_reported():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((40, 40))
    b = rng.standard_normal(40)
    loose = KrylovConfig(tol=1e-14, restart=2, max_iter=4)
    result = gmres(lambda x: A @ x, b, config=loose)
    assert not result.converged
    assert result.iterations == 4
    strict = KrylovConfig(tol=1e-14, restart=2, max_iter=4, raise_on_failure=True)
    with pytest.raises(ConvergenceError):
        gmres(lambda x: A @ x, b, config=strict)


def test_errors():
    with pytest.raises(SolverError):
        gmres(lambda x: x, np.array([1.0, np.nan]))
    with pytest.raises(SolverError):
        gmres(lambda x: x[:-1], np.ones(5))
    with pytest.raises(SolverError):
        KrylovConfig(tol=0.0)
