import time

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from modules.loss_module import GradientEngine
from modules.path_module import lambda_grid, solve_path
from modules.simulation_module import build_design, simulate_two_sample
from modules.solvers import (
    AdmmConfig,
    AdmmSolver,
    FistaSolver,
    SolverConfig,
    admm_solve,
    solve_sylvester_ridge,
    symmetric_eigen,
)
from tests.conftest import random_spd
from utils.errors import EigenSolverError, InvalidArgumentError


class TestSymmetricEigen:
    def test_diagonal(self):
        eig = symmetric_eigen(np.diag([3.0, 1.0, 2.0]))
        assert_allclose(eig.values, [3.0, 2.0, 1.0])
        assert_allclose(np.abs(eig.vectors), np.eye(3)[:, [0, 2, 1]])

    def test_two_by_two(self):
        eig = symmetric_eigen([[2.0, 1.0], [1.0, 2.0]])
        assert_allclose(eig.values, [3.0, 1.0], atol=1e-14)
        s = 1 / np.sqrt(2)
        assert_allclose(np.abs(eig.vectors[:, 0]), [s, s], atol=1e-14)
        assert abs(eig.vectors[0, 1] + eig.vectors[1, 1]) <= 1e-14

    def test_reconstruction_and_orthogonality(self, rng):
        A = rng.standard_normal((6, 6))
        S = A + A.T
        eig = symmetric_eigen(S)
        V, d = eig.vectors, eig.values
        assert np.linalg.norm(V @ np.diag(d) @ V.T - S) <= 1e-10 * np.linalg.norm(S)
        assert np.linalg.norm(V.T @ V - np.eye(6)) <= 1e-8
        assert np.all(np.diff(d) <= 0)

    def test_zero_matrix(self):
        eig = symmetric_eigen(np.zeros((3, 3)))
        assert_array_equal(eig.values, 0.0)

    def test_sweep_limit(self, rng):
        A = rng.standard_normal((8, 8))
        with pytest.raises(EigenSolverError):
            symmetric_eigen(A + A.T, max_sweeps=0)

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidArgumentError):
            symmetric_eigen([[1.0, 2.0], [0.0, 1.0]])


class TestSylvesterRidge:
    def test_zero_covariances(self, rng):
        C = rng.standard_normal((3, 3))
        assert_allclose(solve_sylvester_ridge(np.zeros((3, 3)), np.zeros((3, 3)), C, 2.0), C / 2.0, atol=1e-14)

    def test_identity(self, rng):
        C = rng.standard_normal((4, 4))
        assert_allclose(solve_sylvester_ridge(np.eye(4), np.eye(4), C, 1.0), C / 2.0, atol=1e-14)

    def test_plug_back_residual(self, rng):
        S1, S2 = random_spd(5, seed=21), random_spd(5, seed=22)
        C = rng.standard_normal((5, 5))
        Delta = solve_sylvester_ridge(S1, S2, C, 0.7)
        assert np.linalg.norm(S1 @ Delta @ S2 + 0.7 * Delta - C) <= 1e-8

    @pytest.mark.parametrize("rho", [0.0, -1.0])
    def test_rho_must_be_positive(self, rho):
        with pytest.raises(InvalidArgumentError):
            solve_sylvester_ridge(np.eye(2), np.eye(2), np.eye(2), rho)


class TestAdmmSolve:
    def test_lambda_max_gives_zero(self, spd_pair):
        S1, S2 = spd_pair
        lam = np.max(np.abs(S1 - S2))
        result = admm_solve(S1, S2, AdmmConfig(lambda_=lam))
        assert_array_equal(result.delta_hat, 0.0)
        assert result.converged
        assert result.iterations == 0

    def test_identical_covariances(self, spd_pair):
        S1, _ = spd_pair
        result = admm_solve(S1, S1.copy(), AdmmConfig(lambda_=0.2))
        assert_array_equal(result.delta_hat, 0.0)

    def test_converged_result_invariants(self, sparse_instance):
        _, X, Y = sparse_instance
        engine = GradientEngine.from_data(X, Y, kind="asym")
        config = AdmmConfig(lambda_=0.75 * engine.lambda_max)
        result = AdmmSolver(engine, config).solve()
        assert result.converged
        assert result.lipschitz_used == 0.0
        assert result.objective == pytest.approx(engine.objective(result.delta_hat, config.lambda_), abs=1e-12)
        assert result.objective_trace[-1] == result.objective

    @pytest.mark.parametrize("ratio", [0.9, 0.6])
    def test_objective_trace_stays_above_optimum(self, sparse_instance, ratio):
        _, X, Y = sparse_instance
        engine = GradientEngine.from_data(X, Y, kind="asym")
        lam = ratio * engine.lambda_max
        optimum = FistaSolver(engine, SolverConfig(lambda_=lam, rel_tol=1e-12, max_iter=50000)).solve().objective
        config = AdmmConfig(lambda_=lam, rel_tol=1e-10, primal_tol=1e-8, max_iter=20000)
        result = AdmmSolver(engine, config).solve()
        assert result.objective_trace
        slack = 1e-6 * (1 + abs(optimum))
        assert min(result.objective_trace) >= optimum - slack
        assert result.objective == pytest.approx(optimum, rel=1e-4)

    def test_eigendecompositions_reused(self, sparse_instance):
        _, X, Y = sparse_instance
        engine = GradientEngine.from_data(X, Y, kind="asym")
        solver = AdmmSolver(engine, AdmmConfig())
        solver.prepare()
        eigs = solver._eigs
        solver.solve(lambda_=0.8 * engine.lambda_max)
        assert solver._eigs is eigs

    def test_rejects_symmetric_loss(self, spd_pair):
        engine = GradientEngine.from_covariances(*spd_pair, kind="sym")
        with pytest.raises(InvalidArgumentError):
            AdmmSolver(engine, AdmmConfig())

    def test_dimension_guard(self):
        engine = GradientEngine.from_covariances(np.eye(6), np.eye(6) * 2, kind="asym")
        with pytest.raises(InvalidArgumentError):
            AdmmSolver(engine, AdmmConfig(max_dimension=5))

    @pytest.mark.parametrize("kwargs", [{"rho": 0.0}, {"lambda_": -0.1}, {"max_iter": 0}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            AdmmConfig(**kwargs)

    def test_from_config(self):
        config = AdmmConfig.from_config({"solver": {"admm": {"rho": 2.5, "primal_tol": 1e-4}}}, rho=None, max_iter=7)
        assert config.rho == 2.5
        assert config.primal_tol == 1e-4
        assert config.max_iter == 7


@pytest.mark.slow
def test_fista_path_faster_than_admm_path():
    design = build_design("sparse", 200)
    X, Y = simulate_two_sample(design, 200, 200, seed=2019)
    engine = GradientEngine.from_data(X, Y, kind="asym", mode="dense")
    grid = lambda_grid(engine.lambda_max)

    seconds = {}
    for name, config in (("fista", SolverConfig()), ("admm", AdmmConfig())):
        start = time.perf_counter()
        result = solve_path(engine, grid, config)
        seconds[name] = time.perf_counter() - start
        assert len(result.solutions) == 50
    assert seconds["fista"] < seconds["admm"]
