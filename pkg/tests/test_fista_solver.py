import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from modules.loss_module import GradientEngine
from modules.simulation_module import build_design, simulate_two_sample
from modules.solvers import (
    AdmmConfig,
    AdmmSolver,
    FistaSolver,
    SolverConfig,
    fista_solve,
    momentum_next,
    prox_residual,
    stop_condition,
    symmetrize,
)
from utils.errors import DivergenceError, InvalidArgumentError, ShapeError


class TestMomentum:
    def test_first_step(self):
        assert momentum_next(1.0) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-10)

    def test_second_step(self):
        # (1 + √(1 + 4·2.6180339887))/2
        assert momentum_next(1.6180339887) == pytest.approx(2.1935271, abs=1e-6)

    def test_sequence_lower_bound(self):
        t = 1.0
        for k in range(1, 101):
            assert t >= (k + 1) / 2
            t = momentum_next(t)

    def test_rejects_below_one(self):
        with pytest.raises(InvalidArgumentError):
            momentum_next(0.5)


class TestConfig:
    def test_from_config_precedence(self):
        main_config = {"solver": {"fista": {"max_iter": 50, "rel_tol": 1e-7}}}
        config = SolverConfig.from_config(main_config, max_iter=20, rel_tol=None)
        assert config.max_iter == 20
        assert config.rel_tol == 1e-7
        assert config.lambda_ == 0.0

    @pytest.mark.parametrize("kwargs", [{"lambda_": -1.0}, {"rel_tol": 0.0}, {"max_iter": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            SolverConfig(**kwargs)

    def test_stop_condition(self):
        assert stop_condition(1.0, 1.0 + 1e-6, 1e-5)
        assert not stop_condition(1.0, 0.9, 1e-5)


class TestFixedPoints:
    @pytest.mark.parametrize("kind", ["asym", "sym"])
    def test_lambda_max_gives_exact_zero(self, sparse_instance, kind):
        _, X, Y = sparse_instance
        engine = GradientEngine.from_data(X, Y, kind=kind)
        result = fista_solve(engine, SolverConfig(lambda_=engine.lambda_max))
        assert result.converged
        assert result.iterations <= 2
        assert np.count_nonzero(result.delta_hat) == 0

    def test_identical_groups_give_zero(self, sparse_instance):
        _, X, _ = sparse_instance
        engine = GradientEngine.from_data(X, X.copy(), kind="sym")
        result = fista_solve(engine, SolverConfig(lambda_=0.1))
        assert_array_equal(result.delta_hat, 0.0)
        assert result.objective == 0.0


class TestFistaSolve:
    @pytest.fixture(scope="class")
    def engine(self, sparse_instance):
        _, X, Y = sparse_instance
        return GradientEngine.from_data(X, Y, kind="asym")

    def test_invariants(self, engine):
        lam = 0.75 * engine.lambda_max
        result = fista_solve(engine, SolverConfig(lambda_=lam, rel_tol=1e-8))
        assert result.converged
        assert result.objective_trace[-1] == result.objective
        assert result.objective == pytest.approx(engine.objective(result.delta_hat, lam), abs=1e-12)
        assert all(math.isfinite(v) for v in result.objective_trace)
        assert result.lipschitz_used == engine.lipschitz_constant()
        assert result.prox_residual <= 1e-4 * (1 + np.linalg.norm(result.delta_hat))
        assert result.prox_residual == pytest.approx(
            prox_residual(engine, result.delta_hat, lam, result.lipschitz_used)
        )
        assert len(result.objective_trace) == result.iterations

    def test_stop_condition_held_at_last_iteration(self, engine):
        lam = 0.8 * engine.lambda_max
        result = fista_solve(engine, SolverConfig(lambda_=lam))
        trace = result.objective_trace
        assert result.converged
        prev = trace[-2] if len(trace) > 1 else engine.objective(np.zeros((engine.p, engine.p)), lam)
        assert stop_condition(prev, trace[-1], 1e-5)

    def test_max_iter_not_converged(self, engine):
        result = fista_solve(engine, SolverConfig(lambda_=0.55 * engine.lambda_max, max_iter=3, rel_tol=1e-14))
        assert not result.converged
        assert result.iterations == 3

    @pytest.mark.parametrize("mode", ["dense", "lowrank"])
    def test_symmetric_loss_preserves_symmetry(self, sparse_instance, mode):
        _, X, Y = sparse_instance
        engine = GradientEngine.from_data(X, Y, kind="sym", mode=mode)
        result = fista_solve(engine, SolverConfig(lambda_=0.6 * engine.lambda_max))
        assert result.nonzero_count > 0
        assert_array_equal(result.delta_hat, result.delta_hat.T)

    def test_symmetrize_output(self, engine):
        lam = 0.7 * engine.lambda_max
        result = fista_solve(engine, SolverConfig(lambda_=lam, symmetrize_output=True))
        assert_array_equal(result.delta_hat, result.delta_hat.T)
        assert result.objective == engine.objective(result.delta_hat, lam)

    def test_solver_reuse_with_lambda_override(self, engine):
        solver = FistaSolver(engine, SolverConfig())
        high = solver.solve(lambda_=engine.lambda_max)
        low = solver.solve(lambda_=0.6 * engine.lambda_max)
        assert high.lambda_ == engine.lambda_max
        assert low.nonzero_count >= high.nonzero_count

    def test_bad_initial_point(self, engine):
        with pytest.raises(ShapeError):
            fista_solve(engine, SolverConfig(lambda_=0.1), Delta0=np.zeros((3, 3)))

    def test_underestimated_lipschitz_diverges(self, engine):
        engine_bad = GradientEngine.from_covariances(engine.S1, engine.S2, kind="asym")
        engine_bad._lipschitz = 1e-12
        with pytest.raises(DivergenceError) as info:
            fista_solve(engine_bad, SolverConfig(lambda_=0.0, max_iter=10000))
        assert info.value.iteration >= 1


class TestAgreementWithAdmm:
    @pytest.mark.parametrize("seed", range(5))
    def test_objectives_agree(self, seed):
        design = build_design("sparse", 40)
        X, Y = simulate_two_sample(design, 60, 60, seed=100 + seed)
        engine = GradientEngine.from_data(X, Y, kind="asym")
        lam = 0.75 * engine.lambda_max
        fista = fista_solve(engine, SolverConfig(lambda_=lam, rel_tol=1e-10, max_iter=20000))
        admm = AdmmSolver(engine, AdmmConfig(lambda_=lam, rel_tol=1e-10, primal_tol=1e-8, max_iter=20000)).solve()
        assert abs(fista.objective - admm.objective) <= 1e-4 * abs(admm.objective)

    def test_accelerated_rate_bound(self):
        design = build_design("sparse", 30)
        X, Y = simulate_two_sample(design, 60, 60, seed=3)
        engine = GradientEngine.from_data(X, Y, kind="asym")
        lam = 0.75 * engine.lambda_max

        reference = AdmmSolver(
            engine, AdmmConfig(lambda_=lam, rel_tol=1e-10, primal_tol=1e-9, max_iter=50000)
        ).solve()
        F_star = reference.objective
        delta_star = reference.delta_hat

        result = fista_solve(engine, SolverConfig(lambda_=lam, rel_tol=1e-12, max_iter=2000))
        L = result.lipschitz_used
        bound_scale = 2.0 * L * float(np.sum(delta_star ** 2))
        for k, F_k in enumerate(result.objective_trace, start=1):
            assert F_k - F_star <= bound_scale / (k + 1) ** 2 + 1e-8


def test_symmetrize_is_exact_mirror(rng):
    M = rng.standard_normal((5, 5))
    S = symmetrize(M)
    assert_array_equal(S, S.T)
    np.testing.assert_allclose(S, 0.5 * (M + M.T), atol=1e-15)
