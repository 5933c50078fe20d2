"""
FISTA 求解器
加速近端梯度（快速迭代收缩阈值）算法求解 argmin L(Δ) + λ‖Δ‖₁

步骤:
    Step 0. Δ₋₁ = Δ₀, t₀ = t₁ = 1
    Step 1. Δ'ₖ = Δₖ + ((tₖ₋₁ - 1)/tₖ)(Δₖ - Δₖ₋₁)
    Step 2. Δₖ₊₁ = soft(Δ'ₖ - ∇L(Δ'ₖ)/L, λ/L)
    Step 3. tₖ₊₁ = (1 + √(1 + 4tₖ²))/2
    重复 1-3 直到 |F(Δₖ) - F(Δₖ₊₁)| < rel_tol·(|F(Δₖ)| + 1) 或达到 max_iter

不做重启、不做回溯线搜索：Lipschitz 常数精确可得，固定步长即可。
"""

from __future__ import annotations

import math
import time
from typing import Optional

import numpy as np

from modules.loss_module import GradientEngine
from utils.errors import InvalidArgumentError
from utils.matrix_ops import soft_threshold

from .base_solver import (
    BaseSolver,
    SolverConfig,
    SolverResult,
    prox_residual,
    stop_condition,
    symmetrize,
)


def momentum_next(t_k: float) -> float:
    """动量序列 tₖ₊₁ = (1 + √(1 + 4tₖ²))/2"""
    if not t_k >= 1.0:
        raise InvalidArgumentError(f"动量参数 t_k 必须 ≥ 1，实际为 {t_k}")
    return (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0


class FistaSolver(BaseSolver):
    """
    FISTA 求解器
    在同一个 GradientEngine 上可重复调用 solve()，Lipschitz 常数由引擎缓存
    """

    name = "fista"

    def __init__(self, engine: GradientEngine, config: SolverConfig, logger=None):
        super().__init__(engine, config, logger)

    def solve(self, Delta0=None, lambda_: Optional[float] = None) -> SolverResult:
        config: SolverConfig = self._resolve_config(lambda_)
        engine = self.engine
        lam = config.lambda_
        start_time = time.perf_counter()

        L = engine.lipschitz_constant()
        Delta = self._initial_point(Delta0)
        Delta_prev = Delta.copy()
        t_prev, t = 1.0, 1.0

        F_prev = engine.objective(Delta, lam)
        self._check_finite(F_prev, 0)

        self.logger.info(
            f"FISTA 开始: λ={lam:.6g}, L={L:.6g}, p={engine.p}, "
            f"loss={engine.kind.value}, mode={engine.mode.value}"
        )

        trace = []
        converged = False
        iterations = 0
        for k in range(1, config.max_iter + 1):
            iterations = k
            # Step 1: 外推
            Y = Delta + ((t_prev - 1.0) / t) * (Delta - Delta_prev)
            self._check_finite_matrix(Y, k)

            # Step 2: 近端梯度步
            step = Y - engine.gradient(Y) / L
            self._check_finite_matrix(step, k)
            Delta_next = soft_threshold(step, lam / L)

            F_next = engine.objective(Delta_next, lam)
            self._check_finite(F_next, k)
            trace.append(F_next)

            # Step 3: 动量更新
            Delta_prev, Delta = Delta, Delta_next
            t_prev, t = t, momentum_next(t)

            if k % config.log_every == 0:
                self.logger.debug(f"FISTA 第 {k} 次迭代: F={F_next:.10g}, 非零元={np.count_nonzero(Delta)}")

            if stop_condition(F_prev, F_next, config.rel_tol):
                converged = True
                break
            F_prev = F_next

        residual = prox_residual(engine, Delta, lam, L)
        delta_hat = symmetrize(Delta) if config.symmetrize_output else Delta
        final_objective = engine.objective(delta_hat, lam) if config.symmetrize_output else trace[-1]
        elapsed = time.perf_counter() - start_time

        if converged:
            self.logger.info(
                f"FISTA 收敛: λ={lam:.6g}, 迭代 {iterations} 次, F={final_objective:.10g}, 耗时 {elapsed:.3f}s"
            )
        else:
            self.logger.warning(
                f"FISTA 未收敛: λ={lam:.6g}, 已达到最大迭代次数 {config.max_iter}, F={final_objective:.10g}"
            )

        return SolverResult(
            delta_hat=delta_hat,
            iterations=iterations,
            objective=final_objective,
            objective_trace=trace,
            converged=converged,
            lipschitz_used=L,
            lambda_=lam,
            loss_kind=engine.kind.value,
            solver=self.name,
            elapsed_seconds=elapsed,
            prox_residual=residual,
        )


def fista_solve(engine: GradientEngine, config: SolverConfig, Delta0=None) -> SolverResult:
    """函数式接口：用给定配置对单个 λ 运行 FISTA"""
    return FistaSolver(engine, config).solve(Delta0)


__all__ = ["momentum_next", "FistaSolver", "fista_solve"]
