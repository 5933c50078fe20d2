"""
ADMM 求解器（非对称损失）
作为 FISTA 的独立最优值参照与基准对比

增广拉格朗日: L(Δ) + ρ/2‖Δ - A + B‖² + λ‖A‖₁
迭代格式:
    Δᵏ⁺¹ = 解 S₁ΔS₂ + ρΔ = (S₁ - S₂) + ρ(Aᵏ - Bᵏ)
    Aᵏ⁺¹ = soft(Δᵏ⁺¹ + Bᵏ, λ/ρ)
    Bᵏ⁺¹ = Δᵏ⁺¹ - Aᵏ⁺¹ + Bᵏ

Δ 子问题通过两次对称特征分解给出闭式解，特征分解在求解器实例内只计算一次。
对称损失的两步 ADMM 不在此实现。
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

import numpy as np

from modules.loss_module import GradientEngine, LossKind
from utils.errors import EigenSolverError, InvalidArgumentError, ShapeError
from utils.matrix_ops import as_matrix, check_symmetric, require_square, soft_threshold

from .base_solver import BaseSolver, SolverResult, stop_condition

# ==================== 配置 ====================

DEFAULT_JACOBI_TOL = 1e-12
DEFAULT_JACOBI_SWEEPS = 100


@dataclass
class AdmmConfig:
    """
    ADMM 配置

    属性:
        lambda_: l1 惩罚参数
        rho: ADMM 步长 ρ（固定，不做自适应）
        max_iter: 最大迭代次数
        rel_tol: 目标函数变化停止阈值（与 FISTA 相同的判据，作用于 F(Aᵏ)）
        primal_tol: 原始可行性 ‖Δ - A‖_F ≤ primal_tol·(1 + ‖A‖_F)
        max_dimension: 维数上限（该求解器仅用于验证，不用于大规模问题）
        log_every: DEBUG 进度间隔
    """
    lambda_: float = 0.0
    rho: float = 1.0
    max_iter: int = 10000
    rel_tol: float = 1e-5
    primal_tol: float = 1e-3
    max_dimension: int = 200
    log_every: int = 100

    def __post_init__(self):
        if not (self.lambda_ >= 0 and math.isfinite(self.lambda_)):
            raise InvalidArgumentError(f"惩罚参数 lambda 必须为非负有限数，实际为 {self.lambda_}")
        if not self.rho > 0:
            raise InvalidArgumentError(f"ADMM 步长 rho 必须为正数，实际为 {self.rho}")
        if not self.rel_tol > 0:
            raise InvalidArgumentError(f"rel_tol 必须为正数，实际为 {self.rel_tol}")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter 至少为 1，实际为 {self.max_iter}")

    @classmethod
    def from_config(cls, main_config: Optional[Dict] = None, **overrides) -> "AdmmConfig":
        """从 main_config.yaml 的 solver.admm 段构造配置；显式传入的参数优先"""
        section = ((main_config or {}).get("solver", {}) or {}).get("admm", {}) or {}
        values = {
            "rho": float(section.get("rho", cls.rho)),
            "max_iter": int(section.get("max_iter", cls.max_iter)),
            "rel_tol": float(section.get("rel_tol", cls.rel_tol)),
            "primal_tol": float(section.get("primal_tol", cls.primal_tol)),
            "max_dimension": int(section.get("max_dimension", cls.max_dimension)),
            "log_every": int(section.get("log_every", cls.log_every)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_lambda(self, lambda_: float):
        return replace(self, lambda_=float(lambda_))


# ==================== 特征分解 ====================

@dataclass(frozen=True)
class EigenDecomposition:
    """对称矩阵的谱分解 S = V·diag(values)·Vᵀ，特征值降序"""
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def symmetric_eigen(
    S,
    tol: float = DEFAULT_JACOBI_TOL,
    max_sweeps: int = DEFAULT_JACOBI_SWEEPS,
) -> EigenDecomposition:
    """
    循环 Jacobi 旋转求对称矩阵的全部特征值与特征向量

    参数:
        S: 对称矩阵
        tol: 退出时非对角元 Frobenius 质量 ≤ tol·‖S‖_F
        max_sweeps: 最大扫描轮数

    返回:
        EigenDecomposition（特征值降序，特征向量为列）

    异常:
        EigenSolverError: max_sweeps 轮后仍未收敛
    """
    S = as_matrix(S, "S")
    check_symmetric(S, "S")
    n = S.shape[0]

    A = S.copy()
    V = np.eye(n)
    scale = float(np.linalg.norm(S))
    # 小于该值的非对角元不再旋转；全部低于该值时非对角质量 < tol·scale
    skip = tol * scale / max(n, 1)

    sweep = 0
    while True:
        off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
        if off <= tol * scale:
            break
        if sweep >= max_sweeps:
            raise EigenSolverError(
                f"Jacobi 特征分解 {max_sweeps} 轮扫描后未收敛（非对角质量 {off:.3e}）"
            )
        sweep += 1

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q

                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                vec_p = V[:, p].copy()
                vec_q = V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q

    values = np.diag(A).copy()
    order = np.argsort(values)[::-1]
    return EigenDecomposition(values=values[order], vectors=V[:, order], sweeps=sweep)


def solve_sylvester_ridge(
    S1,
    S2,
    C,
    rho: float,
    eig1: Optional[EigenDecomposition] = None,
    eig2: Optional[EigenDecomposition] = None,
) -> np.ndarray:
    """
    求解 S₁ΔS₂ + ρΔ = C

    设 S₁ = U₁D₁U₁ᵀ, S₂ = U₂D₂U₂ᵀ，则
        Δ = U₁·[(U₁ᵀCU₂)ᵢⱼ / (d₁ᵢd₂ⱼ + ρ)]·U₂ᵀ

    参数:
        S1, S2: 对称半正定矩阵
        C: 右端项
        rho: 正的岭参数
        eig1, eig2: 预先计算的特征分解（ADMM 迭代中复用）
    """
    if not rho > 0:
        raise InvalidArgumentError(f"rho 必须为正数，实际为 {rho}")
    C = as_matrix(C, "C")
    if eig1 is None:
        eig1 = symmetric_eigen(S1)
    if eig2 is None:
        eig2 = symmetric_eigen(S2)
    U1, d1 = eig1.vectors, eig1.values
    U2, d2 = eig2.vectors, eig2.values
    if C.shape != (U1.shape[0], U2.shape[0]):
        raise ShapeError(f"右端项形状 {C.shape} 与 S1/S2 维数不一致")

    core = (U1.T @ C @ U2) / (np.outer(d1, d2) + rho)
    return U1 @ core @ U2.T


# ==================== 求解器 ====================

class AdmmSolver(BaseSolver):
    """
    ADMM 求解器（仅非对称损失）

    特征分解在首次 solve() 时计算并缓存，之后同一实例上的所有 λ 复用。
    报告稀疏迭代量 A 作为估计（软阈值给出精确 0）。
    """

    name = "admm"

    def __init__(self, engine: GradientEngine, config: AdmmConfig, logger=None):
        if engine.kind is not LossKind.ASYMMETRIC:
            raise InvalidArgumentError("ADMM 求解器只支持非对称损失 (asym)")
        if engine.p > config.max_dimension:
            raise InvalidArgumentError(
                f"ADMM 仅用于验证，维数 p={engine.p} 超过上限 {config.max_dimension}"
            )
        super().__init__(engine, config, logger or logging.getLogger("log_total.admm"))
        self._eigs: Optional[List[EigenDecomposition]] = None

    def prepare(self) -> None:
        self._eigendecompositions()

    def _eigendecompositions(self) -> List[EigenDecomposition]:
        if self._eigs is None:
            start = time.perf_counter()
            self._eigs = [symmetric_eigen(self.engine.S1), symmetric_eigen(self.engine.S2)]
            self.logger.debug(f"ADMM 特征分解完成，耗时 {time.perf_counter() - start:.3f}s")
        return self._eigs

    def solve(self, Delta0=None, lambda_: Optional[float] = None) -> SolverResult:
        config: AdmmConfig = self._resolve_config(lambda_)
        engine = self.engine
        lam, rho = config.lambda_, config.rho
        start_time = time.perf_counter()

        A = self._initial_point(Delta0)
        # 零矩阵满足最优性条件 0 ∈ -(S₁-S₂) + λ∂‖0‖₁ 时直接返回
        if not np.any(A) and lam >= engine.lambda_max:
            self.logger.info(f"ADMM: λ={lam:.6g} ≥ λmax={engine.lambda_max:.6g}，零矩阵即为最优解")
            return SolverResult(
                delta_hat=A,
                iterations=0,
                objective=engine.objective(A, lam),
                objective_trace=[],
                converged=True,
                lipschitz_used=0.0,
                lambda_=lam,
                loss_kind=engine.kind.value,
                solver=self.name,
                elapsed_seconds=time.perf_counter() - start_time,
            )

        eig1, eig2 = self._eigendecompositions()
        B = np.zeros_like(A)
        F_prev = engine.objective(A, lam)
        self._check_finite(F_prev, 0)

        self.logger.info(f"ADMM 开始: λ={lam:.6g}, ρ={rho:.6g}, p={engine.p}")

        trace = []
        converged = False
        iterations = 0
        for k in range(1, config.max_iter + 1):
            iterations = k
            C = engine.diff + rho * (A - B)
            Delta = solve_sylvester_ridge(engine.S1, engine.S2, C, rho, eig1, eig2)
            self._check_finite_matrix(Delta, k)
            A = soft_threshold(Delta + B, lam / rho)
            B = B + Delta - A

            F = engine.objective(A, lam)
            self._check_finite(F, k)
            trace.append(F)

            primal = float(np.linalg.norm(Delta - A))
            feasible = primal <= config.primal_tol * (1.0 + float(np.linalg.norm(A)))

            if k % config.log_every == 0:
                self.logger.debug(f"ADMM 第 {k} 次迭代: F={F:.10g}, ‖Δ-A‖={primal:.3e}")

            if feasible and stop_condition(F_prev, F, config.rel_tol):
                converged = True
                break
            F_prev = F

        elapsed = time.perf_counter() - start_time
        if converged:
            self.logger.info(f"ADMM 收敛: λ={lam:.6g}, 迭代 {iterations} 次, F={trace[-1]:.10g}, 耗时 {elapsed:.3f}s")
        else:
            self.logger.warning(f"ADMM 未收敛: λ={lam:.6g}, 已达到最大迭代次数 {config.max_iter}")

        return SolverResult(
            delta_hat=A,
            iterations=iterations,
            objective=trace[-1],
            objective_trace=trace,
            converged=converged,
            lipschitz_used=0.0,
            lambda_=lam,
            loss_kind=engine.kind.value,
            solver=self.name,
            elapsed_seconds=elapsed,
        )


def admm_solve(S1, S2, config: AdmmConfig, Delta0=None) -> SolverResult:
    """函数式接口：由两个协方差矩阵直接运行 ADMM（非对称损失）"""
    S1 = as_matrix(S1, "S1")
    S2 = as_matrix(S2, "S2")
    if require_square(S1, "S1") != require_square(S2, "S2"):
        raise ShapeError(f"S1 与 S2 维数不一致: {S1.shape} vs {S2.shape}")
    engine = GradientEngine.from_covariances(S1, S2, kind=LossKind.ASYMMETRIC)
    return AdmmSolver(engine, config).solve(Delta0)


__all__ = [
    "AdmmConfig",
    "EigenDecomposition",
    "symmetric_eigen",
    "solve_sylvester_ridge",
    "AdmmSolver",
    "admm_solve",
]
