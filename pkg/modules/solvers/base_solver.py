"""
基础求解器抽象类
定义所有求解器必须实现的统一接口，以及共用的配置与结果数据结构
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from modules.loss_module import GradientEngine
from utils.errors import DivergenceError, InvalidArgumentError, ShapeError
from utils.matrix_ops import mirror_upper, soft_threshold


# ==================== 配置与结果 ====================

@dataclass
class SolverConfig:
    """
    FISTA 求解器配置

    属性:
        lambda_: l1 惩罚参数 λ
        max_iter: 最大迭代次数
        rel_tol: 停止条件 |F(Δk) - F(Δk+1)| < rel_tol·(|F(Δk)| + 1)
        symmetrize_output: 是否对最终估计做 (Δ̂ + Δ̂ᵀ)/2（对非对称损失有意义）
        log_every: 每隔多少次迭代输出一次 DEBUG 进度
    """
    lambda_: float = 0.0
    max_iter: int = 10000
    rel_tol: float = 1e-5
    symmetrize_output: bool = False
    log_every: int = 100

    def __post_init__(self):
        if not (self.lambda_ >= 0 and math.isfinite(self.lambda_)):
            raise InvalidArgumentError(f"惩罚参数 lambda 必须为非负有限数，实际为 {self.lambda_}")
        if not self.rel_tol > 0:
            raise InvalidArgumentError(f"rel_tol 必须为正数，实际为 {self.rel_tol}")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter 至少为 1，实际为 {self.max_iter}")

    @classmethod
    def from_config(cls, main_config: Optional[Dict] = None, **overrides) -> "SolverConfig":
        """
        从 main_config.yaml 的 solver.fista 段构造配置；显式传入的参数优先
        """
        section = ((main_config or {}).get("solver", {}) or {}).get("fista", {}) or {}
        values = {
            "max_iter": int(section.get("max_iter", cls.max_iter)),
            "rel_tol": float(section.get("rel_tol", cls.rel_tol)),
            "symmetrize_output": bool(section.get("symmetrize_output", cls.symmetrize_output)),
            "log_every": int(section.get("log_every", cls.log_every)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_lambda(self, lambda_: float):
        return replace(self, lambda_=float(lambda_))


@dataclass
class SolverResult:
    """
    单个 λ 的求解结果

    属性:
        delta_hat: 估计的差分网络 Δ̂（p×p）
        iterations: 实际迭代次数
        objective: F(Δ̂) = L(Δ̂) + λ‖Δ̂‖₁
        objective_trace: 每次迭代后的目标函数值
        converged: 是否满足停止条件
        lipschitz_used: 使用的 Lipschitz 常数（ADMM 不使用，记为 0）
        lambda_: 惩罚参数
        loss_kind: 损失类型（asym / sym）
        solver: 求解器名称
        elapsed_seconds: 求解耗时
        prox_residual: 近端不动点残差 ‖Δ̂ - soft(Δ̂ - ∇L(Δ̂)/L, λ/L)‖_F
    """
    delta_hat: np.ndarray
    iterations: int
    objective: float
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = False
    lipschitz_used: float = 0.0
    lambda_: float = 0.0
    loss_kind: str = "sym"
    solver: str = "fista"
    elapsed_seconds: float = 0.0
    prox_residual: Optional[float] = None

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.delta_hat))

    def summary(self) -> Dict:
        """不含矩阵的摘要，用于日志与 meta.json"""
        return {
            "lambda": self.lambda_,
            "iterations": self.iterations,
            "objective": self.objective,
            "converged": self.converged,
            "lipschitz_used": self.lipschitz_used,
            "nonzeros": self.nonzero_count,
            "elapsed_seconds": self.elapsed_seconds,
        }


# ==================== 共用工具 ====================

def symmetrize(M) -> np.ndarray:
    """(M + Mᵀ)/2，即到对称矩阵集合的 Frobenius 投影；镜像后严格对称"""
    M = np.asarray(M, dtype=np.float64)
    return mirror_upper(0.5 * (M + M.T))


def stop_condition(previous: float, current: float, rel_tol: float) -> bool:
    """|F(Δk) - F(Δk+1)| < rel_tol·(|F(Δk)| + 1)"""
    return abs(previous - current) < rel_tol * (abs(previous) + 1.0)


def prox_residual(engine: GradientEngine, Delta, lambda_: float, lipschitz: float) -> float:
    """近端梯度不动点残差，收敛时应接近 0"""
    Delta = np.asarray(Delta, dtype=np.float64)
    step = Delta - engine.gradient(Delta) / lipschitz
    return float(np.linalg.norm(Delta - soft_threshold(step, lambda_ / lipschitz)))


class BaseSolver(ABC):
    """
    求解器基类，所有具体求解器都必须继承此类

    统一接口设计:
    - solve(): 对单个 λ 求解，可指定初始值（用于正则化路径的热启动）
    - name: 求解器名称
    子类实例可以在同一个引擎上多次调用 solve()，预计算结果（如特征分解）在实例内复用。
    """

    name: str = "base"

    def __init__(self, engine: GradientEngine, config, logger: Optional[logging.Logger] = None):
        """
        初始化求解器

        Args:
            engine: 梯度计算引擎
            config: 求解器配置（SolverConfig 或 AdmmConfig）
            logger: 日志器（可选，默认使用 log_total.solver）
        """
        self.engine = engine
        self.config = config
        self.logger = logger or logging.getLogger("log_total.solver")

    @abstractmethod
    def solve(self, Delta0=None, lambda_: Optional[float] = None) -> SolverResult:
        """
        执行求解

        Args:
            Delta0: 初始值，默认零矩阵
            lambda_: 覆盖配置中的惩罚参数

        Returns:
            SolverResult
        """

    def prepare(self) -> None:
        """求解前的一次性预计算（子类按需重写），多线程并行求解前调用"""
        self.engine.lipschitz_constant()

    def _resolve_config(self, lambda_: Optional[float]):
        if lambda_ is None:
            return self.config
        return self.config.with_lambda(lambda_)

    def _initial_point(self, Delta0) -> np.ndarray:
        p = self.engine.p
        if Delta0 is None:
            return np.zeros((p, p))
        Delta0 = np.array(Delta0, dtype=np.float64)
        if Delta0.shape != (p, p):
            raise ShapeError(f"初始值形状应为 ({p}, {p})，实际为 {Delta0.shape}")
        return Delta0

    @staticmethod
    def _check_finite(value: float, iteration: int, what: str = "目标函数") -> None:
        if not math.isfinite(value):
            raise DivergenceError(
                f"第 {iteration} 次迭代{what}出现非有限值 ({value})，Lipschitz 常数可能偏小", iteration
            )

    @staticmethod
    def _check_finite_matrix(M: np.ndarray, iteration: int) -> None:
        if not np.all(np.isfinite(M)):
            raise DivergenceError(f"第 {iteration} 次迭代的迭代点出现非有限值", iteration)
