"""
损失函数模块
-----------
差分网络 Δ = Σ₂⁻¹ - Σ₁⁻¹ 的两类 D-trace 型二次损失：

- 非对称损失  L₁(Δ) = ½·tr(ΔᵀS₁ΔS₂) - tr(Δ(S₁-S₂))
- 对称损失    L₂(Δ) = ¼·tr(ΔᵀS₁ΔS₂) + ¼·tr(ΔᵀS₂ΔS₁) - tr(Δ(S₁-S₂))

GradientEngine 负责损失值、梯度与梯度的 Lipschitz 常数，支持两种计算模式：
- dense:   直接使用 p×p 协方差矩阵，单次梯度 O(p³)
- lowrank: 使用中心化后的 n×p 数据矩阵，
           S₁ΔS₂ = Xᵀ(XΔYᵀ)Y / (n₁n₂)，单次梯度 O(np²)

使用方式（示例）：
    engine = GradientEngine.from_data(x, y, kind=LossKind.SYMMETRIC)
    value = engine.loss_value(delta)
    grad = engine.gradient(delta)
    L = engine.lipschitz_constant()
"""

from __future__ import annotations

import logging
import threading
from enum import Enum
from typing import Dict, Optional

import numpy as np

from utils.errors import DegenerateDataError, InvalidArgumentError, ShapeError
from utils.matrix_ops import (
    DEFAULT_POWER_MAX_ITER,
    DEFAULT_POWER_TOL,
    as_matrix,
    center_columns,
    check_symmetric,
    lambda_max_power,
    matmul,
    matmul_nt,
    matmul_tn,
    mirror_upper,
    norms,
    require_square,
    sample_covariance,
)

logger = logging.getLogger("log_total.solver")

DEFAULT_LIPSCHITZ_INFLATION = 1e-6  # Lipschitz 估计放大系数，防止低估导致 FISTA 发散


class LossKind(str, Enum):
    """损失函数类型"""
    ASYMMETRIC = "asym"
    SYMMETRIC = "sym"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().strip())
        except ValueError:
            raise InvalidArgumentError(
                f"不支持的损失类型: '{value}'，可选: {', '.join(k.value for k in cls)}"
            ) from None


class EngineMode(str, Enum):
    """梯度计算模式"""
    DENSE = "dense"
    LOWRANK = "lowrank"


def resolve_mode(mode: str, n1: int, n2: int, p: int) -> EngineMode:
    """
    解析计算模式；auto 时在 n₁+n₂ < p 选择 lowrank（两种模式的浮点运算量在 n≈p 附近交叉）
    """
    mode = str(mode).lower().strip()
    if mode == "auto":
        return EngineMode.LOWRANK if n1 + n2 < p else EngineMode.DENSE
    try:
        return EngineMode(mode)
    except ValueError:
        raise InvalidArgumentError(f"不支持的计算模式: '{mode}'，可选: auto, dense, lowrank") from None


def _largest_eigenvalue(S: np.ndarray, tol: float, max_iter: int) -> float:
    """
    两个确定性起点（全 1 与正负交替）各做一次幂迭代，取较大者。
    全 1 向量恰为非最大特征向量时（如 [[1,-ρ],[-ρ,1]]），交替起点可以补救。
    """
    p = S.shape[0]
    starts = [None]
    if p > 1:
        starts.append(np.where(np.arange(p) % 2 == 0, 1.0, -1.0))

    best = 0.0
    for start in starts:
        result = lambda_max_power(S, tol=tol, max_iter=max_iter, start=start)
        if not result.converged:
            logger.warning(f"幂迭代在 {result.iterations} 次内未收敛，使用当前估计 {result.value:.6g}")
        best = max(best, result.value)
    return best


class GradientEngine:
    """
    损失值 / 梯度 / Lipschitz 常数计算引擎

    构造后不可变，唯一的可变状态是延迟计算并缓存的 Lipschitz 常数（加锁，只计算一次）。
    请使用 from_covariances() 或 from_data() 构造。
    """

    def __init__(
        self,
        kind: LossKind,
        mode: EngineMode,
        S1: np.ndarray,
        S2: np.ndarray,
        X: Optional[np.ndarray] = None,
        Y: Optional[np.ndarray] = None,
        n_threads: int = 1,
        power_tol: float = DEFAULT_POWER_TOL,
        power_max_iter: int = DEFAULT_POWER_MAX_ITER,
        lipschitz_inflation: float = DEFAULT_LIPSCHITZ_INFLATION,
    ):
        self.kind = LossKind.parse(kind)
        self.mode = EngineMode(mode)
        self.S1 = S1
        self.S2 = S2
        self.X = X
        self.Y = Y
        self.p = S1.shape[0]
        self.n_threads = max(1, int(n_threads))
        self.power_tol = float(power_tol)
        self.power_max_iter = int(power_max_iter)
        self.lipschitz_inflation = float(lipschitz_inflation)

        self.diff = mirror_upper(S1 - S2)
        self._lipschitz: Optional[float] = None
        self._lipschitz_lock = threading.Lock()

        if self.mode is EngineMode.LOWRANK:
            if X is None or Y is None:
                raise InvalidArgumentError("lowrank 模式需要中心化后的数据矩阵 X 与 Y")
            self._scale = 1.0 / (X.shape[0] * Y.shape[0])

    # ==================== 构造 ====================

    @classmethod
    def from_covariances(cls, S1, S2, kind=LossKind.SYMMETRIC, **kwargs) -> "GradientEngine":
        """由两个 p×p 样本协方差矩阵构造 dense 模式引擎"""
        S1 = as_matrix(S1, "S1")
        S2 = as_matrix(S2, "S2")
        p1 = require_square(S1, "S1")
        p2 = require_square(S2, "S2")
        if p1 != p2:
            raise ShapeError(f"S1 与 S2 维数不一致: {p1} vs {p2}")
        check_symmetric(S1, "S1")
        check_symmetric(S2, "S2")
        return cls(kind, EngineMode.DENSE, S1, S2, **kwargs)

    @classmethod
    def from_data(
        cls,
        X,
        Y,
        kind=LossKind.SYMMETRIC,
        mode: str = "auto",
        center: bool = True,
        **kwargs,
    ) -> "GradientEngine":
        """
        由两组观测数据构造引擎

        参数:
            X: n₁×p 第一组数据
            Y: n₂×p 第二组数据
            kind: 损失类型
            mode: auto / dense / lowrank
            center: 是否中心化（lowrank 公式要求中心化数据）
        """
        X = as_matrix(X, "X")
        Y = as_matrix(Y, "Y")
        if X.shape[1] != Y.shape[1]:
            raise ShapeError(f"X 与 Y 的变量数不一致: {X.shape[1]} vs {Y.shape[1]}")

        Xc = center_columns(X) if center else X
        Yc = center_columns(Y) if center else Y
        S1 = sample_covariance(Xc, center=False)
        S2 = sample_covariance(Yc, center=False)

        resolved = resolve_mode(mode, Xc.shape[0], Yc.shape[0], Xc.shape[1])
        logger.debug(
            f"构造梯度引擎: kind={LossKind.parse(kind).value}, mode={resolved.value}, "
            f"n1={Xc.shape[0]}, n2={Yc.shape[0]}, p={Xc.shape[1]}"
        )
        if resolved is EngineMode.LOWRANK:
            return cls(kind, resolved, S1, S2, X=Xc, Y=Yc, **kwargs)
        return cls(kind, resolved, S1, S2, **kwargs)

    # ==================== 内部工具 ====================

    def _check_delta(self, Delta) -> np.ndarray:
        Delta = as_matrix(Delta, "Delta")
        if Delta.shape != (self.p, self.p):
            raise ShapeError(f"Delta 形状应为 ({self.p}, {self.p})，实际为 {Delta.shape}")
        return Delta

    def _s1_delta_s2(self, Delta: np.ndarray) -> np.ndarray:
        """S₁ΔS₂"""
        if self.mode is EngineMode.LOWRANK:
            inner = matmul_nt(matmul(self.X, Delta, self.n_threads), self.Y)  # XΔYᵀ, n₁×n₂
            return self._scale * matmul(matmul_tn(self.X, inner), self.Y, self.n_threads)
        return matmul(matmul(self.S1, Delta, self.n_threads), self.S2, self.n_threads)

    def _s2_delta_s1(self, Delta: np.ndarray) -> np.ndarray:
        """S₂ΔS₁"""
        if self.mode is EngineMode.LOWRANK:
            inner = matmul_nt(matmul(self.Y, Delta, self.n_threads), self.X)  # YΔXᵀ, n₂×n₁
            return self._scale * matmul(matmul_tn(self.Y, inner), self.X, self.n_threads)
        return matmul(matmul(self.S2, Delta, self.n_threads), self.S1, self.n_threads)

    def _trace_s1s2(self, Delta: np.ndarray) -> float:
        """tr(ΔᵀS₁ΔS₂)"""
        if self.mode is EngineMode.LOWRANK:
            inner = matmul_nt(matmul(self.X, Delta, self.n_threads), self.Y)
            return self._scale * float(np.sum(inner * inner))
        return float(np.sum(Delta * self._s1_delta_s2(Delta)))

    def _trace_s2s1(self, Delta: np.ndarray) -> float:
        """tr(ΔᵀS₂ΔS₁)"""
        if self.mode is EngineMode.LOWRANK:
            inner = matmul_nt(matmul(self.Y, Delta, self.n_threads), self.X)
            return self._scale * float(np.sum(inner * inner))
        return float(np.sum(Delta * self._s2_delta_s1(Delta)))

    # ==================== 对外接口 ====================

    @property
    def lambda_max(self) -> float:
        """max|S₁ - S₂|：使零矩阵为最优解的最小惩罚参数"""
        return norms(self.diff).max_abs

    def loss_value(self, Delta) -> float:
        """损失值 L(Δ)"""
        Delta = self._check_delta(Delta)
        linear = float(np.sum(Delta * self.diff.T))  # tr(Δ(S₁-S₂))
        if self.kind is LossKind.ASYMMETRIC:
            return 0.5 * self._trace_s1s2(Delta) - linear
        return 0.25 * self._trace_s1s2(Delta) + 0.25 * self._trace_s2s1(Delta) - linear

    def gradient(self, Delta) -> np.ndarray:
        """梯度 ∇L(Δ)"""
        Delta = self._check_delta(Delta)
        if self.kind is LossKind.ASYMMETRIC:
            return self._s1_delta_s2(Delta) - self.diff
        G = self._s1_delta_s2(Delta)
        if np.array_equal(Delta, Delta.T):
            # Δ 对称时 S₂ΔS₁ = (S₁ΔS₂)ᵀ，梯度逐位对称
            return 0.5 * (G + G.T) - self.diff
        return 0.5 * G + 0.5 * self._s2_delta_s1(Delta) - self.diff

    def lipschitz_constant(self) -> float:
        """
        梯度的 Lipschitz 常数 λmax(S₁)·λmax(S₂)（两种损失通用）

        对称损失的 Hessian 为 (S₂⊗S₁ + S₁⊗S₂)/2，其谱范数同样不超过该乘积。
        结果乘以 (1 + lipschitz_inflation) 后缓存。
        """
        if self._lipschitz is not None:
            return self._lipschitz

        with self._lipschitz_lock:
            if self._lipschitz is None:
                lam1 = _largest_eigenvalue(self.S1, self.power_tol, self.power_max_iter)
                lam2 = _largest_eigenvalue(self.S2, self.power_tol, self.power_max_iter)
                product = lam1 * lam2
                if not product > 0.0:
                    raise DegenerateDataError(
                        f"协方差矩阵退化（λmax(S1)={lam1:.3e}, λmax(S2)={lam2:.3e}），无法计算 Lipschitz 常数"
                    )
                self._lipschitz = product * (1.0 + self.lipschitz_inflation)
                logger.debug(
                    f"Lipschitz 常数: λmax(S1)={lam1:.6g}, λmax(S2)={lam2:.6g}, L={self._lipschitz:.6g}"
                )
        return self._lipschitz

    def objective(self, Delta, lambda_: float) -> float:
        """目标函数 F(Δ) = L(Δ) + λ‖Δ‖₁"""
        if lambda_ < 0:
            raise InvalidArgumentError(f"惩罚参数 lambda 必须非负，实际为 {lambda_}")
        Delta = self._check_delta(Delta)
        return self.loss_value(Delta) + lambda_ * float(np.sum(np.abs(Delta)))

    def __repr__(self):
        return f"GradientEngine(kind={self.kind.value}, mode={self.mode.value}, p={self.p})"


# ==================== 函数式接口 ====================

def loss_value(engine: GradientEngine, Delta) -> float:
    return engine.loss_value(Delta)


def gradient(engine: GradientEngine, Delta) -> np.ndarray:
    return engine.gradient(Delta)


def lipschitz_constant(engine: GradientEngine) -> float:
    return engine.lipschitz_constant()


def objective(engine: GradientEngine, Delta, lambda_: float) -> float:
    return engine.objective(Delta, lambda_)


def engine_options(main_config: Optional[Dict] = None, **overrides) -> Dict:
    """从 main_config.yaml 的 power_iteration 段整理引擎参数，显式传入的参数优先"""
    section = (main_config or {}).get("power_iteration", {}) or {}
    options = {
        "power_tol": float(section.get("tol", DEFAULT_POWER_TOL)),
        "power_max_iter": int(section.get("max_iter", DEFAULT_POWER_MAX_ITER)),
        "lipschitz_inflation": float(section.get("inflation", DEFAULT_LIPSCHITZ_INFLATION)),
    }
    options.update({k: v for k, v in overrides.items() if v is not None})
    return options


__all__ = [
    "LossKind",
    "EngineMode",
    "resolve_mode",
    "GradientEngine",
    "loss_value",
    "gradient",
    "lipschitz_constant",
    "objective",
    "engine_options",
    "DEFAULT_LIPSCHITZ_INFLATION",
]
