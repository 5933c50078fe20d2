"""
仿真数据生成模块

两种协方差结构下的差分网络仿真设计：
- 稀疏情形 (sparse): Ω₁ 为三对角矩阵，边界对角元 4/3、内部对角元 5/3、次对角元 +2/3
- 渐近稀疏情形 (asymsparse): Ω₁ = (0.5^|i-j|)
真实差分网络 Δ* 只有三个非零元：Δ*[1,2] = Δ*[2,1] = -1，Δ*[2,2] = 2（下标从 1 开始）。

注意：(0.5^|i-j|) 的精确逆矩阵的次对角元是 -2/3；这里按字面取 +2/3。
两者相差一个交错符号的相似变换，谱相同，同样正定，元素绝对值一致。

随机数：numpy PCG64 生成 (0,1) 均匀数，再用 Box–Muller 变换得到标准正态，
给定种子时结果在不同平台上逐位可复现。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from utils.data_processing import edge_frame
from utils.errors import InvalidArgumentError, NotPositiveDefiniteError, ShapeError
from utils.matrix_ops import as_matrix, cholesky, cholesky_inverse

logger = logging.getLogger("log_total.simulation")

DEFAULT_AR1_RHO = 0.5


class SimCase(str, Enum):
    """仿真设计类型"""
    SPARSE = "sparse"
    ASYMPTOTIC_SPARSE = "asymsparse"

    @classmethod
    def parse(cls, value) -> "SimCase":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().strip())
        except ValueError:
            raise InvalidArgumentError(
                f"不支持的仿真设计: '{value}'，可选: {', '.join(c.value for c in cls)}"
            ) from None


@dataclass
class SimDesign:
    """
    仿真设计

    属性:
        variant: 设计类型
        p: 维数
        omega1: Σ₁⁻¹
        delta_star: 真实差分网络 Δ* = Σ₂⁻¹ - Σ₁⁻¹
        sigma1: Σ₁ = Ω₁⁻¹
        sigma2: Σ₂ = (Ω₁ + Δ*)⁻¹
    """
    variant: SimCase
    p: int
    omega1: np.ndarray
    delta_star: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray

    @property
    def omega2(self) -> np.ndarray:
        return self.omega1 + self.delta_star


@dataclass(frozen=True)
class SupportMetrics:
    """支持集恢复指标"""
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


# ==================== 矩阵构造 ====================

def _require_dimension(p: int) -> int:
    if int(p) != p or p < 2:
        raise InvalidArgumentError(f"维数 p 必须是 ≥ 2 的整数，实际为 {p}")
    return int(p)


def tridiagonal_precision(p: int) -> np.ndarray:
    """稀疏情形的 Ω₁：对角 (4/3, 5/3, …, 5/3, 4/3)，次对角 2/3"""
    p = _require_dimension(p)
    diag = np.full(p, 5.0 / 3.0)
    diag[0] = diag[-1] = 4.0 / 3.0
    off = np.full(p - 1, 2.0 / 3.0)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def ar1_matrix(p: int, rho: float = DEFAULT_AR1_RHO) -> np.ndarray:
    """AR(1) 结构矩阵 M[i,j] = rho^|i-j|"""
    if not abs(rho) < 1:
        raise InvalidArgumentError(f"AR(1) 系数必须满足 |rho| < 1，实际为 {rho}")
    if int(p) != p or p < 1:
        raise InvalidArgumentError(f"维数 p 必须是正整数，实际为 {p}")
    idx = np.arange(int(p))
    lag = np.abs(idx[:, None] - idx[None, :])
    # 0^0 取 1
    return np.where(lag == 0, 1.0, float(rho) ** lag)


def true_delta(p: int) -> np.ndarray:
    """真实差分网络 Δ*"""
    p = _require_dimension(p)
    delta = np.zeros((p, p))
    delta[0, 1] = delta[1, 0] = -1.0
    delta[1, 1] = 2.0
    return delta


def build_design(variant, p: int) -> SimDesign:
    """
    构造仿真设计，Σ₁ 与 Σ₂ 通过 Cholesky 求逆得到

    异常:
        InvalidArgumentError: p < 2 或设计类型未知
        NotPositiveDefiniteError: Ω₁ 或 Ω₁ + Δ* 非正定
    """
    variant = SimCase.parse(variant)
    p = _require_dimension(p)

    omega1 = tridiagonal_precision(p) if variant is SimCase.SPARSE else ar1_matrix(p, DEFAULT_AR1_RHO)
    delta_star = true_delta(p)
    try:
        sigma1 = cholesky_inverse(omega1)
        sigma2 = cholesky_inverse(omega1 + delta_star)
    except NotPositiveDefiniteError as e:
        logger.error(f"仿真设计 {variant.value} (p={p}) 的精度矩阵非正定: {e}")
        raise

    logger.debug(f"构造仿真设计: {variant.value}, p={p}")
    return SimDesign(
        variant=variant,
        p=p,
        omega1=omega1,
        delta_star=delta_star,
        sigma1=sigma1,
        sigma2=sigma2,
    )


# ==================== 采样 ====================

def replicate_seed(base_seed: int, index: int) -> int:
    """第 index 次重复实验的种子：base_seed + index"""
    return int(base_seed) + int(index)


def group_seeds(seed: int) -> Tuple[int, int]:
    """同一次实验中两组数据的种子 (2·seed, 2·seed + 1)，不同 seed 之间互不重叠"""
    return 2 * int(seed), 2 * int(seed) + 1


def standard_normal(size: int, seed: int) -> np.ndarray:
    """PCG64 均匀数经 Box–Muller 变换得到的 size 个标准正态数"""
    if size < 0:
        raise InvalidArgumentError(f"样本个数必须非负，实际为 {size}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    n_pairs = (size + 1) // 2
    # random() 取值 [0, 1)，1 - u 落在 (0, 1]，保证 log 有定义
    u1 = 1.0 - rng.random(n_pairs)
    u2 = rng.random(n_pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * n_pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:size]


def sample_gaussian(sigma, n: int, seed: int) -> np.ndarray:
    """
    从 N(0, Σ) 抽取 n 个独立样本

    参数:
        sigma: 正定协方差矩阵
        n: 样本量（≥ 1）
        seed: 随机种子

    返回:
        n×p 矩阵，每行为 z·Lᵀ，L 为 Σ 的 Cholesky 因子

    异常:
        NotPositiveDefiniteError: Σ 非正定
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"样本量 n 必须是正整数，实际为 {n}")
    factor = cholesky(sigma)
    p = factor.size
    Z = standard_normal(int(n) * p, seed).reshape(int(n), p)
    return Z @ factor.lower.T


def simulate_two_sample(design: SimDesign, n1: int, n2: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """按设计生成两组数据 (X, Y)"""
    seed_x, seed_y = group_seeds(seed)
    X = sample_gaussian(design.sigma1, n1, seed_x)
    Y = sample_gaussian(design.sigma2, n2, seed_y)
    logger.info(f"生成仿真数据: case={design.variant.value}, p={design.p}, n1={n1}, n2={n2}, seed={seed}")
    return X, Y


def design_to_frames(
    design: SimDesign,
    X: np.ndarray,
    Y: np.ndarray,
) -> Dict[str, pd.DataFrame]:
    """
    把仿真结果整理为可直接写出的表格

    返回:
        {"x": n₁×p 数据表, "y": n₂×p 数据表, "truth": Δ* 的上三角边表}，
        数据表列名为 V1..Vp
    """
    names = [f"V{k + 1}" for k in range(design.p)]
    return {
        "x": pd.DataFrame(X, columns=names),
        "y": pd.DataFrame(Y, columns=names),
        "truth": edge_frame(design.delta_star, upper=True),
    }


# ==================== 评价指标 ====================

def support_metrics(delta_hat, delta_star, zero_tol: float = 0.0) -> SupportMetrics:
    """
    支持集恢复指标，在全部 p² 个位置上计数

    参数:
        delta_hat: 估计矩阵
        delta_star: 真实矩阵
        zero_tol: |值| > zero_tol 视为非零

    异常:
        ShapeError: 形状不一致
    """
    delta_hat = as_matrix(delta_hat, "delta_hat")
    delta_star = as_matrix(delta_star, "delta_star")
    if delta_hat.shape != delta_star.shape:
        raise ShapeError(f"形状不一致: {delta_hat.shape} vs {delta_star.shape}")
    if zero_tol < 0:
        raise InvalidArgumentError(f"zero_tol 必须非负，实际为 {zero_tol}")

    est = np.abs(delta_hat) > zero_tol
    truth = np.abs(delta_star) > zero_tol
    tp = int(np.count_nonzero(est & truth))
    fp = int(np.count_nonzero(est & ~truth))
    fn = int(np.count_nonzero(~est & truth))

    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return SupportMetrics(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        precision=precision,
        recall=recall,
        f1=f1,
    )


def best_support_on_path(path_solutions, delta_star, zero_tol: float = 0.0) -> Optional[SupportMetrics]:
    """路径上 F1 最高的支持集指标；路径为空时返回 None"""
    best = None
    for result in path_solutions:
        metrics = support_metrics(result.delta_hat, delta_star, zero_tol)
        if best is None or metrics.f1 > best.f1:
            best = metrics
    return best


__all__ = [
    "SimCase",
    "SimDesign",
    "SupportMetrics",
    "tridiagonal_precision",
    "ar1_matrix",
    "true_delta",
    "build_design",
    "replicate_seed",
    "group_seeds",
    "standard_normal",
    "sample_gaussian",
    "simulate_two_sample",
    "design_to_frames",
    "support_metrics",
    "best_support_on_path",
]
