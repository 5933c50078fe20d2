"""
矩阵运算工具模块

提供稠密线性代数内核与逐元素算子，供损失函数、求解器、模拟数据生成等模块复用：
- 软阈值算子（l1 范数的近端算子）
- 矩阵乘法（含 AᵀB / ABᵀ 变体，可按行分块并行）
- 范数（Frobenius / l1 / 最大绝对值）
- 样本协方差（除数为 n，按上三角镜像保证严格对称）
- 幂迭代求最大特征值
- Cholesky 分解、求解与求逆

约定:
    观测为行、变量为列；所有矩阵均为二维 float64 numpy 数组，元素必须有限。
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from utils.errors import (
    EmptyDataError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    ShapeError,
)

# ==================== 常量 ====================

SYMMETRY_ATOL = 1e-10  # 对称性检查的绝对容差
PIVOT_MIN = 1e-12  # Cholesky 主元下限
DEFAULT_POWER_TOL = 1e-8
DEFAULT_POWER_MAX_ITER = 1000


# ==================== 基础校验 ====================

def as_matrix(M, name: str = "M") -> np.ndarray:
    """
    将输入转换为二维 float64 矩阵并校验不变量（行列数 ≥ 1，元素有限）

    参数:
        M: 任意可转换为数组的对象
        name: 用于错误信息的矩阵名称

    返回:
        np.ndarray: 二维 float64 数组
    """
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} 必须是二维矩阵，实际维数为 {arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} 的行数与列数必须至少为 1，实际形状为 {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} 含有 NaN 或 Inf")
    return arr


def require_square(M: np.ndarray, name: str = "M") -> int:
    """校验方阵并返回维数"""
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} 必须是方阵，实际形状为 {M.shape}")
    return M.shape[0]


def max_asymmetry(S: np.ndarray) -> float:
    """返回 max|S[i,j] - S[j,i]|"""
    return float(np.max(np.abs(S - S.T)))


def check_symmetric(S: np.ndarray, name: str = "S", atol: float = SYMMETRY_ATOL) -> None:
    """对称性检查，失败时抛出 InvalidArgumentError"""
    require_square(S, name)
    gap = max_asymmetry(S)
    if gap > atol:
        raise InvalidArgumentError(f"{name} 不对称：最大镜像差 {gap:.3e} 超过容差 {atol:.0e}")


def mirror_upper(S: np.ndarray) -> np.ndarray:
    """用上三角覆盖下三角，得到严格对称的矩阵"""
    return np.triu(S) + np.triu(S, 1).T


# ==================== 逐元素算子 ====================

def soft_threshold(M, tau: float) -> np.ndarray:
    """
    逐元素软阈值: sign(M)·max(|M| - tau, 0)

    参数:
        M: 输入矩阵
        tau: 非负阈值

    返回:
        与 M 同形状的矩阵，被截断的位置为精确的 0.0
    """
    if tau < 0 or not np.isfinite(tau):
        raise InvalidArgumentError(f"软阈值参数 tau 必须为非负有限数，实际为 {tau}")
    M = as_matrix(M, "M")
    # + 0.0 把 -0.0 规范为 0.0
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0) + 0.0


class MatrixNorms(NamedTuple):
    frobenius: float
    l1: float
    max_abs: float


def norms(M) -> MatrixNorms:
    """计算 Frobenius 范数、元素绝对值之和与最大绝对值"""
    M = as_matrix(M, "M")
    absM = np.abs(M)
    return MatrixNorms(
        frobenius=float(np.sqrt(np.sum(M * M))),
        l1=float(np.sum(absM)),
        max_abs=float(np.max(absM)),
    )


# ==================== 矩阵乘法 ====================

def matmul(A, B, n_threads: int = 1) -> np.ndarray:
    """
    矩阵乘法 A·B

    n_threads > 1 时按 A 的行分块并行计算，结果与单线程仅差浮点重结合误差。
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"矩阵乘法维度不匹配: {A.shape} · {B.shape}")

    if n_threads <= 1 or A.shape[0] < 2 * n_threads:
        return A @ B

    blocks = np.array_split(np.arange(A.shape[0]), n_threads)
    with ThreadPoolExecutor(max_workers=n_threads, thread_name_prefix="Matmul") as executor:
        parts = list(executor.map(lambda rows: A[rows] @ B, blocks))
    return np.vstack(parts)


def matmul_tn(A, B, n_threads: int = 1) -> np.ndarray:
    """AᵀB"""
    A = as_matrix(A, "A")
    return matmul(A.T, B, n_threads)


def matmul_nt(A, B, n_threads: int = 1) -> np.ndarray:
    """ABᵀ"""
    B = as_matrix(B, "B")
    return matmul(A, B.T, n_threads)


# ==================== 协方差 ====================

def center_columns(X) -> np.ndarray:
    """减去列均值"""
    X = as_matrix(X, "X")
    return X - X.mean(axis=0, keepdims=True)


def sample_covariance(X, center: bool = True) -> np.ndarray:
    """
    样本协方差 S = (1/n)·X̃ᵀX̃

    参数:
        X: n×p 数据矩阵（行为观测）
        center: 是否先减去列均值

    返回:
        p×p 对称半正定矩阵（除数为 n，上三角镜像保证镜像元素严格相等）
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataError("样本协方差需要至少 1 个观测")
    X = as_matrix(X, "X")
    Xc = center_columns(X) if center else X
    n = Xc.shape[0]
    S = (Xc.T @ Xc) / n
    return mirror_upper(S)


# ==================== 幂迭代 ====================

@dataclass(frozen=True)
class PowerIterationResult:
    """幂迭代结果：最大特征值估计、迭代次数、是否收敛"""
    value: float
    iterations: int
    converged: bool


def lambda_max_power(
    S,
    tol: float = DEFAULT_POWER_TOL,
    max_iter: int = DEFAULT_POWER_MAX_ITER,
    start: Optional[np.ndarray] = None,
) -> PowerIterationResult:
    """
    幂迭代估计对称半正定矩阵的最大特征值（Rayleigh 商）

    参数:
        S: 对称矩阵
        tol: 相邻两次 Rayleigh 商的相对变化阈值
        max_iter: 最大迭代次数
        start: 起始向量，默认为归一化的全 1 向量

    返回:
        PowerIterationResult；未收敛时返回当前最优估计且 converged=False
    """
    S = as_matrix(S, "S")
    check_symmetric(S, "S")
    p = S.shape[0]

    v = np.ones(p) if start is None else np.asarray(start, dtype=np.float64).ravel()
    if v.shape[0] != p:
        raise ShapeError(f"起始向量长度 {v.shape[0]} 与矩阵维数 {p} 不一致")
    v = v / np.linalg.norm(v)

    if not np.any(S):
        return PowerIterationResult(value=0.0, iterations=0, converged=True)

    estimate = -np.inf
    restarted = False
    for it in range(1, max_iter + 1):
        w = S @ v
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            # 起始向量落在零空间，换用对角线最大的坐标轴重新开始
            if restarted:
                return PowerIterationResult(value=0.0, iterations=it, converged=False)
            v = np.zeros(p)
            v[int(np.argmax(np.diag(S)))] = 1.0
            restarted = True
            continue

        rayleigh = float(v @ w)
        if abs(rayleigh - estimate) <= tol * max(abs(rayleigh), np.finfo(float).tiny):
            return PowerIterationResult(value=rayleigh, iterations=it, converged=True)
        estimate = rayleigh
        v = w / w_norm

    return PowerIterationResult(value=estimate, iterations=max_iter, converged=False)


# ==================== Cholesky ====================

@dataclass(frozen=True)
class CholeskyFactor:
    """下三角 Cholesky 因子 L，满足 L·Lᵀ = S"""
    lower: np.ndarray
    size: int

    def solve(self, B) -> np.ndarray:
        """求解 S·X = B"""
        B = np.asarray(B, dtype=np.float64)
        if B.shape[0] != self.size:
            raise ShapeError(f"右端项行数 {B.shape[0]} 与因子维数 {self.size} 不一致")
        return cho_solve((self.lower, True), B)

    def inverse(self) -> np.ndarray:
        """S⁻¹（镜像后严格对称）"""
        return mirror_upper(self.solve(np.eye(self.size)))


def cholesky(S) -> CholeskyFactor:
    """
    Cholesky 分解（LAPACK dpotrf）

    异常:
        NotPositiveDefiniteError: 主元 ≤ 1e-12，pivot 为出错位置（从 1 开始）
    """
    S = as_matrix(S, "S")
    check_symmetric(S, "S")
    p = S.shape[0]

    lower, info = dpotrf(S, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(f"矩阵非正定：第 {info} 个主元非正", pivot=int(info))
    if info < 0:
        raise InvalidArgumentError(f"dpotrf 第 {-info} 个参数非法")

    diag = np.diag(lower)
    small = np.flatnonzero(diag <= PIVOT_MIN)
    if small.size:
        pivot = int(small[0]) + 1
        raise NotPositiveDefiniteError(
            f"矩阵非正定：第 {pivot} 个主元 {diag[small[0]]:.3e} ≤ {PIVOT_MIN:.0e}", pivot=pivot
        )
    return CholeskyFactor(lower=np.tril(lower), size=p)


def cholesky_inverse(S) -> np.ndarray:
    """通过 Cholesky 分解求对称正定矩阵的逆"""
    return cholesky(S).inverse()


__all__ = [
    "as_matrix",
    "require_square",
    "check_symmetric",
    "max_asymmetry",
    "mirror_upper",
    "soft_threshold",
    "MatrixNorms",
    "norms",
    "matmul",
    "matmul_tn",
    "matmul_nt",
    "center_columns",
    "sample_covariance",
    "PowerIterationResult",
    "lambda_max_power",
    "CholeskyFactor",
    "cholesky",
    "cholesky_inverse",
]
