"""
正则化路径模块
-------------
在降序的 λ 网格上依次求解，得到差分网络的解路径。

- lambda_grid: 从 λmax 线性递减到 min_ratio·λmax 的网格（默认 50 个点，min_ratio = 0.5）
- solve_path: 从最大 λ 开始、初值为零矩阵；热启动时每个 λ 以上一个解为初值；
              不热启动时各 λ 相互独立，可用线程池并行，结果按网格顺序组装

λmax = max|S₁ - S₂|，对应的估计恰为零矩阵。
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from modules.loss_module import GradientEngine
from modules.solvers import AdmmConfig, BaseSolver, SolverFactory, SolverResult
from utils.errors import DiffNetError, InvalidArgumentError

logger = logging.getLogger("log_total.solver")

DEFAULT_N_LAMBDA = 50
DEFAULT_MIN_RATIO = 0.5


@dataclass
class PathSettings:
    """路径求解设置（来自 main_config.yaml 的 path 段）"""
    n_lambda: int = DEFAULT_N_LAMBDA
    min_ratio: float = DEFAULT_MIN_RATIO
    warm_start: bool = True

    @classmethod
    def from_config(cls, main_config: Optional[Dict] = None, **overrides) -> "PathSettings":
        section = (main_config or {}).get("path", {}) or {}
        values = {
            "n_lambda": int(section.get("n_lambda", cls.n_lambda)),
            "min_ratio": float(section.get("min_ratio", cls.min_ratio)),
            "warm_start": bool(section.get("warm_start", cls.warm_start)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class PathResult:
    """
    解路径

    属性:
        grid: 严格递减的 λ 列表
        solutions: 与 grid 对齐的 SolverResult 列表
        lambda_max: max|S₁ - S₂|
        warm_start: 是否使用了热启动
        elapsed_seconds: 整条路径的求解耗时
    """
    grid: List[float]
    solutions: List[SolverResult]
    lambda_max: float
    warm_start: bool = True
    elapsed_seconds: float = 0.0
    solver: str = "fista"
    extra: Dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.grid) != len(self.solutions):
            raise InvalidArgumentError(
                f"网格长度 {len(self.grid)} 与解的个数 {len(self.solutions)} 不一致"
            )

    @property
    def nonzero_counts(self) -> List[int]:
        return [s.nonzero_count for s in self.solutions]

    @property
    def objectives(self) -> List[float]:
        return [s.objective for s in self.solutions]

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.solutions)

    @property
    def all_converged(self) -> bool:
        return all(s.converged for s in self.solutions)


def lambda_grid(
    S_diff_max: float,
    n_lambda: int = DEFAULT_N_LAMBDA,
    min_ratio: float = DEFAULT_MIN_RATIO,
) -> List[float]:
    """
    线性递减的 λ 网格，从 S_diff_max 到 min_ratio·S_diff_max

    参数:
        S_diff_max: max|S₁ - S₂|（正数）
        n_lambda: 网格点数（≥ 1）
        min_ratio: 最小值与最大值之比，取值 (0, 1]

    返回:
        严格递减的 λ 列表；n_lambda = 1 时为 [S_diff_max]
    """
    if not S_diff_max > 0:
        raise InvalidArgumentError(f"λmax 必须为正数，实际为 {S_diff_max}")
    if n_lambda < 1:
        raise InvalidArgumentError(f"n_lambda 至少为 1，实际为 {n_lambda}")
    if not 0 < min_ratio <= 1:
        raise InvalidArgumentError(f"min_ratio 必须位于 (0, 1]，实际为 {min_ratio}")
    if n_lambda == 1:
        return [float(S_diff_max)]
    if min_ratio == 1:
        raise InvalidArgumentError("min_ratio = 1 时网格无法严格递减，请设置 n_lambda = 1")

    grid = np.linspace(S_diff_max, min_ratio * S_diff_max, n_lambda)
    # 端点取精确值
    grid[0] = S_diff_max
    grid[-1] = min_ratio * S_diff_max
    return [float(v) for v in grid]


def _check_grid(grid: Sequence[float]) -> List[float]:
    grid = [float(v) for v in grid]
    if not grid:
        raise InvalidArgumentError("λ 网格不能为空")
    if any(v < 0 for v in grid):
        raise InvalidArgumentError("λ 网格中存在负值")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentError("λ 网格必须严格递减")
    return grid


def _solve_tagged(solver: BaseSolver, lam: float, Delta0) -> SolverResult:
    """求解单个 λ，出错时在异常上标注 λ"""
    try:
        return solver.solve(Delta0=Delta0, lambda_=lam)
    except DiffNetError as e:
        e.lambda_ = lam
        e.add_note(f"出错的惩罚参数 λ = {lam:.10g}")
        raise


def solve_path(
    engine: GradientEngine,
    grid: Sequence[float],
    config,
    warm_start: bool = True,
    n_threads: int = 1,
    solver: Optional[BaseSolver] = None,
) -> PathResult:
    """
    在 λ 网格上求解整条路径

    参数:
        engine: 梯度计算引擎
        grid: 严格递减的 λ 列表
        config: SolverConfig（FISTA）或 AdmmConfig（ADMM），其中的 lambda_ 被网格值覆盖
        warm_start: 是否以上一个 λ 的解作为下一个 λ 的初值
        n_threads: 不热启动时并行求解的线程数
        solver: 已创建的求解器实例（可选，便于复用 ADMM 的特征分解）

    返回:
        PathResult
    """
    grid = _check_grid(grid)
    if solver is None:
        name = "admm" if isinstance(config, AdmmConfig) else "fista"
        solver = SolverFactory.create_solver(name, engine, config=config)

    start_time = time.perf_counter()
    solver.prepare()
    logger.info(
        f"开始求解路径: solver={solver.name}, {len(grid)} 个 λ ({grid[0]:.6g} → {grid[-1]:.6g}), "
        f"warm_start={warm_start}"
    )

    solutions: List[SolverResult] = []
    if warm_start or n_threads <= 1:
        Delta0 = None
        for idx, lam in enumerate(grid):
            result = _solve_tagged(solver, lam, Delta0)
            solutions.append(result)
            if warm_start:
                Delta0 = result.delta_hat
            logger.info(
                f"  [{idx + 1}/{len(grid)}] λ={lam:.6g}: 迭代 {result.iterations} 次, "
                f"F={result.objective:.8g}, 非零元 {result.nonzero_count}"
            )
    else:
        with ThreadPoolExecutor(max_workers=n_threads, thread_name_prefix="PathWorker") as executor:
            futures = [executor.submit(_solve_tagged, solver, lam, None) for lam in grid]
            solutions = [future.result() for future in futures]
        for idx, (lam, result) in enumerate(zip(grid, solutions)):
            logger.info(
                f"  [{idx + 1}/{len(grid)}] λ={lam:.6g}: 迭代 {result.iterations} 次, "
                f"F={result.objective:.8g}, 非零元 {result.nonzero_count}"
            )

    elapsed = time.perf_counter() - start_time
    logger.info(f"路径求解完成，总迭代 {sum(s.iterations for s in solutions)} 次，耗时 {elapsed:.3f}s")

    return PathResult(
        grid=grid,
        solutions=solutions,
        lambda_max=engine.lambda_max,
        warm_start=warm_start,
        elapsed_seconds=elapsed,
        solver=solver.name,
    )


__all__ = [
    "DEFAULT_N_LAMBDA",
    "DEFAULT_MIN_RATIO",
    "PathSettings",
    "PathResult",
    "lambda_grid",
    "solve_path",
]
