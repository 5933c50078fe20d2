"""
基准测试模块
-----------
在仿真数据上对整条正则化路径计时，比较求解器（fista / admm）与梯度计算模式（lowrank / dense）。

计时只包含路径求解本身（含 Lipschitz 常数或特征分解的预计算），不含数据生成与协方差构造。
同一种子、同一配置下迭代次数完全确定，耗时随机器而变。
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from modules.loss_module import EngineMode, GradientEngine, LossKind, engine_options
from modules.path_module import PathSettings, lambda_grid, solve_path
from modules.simulation_module import SimCase, build_design, replicate_seed, simulate_two_sample
from modules.solvers import SolverFactory
from utils.errors import InvalidArgumentError

logger = logging.getLogger("log_total.bench")


@dataclass
class BenchSettings:
    """基准测试设置（main_config.yaml 的 bench / simulation 段，命令行参数优先）"""
    p_list: List[int] = field(default_factory=lambda: [100, 200])
    reps: int = 10
    solvers: List[str] = field(default_factory=lambda: ["fista", "admm"])
    modes: List[str] = field(default_factory=lambda: ["lowrank", "dense"])
    case: str = "sparse"
    loss: str = "asym"
    n1: int = 200
    n2: int = 200
    seed: int = 2019

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidArgumentError(f"重复次数 reps 至少为 1，实际为 {self.reps}")
        if not self.p_list:
            raise InvalidArgumentError("维数列表不能为空")
        SimCase.parse(self.case)
        LossKind.parse(self.loss)
        for name in self.solvers:
            if name not in SolverFactory.get_supported_solvers():
                raise InvalidArgumentError(
                    f"不支持的求解器: '{name}'，可选: {', '.join(SolverFactory.get_supported_solvers())}"
                )
        for mode in self.modes:
            if mode not in (EngineMode.DENSE.value, EngineMode.LOWRANK.value):
                raise InvalidArgumentError(f"基准测试的计算模式只能是 dense / lowrank，实际为 '{mode}'")

    @classmethod
    def from_config(cls, main_config: Optional[Dict] = None, **overrides) -> "BenchSettings":
        main_config = main_config or {}
        bench = main_config.get("bench", {}) or {}
        simulation = main_config.get("simulation", {}) or {}
        values = {
            "p_list": [int(p) for p in bench.get("p", [100, 200])],
            "reps": int(bench.get("reps", 10)),
            "solvers": list(bench.get("solvers", ["fista", "admm"])),
            "modes": list(bench.get("modes", ["lowrank", "dense"])),
            "n1": int(simulation.get("n1", 200)),
            "n2": int(simulation.get("n2", 200)),
            "seed": int(simulation.get("seed", 2019)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _combinations(settings: BenchSettings, p: int, max_dimension: int):
    """(solver, mode) 组合；ADMM 直接使用协方差矩阵，只计一次并记为 dense"""
    for solver in settings.solvers:
        if solver == "admm":
            if LossKind.parse(settings.loss) is not LossKind.ASYMMETRIC:
                logger.warning("ADMM 只支持非对称损失，跳过")
                continue
            if p > max_dimension:
                logger.warning(f"p={p} 超过 ADMM 维数上限 {max_dimension}，跳过")
                continue
            yield solver, EngineMode.DENSE.value
        else:
            for mode in settings.modes:
                yield solver, mode


def run_bench(
    settings: BenchSettings,
    main_config: Optional[Dict] = None,
    path_settings: Optional[PathSettings] = None,
    n_threads: int = 1,
    **solver_overrides,
) -> List[Dict]:
    """
    运行基准测试

    参数:
        settings: 基准测试设置
        main_config: main_config.yaml 内容
        path_settings: 路径设置（λ 个数、min_ratio、热启动）
        n_threads: 矩阵乘法并行线程数
        **solver_overrides: 求解器配置覆盖项（rel_tol、max_iter）

    返回:
        行列表，每行 {solver, mode, p, rep, seconds, iterations_total}
    """
    path_settings = path_settings or PathSettings.from_config(main_config)
    options = engine_options(main_config)
    admm_config = SolverFactory.build_config("admm", main_config, **solver_overrides)

    rows = []
    for p in settings.p_list:
        design = build_design(settings.case, p)
        for rep in range(settings.reps):
            seed = replicate_seed(settings.seed, rep)
            X, Y = simulate_two_sample(design, settings.n1, settings.n2, seed)

            for solver_name, mode in _combinations(settings, p, admm_config.max_dimension):
                engine = GradientEngine.from_data(
                    X, Y, kind=settings.loss, mode=mode, n_threads=n_threads, **options
                )
                grid = lambda_grid(engine.lambda_max, path_settings.n_lambda, path_settings.min_ratio)
                config = SolverFactory.build_config(solver_name, main_config, **solver_overrides)

                start = time.perf_counter()
                result = solve_path(engine, grid, config, warm_start=path_settings.warm_start)
                seconds = time.perf_counter() - start

                rows.append({
                    "solver": solver_name,
                    "mode": mode,
                    "p": p,
                    "rep": rep,
                    "seconds": seconds,
                    "iterations_total": result.total_iterations,
                })
                logger.info(
                    f"bench: solver={solver_name}, mode={mode}, p={p}, rep={rep}, "
                    f"耗时 {seconds:.3f}s, 总迭代 {result.total_iterations}"
                )
    return rows


__all__ = ["BenchSettings", "run_bench"]
