"""
求解器工厂
根据名称创建相应的求解器实例
"""

from typing import Dict, Optional
import logging

from modules.loss_module import GradientEngine, LossKind
from utils.errors import InvalidArgumentError

from .admm_solver import AdmmConfig, AdmmSolver
from .base_solver import BaseSolver, SolverConfig
from .fista_solver import FistaSolver


class SolverFactory:
    """
    求解器工厂类
    使用工厂模式创建不同类型的求解器，并按求解器类型整理配置。
    """

    _solver_map: Dict[str, type] = {
        "fista": FistaSolver,
        "admm": AdmmSolver,
    }

    @staticmethod
    def create_solver(
        name: str,
        engine: GradientEngine,
        config=None,
        main_config: Optional[Dict] = None,
        logger: logging.Logger = None,
        **overrides,
    ) -> BaseSolver:
        """
        创建求解器实例

        Args:
            name: 求解器名称，支持：
                - 'fista': 加速近端梯度（两种损失均可，支持 dense / lowrank）
                - 'admm': ADMM 参照求解器（仅非对称损失，p ≤ max_dimension）
            engine: 梯度计算引擎
            config: 已构造好的 SolverConfig / AdmmConfig；为 None 时由 main_config 与 overrides 构造
            main_config: main_config.yaml 内容（可选）
            logger: 日志记录器（可选）
            **overrides: 覆盖配置字段（如 lambda_, rel_tol, max_iter）

        Returns:
            BaseSolver: 求解器实例

        Raises:
            InvalidArgumentError: 名称不支持，或 ADMM 搭配对称损失
        """
        name = str(name).lower().strip()

        if name not in SolverFactory._solver_map:
            error_msg = (
                f"不支持的求解器: '{name}'. "
                f"当前可用的求解器: {', '.join(SolverFactory.get_supported_solvers())}"
            )
            if logger:
                logger.error(error_msg)
            raise InvalidArgumentError(error_msg)

        if name == "admm" and engine.kind is not LossKind.ASYMMETRIC:
            error_msg = "ADMM 求解器只支持非对称损失，请使用 --loss asym 或改用 fista"
            if logger:
                logger.error(error_msg)
            raise InvalidArgumentError(error_msg)

        if config is None:
            config = SolverFactory.build_config(name, main_config, **overrides)

        solver_class = SolverFactory._solver_map[name]
        solver = solver_class(engine=engine, config=config, logger=logger)
        if logger:
            logger.info(f"成功创建求解器: {solver_class.__name__} (名称: {name})")
        return solver

    @staticmethod
    def build_config(name: str, main_config: Optional[Dict] = None, **overrides):
        """按求解器名称构造对应的配置对象，忽略该求解器不认识的覆盖项"""
        name = str(name).lower().strip()
        if name == "admm":
            allowed = {"lambda_", "rho", "max_iter", "rel_tol", "primal_tol", "max_dimension", "log_every"}
            return AdmmConfig.from_config(main_config, **{k: v for k, v in overrides.items() if k in allowed})
        allowed = {"lambda_", "max_iter", "rel_tol", "symmetrize_output", "log_every"}
        return SolverConfig.from_config(main_config, **{k: v for k, v in overrides.items() if k in allowed})

    @classmethod
    def get_supported_solvers(cls) -> list:
        """获取当前可用的求解器列表"""
        return list(cls._solver_map.keys())

    @staticmethod
    def get_all_solvers_info() -> Dict[str, Dict[str, str]]:
        """获取所有求解器的说明"""
        return {
            "fista": {
                "name": "加速近端梯度 (FISTA)",
                "description": "一阶方法，lowrank 模式下单次迭代 O(np²)，适合 p ≫ n",
                "losses": "asym, sym",
            },
            "admm": {
                "name": "交替方向乘子法 (ADMM)",
                "description": "每次迭代求解 Sylvester 型岭方程，O(p³)，作为最优值参照与基准",
                "losses": "asym",
            },
        }
