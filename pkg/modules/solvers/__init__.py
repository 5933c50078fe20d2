"""
求解器模块
提供差分网络 l1 惩罚估计的统一求解接口
- FistaSolver: 加速近端梯度，支持对称 / 非对称损失
- AdmmSolver: ADMM 参照求解器，仅非对称损失
"""

from .base_solver import (
    BaseSolver,
    SolverConfig,
    SolverResult,
    prox_residual,
    stop_condition,
    symmetrize,
)
from .fista_solver import FistaSolver, fista_solve, momentum_next
from .admm_solver import (
    AdmmConfig,
    AdmmSolver,
    EigenDecomposition,
    admm_solve,
    solve_sylvester_ridge,
    symmetric_eigen,
)
from .solver_factory import SolverFactory

__all__ = [
    'BaseSolver',
    'SolverConfig',
    'SolverResult',
    'prox_residual',
    'stop_condition',
    'symmetrize',
    'FistaSolver',
    'fista_solve',
    'momentum_next',
    'AdmmConfig',
    'AdmmSolver',
    'EigenDecomposition',
    'admm_solve',
    'solve_sylvester_ridge',
    'symmetric_eigen',
    'SolverFactory',
]
