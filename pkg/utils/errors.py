"""
异常定义模块
所有模块共用的异常类型，命令行入口依据异常类型决定退出码
"""

from typing import Optional


class DiffNetError(Exception):
    """差分网络估计相关异常的基类"""


class InvalidArgumentError(DiffNetError, ValueError):
    """标量参数非法（如负的阈值、t_k < 1、min_ratio 越界）"""


class ShapeError(DiffNetError, ValueError):
    """矩阵维度不匹配"""


class EmptyDataError(DiffNetError, ValueError):
    """数据为空（0 个观测或空文件）"""


class NotPositiveDefiniteError(DiffNetError, ArithmeticError):
    """
    Cholesky 分解遇到非正主元

    属性:
        pivot: 出错主元的位置（从 1 开始计数）
    """

    def __init__(self, message: str, pivot: int):
        super().__init__(message)
        self.pivot = pivot


class DataParseError(DiffNetError, ValueError):
    """
    CSV 解析失败

    属性:
        line: 出错的文件行号（从 1 开始，含表头）
        column: 出错的列号（从 1 开始），整行错误时为 None
    """

    def __init__(self, message: str, line: int, column: Optional[int] = None):
        super().__init__(message)
        self.line = line
        self.column = column


class DegenerateDataError(DiffNetError, ValueError):
    """
    数据退化（常数列、协方差全零）

    属性:
        column: 退化列的名称或序号，整体退化时为 None
    """

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message)
        self.column = column


class DivergenceError(DiffNetError, ArithmeticError):
    """
    迭代过程中目标函数出现非有限值（通常说明 Lipschitz 常数偏小）

    属性:
        iteration: 出现非有限值的迭代序号
        lambda_: 所在的惩罚参数，由正则化路径求解器补充
    """

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration
        self.lambda_: Optional[float] = None


class EigenSolverError(DiffNetError, ArithmeticError):
    """Jacobi 特征分解在最大扫描次数内未收敛"""


__all__ = [
    "DiffNetError",
    "InvalidArgumentError",
    "ShapeError",
    "EmptyDataError",
    "NotPositiveDefiniteError",
    "DataParseError",
    "DegenerateDataError",
    "DivergenceError",
    "EigenSolverError",
]
