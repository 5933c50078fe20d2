"""
数据处理工具模块

两组观测数据的读取、写出与预处理，供估计、路径、仿真等命令复用：
- load_csv / write_csv: 数值 CSV 读写（17 位有效数字，可无损往返）
- standardize: 逐列中心化并缩放到单位方差（除数为 n，与样本协方差一致）
- nonparanormal: 基于秩的高斯化变换 Φ⁻¹(r/(n+1))，平均秩处理并列
- split_by_label / preprocess: 单文件加标签列的分组，以及先标准化再高斯化的预处理
- edge_frame / dense_from_edges: 稠密矩阵与 (i, j, value) 边表之间的转换（下标从 1 开始）
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import ndtri
from scipy.stats import rankdata

from utils.errors import (
    DataParseError,
    DegenerateDataError,
    EmptyDataError,
    InvalidArgumentError,
    ShapeError,
)
from utils.matrix_ops import as_matrix

logger = logging.getLogger("log_total.data")

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"  # 17 位有效数字
CONSTANT_COLUMN_RTOL = 1e-12  # 标准差低于 rtol·max(1, |均值|) 视为常数列


# ==================== 数据结构 ====================

@dataclass
class TwoSampleData:
    """
    两组观测数据

    属性:
        x: 第一组 n₁×p 数据
        y: 第二组 n₂×p 数据
        variable_names: 变量名（可选，长度为 p）
    """
    x: np.ndarray
    y: np.ndarray
    variable_names: Optional[List[str]] = None

    def __post_init__(self):
        self.x = as_matrix(self.x, "x")
        self.y = as_matrix(self.y, "y")
        if self.x.shape[1] != self.y.shape[1]:
            raise ShapeError(f"两组数据列数不一致: {self.x.shape[1]} vs {self.y.shape[1]}")
        for name, M in (("x", self.x), ("y", self.y)):
            if M.shape[0] < 2:
                raise EmptyDataError(f"{name} 至少需要 2 个观测，实际为 {M.shape[0]}")
        if self.variable_names is not None and len(self.variable_names) != self.p:
            raise ShapeError(f"变量名个数 {len(self.variable_names)} 与列数 {self.p} 不一致")

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n1(self) -> int:
        return self.x.shape[0]

    @property
    def n2(self) -> int:
        return self.y.shape[0]


# ==================== CSV 读写 ====================

def _parse_frame(raw: pd.DataFrame, first_line: int) -> np.ndarray:
    """把字符串 DataFrame 转成浮点矩阵，非数值单元格报告行号与列号"""
    values = np.empty(raw.shape, dtype=np.float64)
    for row_idx, row in enumerate(raw.itertuples(index=False, name=None)):
        line = first_line + row_idx
        for col_idx, cell in enumerate(row):
            text = str(cell).strip()
            try:
                value = float(text)
            except ValueError:
                raise DataParseError(
                    f"第 {line} 行第 {col_idx + 1} 列不是数值: '{text}'", line=line, column=col_idx + 1
                ) from None
            if not np.isfinite(value):
                raise DataParseError(
                    f"第 {line} 行第 {col_idx + 1} 列不是有限数值: '{text}'", line=line, column=col_idx + 1
                )
            values[row_idx, col_idx] = value
    return values


def _read_raw(path: Path, has_header: bool, delimiter: str) -> pd.DataFrame:
    """按字符串读取 CSV，先检查空文件与不规则行"""
    lines = path.read_text(encoding="utf-8").splitlines()
    # 末尾空行不算数据
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise EmptyDataError(f"文件为空: {path}")

    # 按 CSV 规则计数，引号内的分隔符不算列边界
    widths = [len(row) for row in csv.reader(lines, delimiter=delimiter)]
    expected = widths[0]
    for idx, width in enumerate(widths):
        if width != expected:
            raise DataParseError(
                f"{path.name} 第 {idx + 1} 行有 {width} 列，期望 {expected} 列（不规则行）", line=idx + 1
            )

    raw = pd.read_csv(
        path,
        sep=delimiter,
        header=0 if has_header else None,
        dtype=str,
        keep_default_na=False,
        skip_blank_lines=False,
        nrows=len(lines) - (1 if has_header else 0),
        encoding="utf-8",
    )
    if raw.shape[0] == 0:
        raise EmptyDataError(f"文件没有数据行: {path}")
    if has_header:
        raw.columns = [str(c).strip() for c in raw.columns]
    return raw


def load_csv(
    path: PathLike,
    has_header: bool = True,
    delimiter: str = ",",
) -> Tuple[np.ndarray, Optional[List[str]]]:
    """
    读取数值 CSV（行为观测，列为变量）

    参数:
        path: 文件路径（UTF-8）
        has_header: 首行是否为变量名
        delimiter: 分隔符，默认逗号

    返回:
        (矩阵, 变量名或 None)

    异常:
        EmptyDataError: 文件为空或没有数据行
        DataParseError: 不规则行（带行号）或非数值单元格（带行号与列号）
    """
    path = Path(path)
    raw = _read_raw(path, has_header, delimiter)
    names = list(raw.columns) if has_header else None
    values = _parse_frame(raw, first_line=2 if has_header else 1)
    logger.debug(f"读取 {path}: {values.shape[0]} 行 × {values.shape[1]} 列")
    return values, names


def write_csv(M, path: PathLike, names: Optional[List[str]] = None) -> Path:
    """
    以 17 位有效数字写出矩阵，load_csv 读回后数值完全一致

    参数:
        M: 二维数组
        path: 输出路径
        names: 列名（可选，给出时写表头）
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if names is not None and len(names) != M.shape[1]:
        raise ShapeError(f"列名个数 {len(names)} 与列数 {M.shape[1]} 不一致")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(M, columns=names)
    frame.to_csv(path, index=False, header=names is not None, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


# ==================== 边表 ====================

def edge_frame(M, upper: Optional[bool] = None) -> pd.DataFrame:
    """
    稠密矩阵转 (i, j, value) 边表，下标从 1 开始，只保留非零元

    参数:
        M: p×p 矩阵
        upper: 是否只取上三角；None 时矩阵严格对称则取上三角
    """
    M = np.asarray(M, dtype=np.float64)
    if upper is None:
        upper = M.shape[0] == M.shape[1] and np.array_equal(M, M.T)
    mask = M != 0
    if upper:
        mask &= np.triu(np.ones(M.shape, dtype=bool))
    rows, cols = np.nonzero(mask)
    return pd.DataFrame({"i": rows + 1, "j": cols + 1, "value": M[rows, cols]})


def dense_from_edges(edges: pd.DataFrame, p: int, symmetric: bool = False) -> np.ndarray:
    """边表还原为 p×p 稠密矩阵；symmetric 为 True 时同时填写镜像位置"""
    M = np.zeros((p, p))
    i = edges["i"].to_numpy(dtype=int) - 1
    j = edges["j"].to_numpy(dtype=int) - 1
    v = edges["value"].to_numpy(dtype=np.float64)
    M[i, j] = v
    if symmetric:
        M[j, i] = v
    return M


def write_edges(M, path: PathLike, upper: Optional[bool] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    edge_frame(M, upper).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


# ==================== 预处理 ====================

def _column_label(names: Optional[List[str]], col: int) -> str:
    return names[col] if names else f"第 {col + 1} 列"


def standardize(X, names: Optional[List[str]] = None) -> np.ndarray:
    """
    逐列标准化为均值 0、方差 1（除数 n）

    异常:
        DegenerateDataError: 常数列，column 为列名或列号
    """
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise EmptyDataError(f"标准化至少需要 2 个观测，实际为 {X.shape[0]}")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    for col in range(X.shape[1]):
        if std[col] <= CONSTANT_COLUMN_RTOL * max(1.0, abs(mean[col])):
            label = _column_label(names, col)
            raise DegenerateDataError(f"{label} 为常数列，无法标准化", column=label)
    return (X - mean) / std


def nonparanormal(X, rescale: bool = True, names: Optional[List[str]] = None) -> np.ndarray:
    """
    非参数正态（nonparanormal）变换

    每列替换为 Φ⁻¹(r/(n+1))，r 为列内平均秩；rescale 时再缩放到单位方差（除数 n）。
    结果只依赖列内秩，对严格单调变换不变。

    异常:
        DegenerateDataError: 常数列
    """
    X = as_matrix(X, "X")
    n = X.shape[0]
    if n < 2:
        raise EmptyDataError(f"nonparanormal 变换至少需要 2 个观测，实际为 {n}")

    Z = np.empty_like(X)
    for col in range(X.shape[1]):
        column = X[:, col]
        if np.all(column == column[0]):
            label = _column_label(names, col)
            raise DegenerateDataError(f"{label} 为常数列，无法做秩变换", column=label)
        ranks = rankdata(column, method="average")
        Z[:, col] = ndtri(ranks / (n + 1.0))

    if rescale:
        Z = Z - Z.mean(axis=0)
        Z = Z / Z.std(axis=0)
    return Z


def split_by_label(
    frame: pd.DataFrame,
    label_column: str,
) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    按二值标签列拆分单个数据表，首次出现的标签为第一组

    返回:
        (x, y, 变量名)
    """
    if label_column not in frame.columns:
        raise InvalidArgumentError(f"找不到标签列 '{label_column}'，可用列: {list(frame.columns)}")
    labels = frame[label_column].astype(str).str.strip()
    levels = list(dict.fromkeys(labels))
    if len(levels) != 2:
        raise DegenerateDataError(
            f"标签列 '{label_column}' 必须恰好有 2 个取值，实际为 {levels}", column=label_column
        )

    body = frame.drop(columns=[label_column])
    names = [str(c) for c in body.columns]
    values = body.to_numpy(dtype=np.float64)
    first = (labels == levels[0]).to_numpy()
    logger.info(f"按标签列 '{label_column}' 分组: {levels[0]} → 第一组 ({first.sum()} 行), "
                f"{levels[1]} → 第二组 ({(~first).sum()} 行)")
    return values[first], values[~first], names


def load_labeled_csv(path: PathLike, label_column: str, delimiter: str = ",") -> TwoSampleData:
    """读取带表头和标签列的单个 CSV，并按标签拆分为两组（标签可以是非数值）"""
    raw = _read_raw(Path(path), has_header=True, delimiter=delimiter)
    if label_column not in raw.columns:
        raise InvalidArgumentError(f"找不到标签列 '{label_column}'，可用列: {list(raw.columns)}")
    body_cols = [c for c in raw.columns if c != label_column]
    frame = pd.DataFrame(_parse_frame(raw[body_cols], first_line=2), columns=body_cols)
    frame[label_column] = raw[label_column].to_numpy()
    x, y, var_names = split_by_label(frame, label_column)
    return TwoSampleData(x=x, y=y, variable_names=var_names)


def preprocess(data: TwoSampleData, standardize_data: bool = False, npn: bool = False) -> TwoSampleData:
    """逐组预处理：先标准化，再做 nonparanormal 变换"""
    x, y = data.x, data.y
    names = data.variable_names
    if standardize_data:
        x, y = standardize(x, names), standardize(y, names)
    if npn:
        x, y = nonparanormal(x, names=names), nonparanormal(y, names=names)
    if standardize_data or npn:
        logger.info(f"预处理完成: standardize={standardize_data}, npn={npn}, p={data.p}")
    return TwoSampleData(x=x, y=y, variable_names=names)


__all__ = [
    "TwoSampleData",
    "load_csv",
    "write_csv",
    "edge_frame",
    "dense_from_edges",
    "write_edges",
    "standardize",
    "nonparanormal",
    "split_by_label",
    "load_labeled_csv",
    "preprocess",
]
