"""
结果读写模块

本模块负责把估计、路径、仿真与基准测试的结果写入输出目录。

主要功能：
1. RunMetadata: 每条命令的运行元数据，写成 meta.json（数值必须有限，JSON 无损）
2. ResultWriter: 按固定文件名写出 delta.csv / edges.csv / path.csv / x.csv / y.csv / truth.csv / bench.csv
3. file_checksum: 输入输出文件的 sha256 校验和

数值一律以 17 位有效数字写出，读回后逐位一致。
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from utils.data_processing import FLOAT_FORMAT, edge_frame, write_csv, write_edges
from utils.errors import InvalidArgumentError

PathLike = Union[str, Path]

CHECKSUM_CHUNK = 1 << 20

PATH_COLUMNS = ["lambda", "i", "j", "value"]
BENCH_COLUMNS = ["solver", "mode", "p", "rep", "seconds", "iterations_total"]


def file_checksum(path: PathLike) -> str:
    """文件内容的 sha256 十六进制摘要"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(CHECKSUM_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _check_finite(value: Any, key: str) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _check_finite(v, f"{key}.{k}")
    elif isinstance(value, (list, tuple)):
        for idx, v in enumerate(value):
            _check_finite(v, f"{key}[{idx}]")
    elif isinstance(value, float) and not math.isfinite(value):
        raise InvalidArgumentError(f"元数据字段 {key} 不是有限数值: {value}")


def _to_builtin(value: Any) -> Any:
    """numpy 标量 / 数组转为 JSON 可序列化的内置类型"""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class RunMetadata:
    """
    运行元数据（meta.json）

    属性:
        command: 子命令名称（estimate / path / simulate / bench）
        loss_kind: 损失类型（asym / sym），不适用时为 None
        solver: 求解器名称（fista / admm），不适用时为 None
        lambda_: 单个 λ（estimate）
        grid: 网格描述（path），含 n_lambda、min_ratio、values
        lambda_max: max|S₁ - S₂|
        iterations: 总迭代次数；path 时另见 per_lambda
        objective: 最终目标函数值
        wall_time_seconds: 求解耗时
        lipschitz_used: FISTA 使用的步长常数（ADMM 为 0）
        converged: 是否收敛（path 时为所有 λ 均收敛）
        seed: 随机种子（simulate / bench）
        input_checksums: {文件名: sha256}
        per_lambda: 路径上每个 λ 的迭代次数、目标函数值与收敛状态
        extra: 其他附加信息
    """
    command: str
    loss_kind: Optional[str] = None
    solver: Optional[str] = None
    lambda_: Optional[float] = None
    grid: Optional[Dict[str, Any]] = None
    lambda_max: Optional[float] = None
    iterations: Optional[int] = None
    objective: Optional[float] = None
    wall_time_seconds: Optional[float] = None
    lipschitz_used: Optional[float] = None
    converged: Optional[bool] = None
    seed: Optional[int] = None
    input_checksums: Dict[str, str] = field(default_factory=dict)
    per_lambda: List[Dict[str, Any]] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = _to_builtin(asdict(self))
        # JSON 中使用 "lambda" 作为键
        data["lambda"] = data.pop("lambda_")
        _check_finite(data, "meta")
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunMetadata":
        data = dict(data)
        data["lambda_"] = data.pop("lambda", None)
        return cls(**data)

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2, allow_nan=False)
            f.write("\n")
        return path


def read_metadata(path: PathLike) -> RunMetadata:
    with open(path, "r", encoding="utf-8") as f:
        return RunMetadata.from_dict(json.load(f))


def checksums(paths: Iterable[PathLike]) -> Dict[str, str]:
    return {Path(p).name: file_checksum(p) for p in paths}


def path_frame(grid: List[float], estimates: List[np.ndarray]) -> pd.DataFrame:
    """
    解路径整理为 (lambda, i, j, value) 长表，λ 按网格顺序（降序）

    没有非零元的 λ 写一行 (lambda, 0, 0, 0) 作为占位，使每个 λ 都出现在文件中。
    """
    blocks = []
    for lam, delta in zip(grid, estimates):
        edges = edge_frame(delta)
        if edges.empty:
            edges = pd.DataFrame({"i": [0], "j": [0], "value": [0.0]})
        edges.insert(0, "lambda", float(lam))
        blocks.append(edges)
    return pd.concat(blocks, ignore_index=True)[PATH_COLUMNS]


class ResultWriter:
    """
    输出目录写入器

    属性:
        out_dir: 输出目录（不存在时自动创建）
        logger: 日志记录器
    """

    def __init__(self, out_dir: PathLike, logger: Optional[logging.Logger] = None):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.logger = logger or logging.getLogger("log_total.main")

    def _target(self, name: str) -> Path:
        return self.out_dir / name

    def write_estimate(self, delta: np.ndarray, meta: RunMetadata) -> Dict[str, Path]:
        """delta.csv（无表头 p×p 矩阵）、edges.csv、meta.json"""
        files = {
            "delta": write_csv(delta, self._target("delta.csv")),
            "edges": write_edges(delta, self._target("edges.csv")),
        }
        files["meta"] = meta.write(self._target("meta.json"))
        self.logger.info(f"估计结果已写入 {self.out_dir}")
        return files

    def write_path(self, grid: List[float], estimates: List[np.ndarray], meta: RunMetadata) -> Dict[str, Path]:
        target = self._target("path.csv")
        path_frame(grid, estimates).to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        files = {"path": target, "meta": meta.write(self._target("meta.json"))}
        self.logger.info(f"路径结果已写入 {target}")
        return files

    def write_simulation(self, frames: Dict[str, pd.DataFrame], meta: RunMetadata) -> Dict[str, Path]:
        """x.csv / y.csv（带表头 V1..Vp）、truth.csv（边表）、meta.json"""
        files = {}
        for key in ("x", "y"):
            frame = frames[key]
            files[key] = write_csv(frame.to_numpy(), self._target(f"{key}.csv"), names=list(frame.columns))
        truth_path = self._target("truth.csv")
        frames["truth"].to_csv(truth_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        files["truth"] = truth_path
        meta.extra["output_checksums"] = checksums(files.values())
        files["meta"] = meta.write(self._target("meta.json"))
        self.logger.info(f"仿真数据已写入 {self.out_dir}")
        return files

    def write_bench(self, rows: List[Dict[str, Any]], meta: RunMetadata) -> Dict[str, Path]:
        target = self._target("bench.csv")
        frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        files = {"bench": target, "meta": meta.write(self._target("meta.json"))}
        self.logger.info(f"基准测试结果已写入 {target}（{len(frame)} 行）")
        return files


def create_result_writer(out_dir: PathLike, logger: Optional[logging.Logger] = None) -> ResultWriter:
    return ResultWriter(out_dir, logger)


__all__ = [
    "RunMetadata",
    "ResultWriter",
    "create_result_writer",
    "file_checksum",
    "checksums",
    "read_metadata",
    "path_frame",
    "PATH_COLUMNS",
    "BENCH_COLUMNS",
]
