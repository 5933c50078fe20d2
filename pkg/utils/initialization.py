"""
初始化模块
提供 config 文件加载和日志系统的初始化功能
"""

import logging
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import yaml

PROJECT_ROOT = Path(__file__).parent.parent
DEFAULT_CONFIG_DIR = PROJECT_ROOT / "configs"

# 日志器配置：{简化名称: (完整logger名称, 日志文件名)}
LOGGER_LAYOUT = {
    "total": ("log_total", "total_log.log"),
    "main": ("log_total.main", "main_log.log"),
    "solver": ("log_total.solver", "solver_log.log"),
    "admm": ("log_total.admm", "admm_log.log"),
    "data": ("log_total.data", "data_log.log"),
    "simulation": ("log_total.simulation", "simulation_log.log"),
    "bench": ("log_total.bench", "bench_log.log"),
}


def _read_yaml(path: Path, allow_missing: bool) -> Dict:
    if not path.exists():
        if allow_missing:
            return {}
        raise FileNotFoundError(f"配置文件不存在: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def load_configs(
    config_dir: Optional[Union[str, Path]] = None,
    allow_missing: bool = False,
) -> Tuple[Dict, Dict]:
    """
    Load all config files.

    Args:
        config_dir: 配置目录，默认为项目根目录下的 configs/
        allow_missing: 文件缺失时是否以空字典代替

    Returns:
        (main_config, utils_config)
    """
    config_dir = Path(config_dir) if config_dir is not None else DEFAULT_CONFIG_DIR

    main_config = _read_yaml(config_dir / "main_config.yaml", allow_missing)
    utils_config = _read_yaml(config_dir / "utils_config.yaml", allow_missing)

    return main_config, utils_config


def init_multi_level_loggers(
    log_config: Dict,
    log_dir: Optional[Union[str, Path]] = None,
) -> Dict[str, logging.Logger]:
    """
    初始化多层级日志系统

    创建一个根日志器和 6 个子日志器，形成层级结构：
    - 根日志器（log_total）：捕获所有模块的日志，控制台 INFO + 文件 DEBUG
    - 子日志器：各自记录对应模块的日志，同时自动传播到根日志器

    库模块只通过名称（如 logging.getLogger("log_total.solver")）取日志器，
    未初始化时不输出任何内容。

    参数:
        log_config: 日志配置字典，从 utils_config.yaml 的 logging 段读取
                   - default: 默认配置（console_output, rotation_when, rotation_interval, backup_count, log_dir）
                   - loggers: 各日志器的独立配置（可选），键为简化名称
        log_dir: 日志目录（可选），优先于配置中的 log_dir

    返回:
        Dict[str, logging.Logger]: {"total", "main", "solver", "admm", "data", "simulation", "bench"}

    异常:
        OSError: 日志目录创建失败
    """
    log_config = log_config or {}
    default_config = log_config.get("default", {}) or {}

    if log_dir is None:
        log_dir = default_config.get("log_dir", "logs")
    log_path = Path(log_dir)
    if not log_path.is_absolute():
        log_path = PROJECT_ROOT / log_path
    try:
        log_path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"日志目录创建失败: {e}") from e

    default_console_output = default_config.get("console_output", True)
    default_rotation_when = default_config.get("rotation_when", "midnight")
    default_rotation_interval = default_config.get("rotation_interval", 1)
    default_backup_count = default_config.get("backup_count", 7)

    loggers_config = log_config.get("loggers", {}) or {}

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    def file_handler(key: str, log_file: str) -> TimedRotatingFileHandler:
        own = loggers_config.get(key, {}) or {}
        handler = TimedRotatingFileHandler(
            filename=str(log_path / log_file),
            encoding="utf-8",
            when=own.get("rotation_when", default_rotation_when),
            interval=own.get("rotation_interval", default_rotation_interval),
            backupCount=own.get("backup_count", default_backup_count),
        )
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(formatter)
        return handler

    loggers = {}

    root_name, root_file = LOGGER_LAYOUT["total"]
    root_logger = logging.getLogger(root_name)
    # 避免重复初始化
    if not root_logger.handlers:
        root_logger.setLevel(logging.DEBUG)
        root_logger.propagate = False

        root_own = loggers_config.get("total", {}) or {}
        if root_own.get("console_output", default_console_output):
            console_handler = logging.StreamHandler()
            console_handler.setLevel(logging.INFO)
            console_handler.setFormatter(formatter)
            root_logger.addHandler(console_handler)

        root_logger.addHandler(file_handler("total", root_file))
    loggers["total"] = root_logger

    for key, (logger_name, log_file) in LOGGER_LAYOUT.items():
        if key == "total":
            continue
        child_logger = logging.getLogger(logger_name)
        if not child_logger.handlers:
            child_logger.setLevel(logging.DEBUG)
            child_logger.propagate = True  # 子日志器向父日志器传播
            child_logger.addHandler(file_handler(key, log_file))
        loggers[key] = child_logger

    root_logger.debug(f"多层级日志系统初始化成功，日志目录: {log_path}")
    return loggers
