"""测试公共夹具"""

import logging

import numpy as np
import pytest

from modules.simulation_module import build_design, simulate_two_sample


def random_spd(p: int, seed: int, n: int = None) -> np.ndarray:
    """随机样本协方差（n > p 时正定）"""
    rng = np.random.default_rng(seed)
    n = n or 3 * p
    X = rng.standard_normal((n, p))
    S = X.T @ X / n
    return 0.5 * (S + S.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20190101)


@pytest.fixture
def spd_pair():
    return random_spd(4, seed=1), random_spd(4, seed=2)


@pytest.fixture(scope="session")
def sparse_instance():
    """稀疏情形 p=40, n1=n2=60 的一组仿真数据"""
    design = build_design("sparse", 40)
    X, Y = simulate_two_sample(design, 60, 60, seed=11)
    return design, X, Y


@pytest.fixture(autouse=True)
def _quiet_console():
    """测试期间不向控制台输出 log_total 日志"""
    root = logging.getLogger("log_total")
    saved = [h.level for h in root.handlers]
    for h in root.handlers:
        if isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler):
            h.setLevel(logging.CRITICAL)
    yield
    for h, level in zip(root.handlers, saved):
        h.setLevel(level)
