import logging

import pytest
import yaml

from utils.initialization import LOGGER_LAYOUT, init_multi_level_loggers, load_configs


def test_load_project_configs():
    main_config, utils_config = load_configs()
    assert main_config["solver"]["fista"]["rel_tol"] == pytest.approx(1e-5)
    assert main_config["path"]["n_lambda"] == 50
    assert main_config["path"]["min_ratio"] == pytest.approx(0.5)
    assert "default" in utils_config["logging"]


def test_missing_config_file(tmp_path):
    (tmp_path / "main_config.yaml").write_text("path:\n  n_lambda: 5\n", encoding="utf-8")
    with pytest.raises(FileNotFoundError):
        load_configs(tmp_path)

    main_config, utils_config = load_configs(tmp_path, allow_missing=True)
    assert main_config == {"path": {"n_lambda": 5}}
    assert utils_config == {}


def test_empty_config_file_is_empty_dict(tmp_path):
    (tmp_path / "main_config.yaml").write_text("", encoding="utf-8")
    (tmp_path / "utils_config.yaml").write_text(yaml.safe_dump({"logging": {}}), encoding="utf-8")
    main_config, utils_config = load_configs(tmp_path)
    assert main_config == {}
    assert utils_config == {"logging": {}}


def test_logger_hierarchy(tmp_path):
    loggers = init_multi_level_loggers({"default": {"console_output": False}}, log_dir=tmp_path)
    assert set(loggers) == set(LOGGER_LAYOUT)
    assert loggers["total"].name == "log_total"
    for key, (name, _) in LOGGER_LAYOUT.items():
        assert loggers[key] is logging.getLogger(name)
        if key != "total":
            assert loggers[key].propagate
            assert loggers[key].handlers


def test_logger_initialization_is_idempotent(tmp_path):
    first = init_multi_level_loggers({}, log_dir=tmp_path)
    counts = {k: len(v.handlers) for k, v in first.items()}
    second = init_multi_level_loggers({}, log_dir=tmp_path)
    assert {k: len(v.handlers) for k, v in second.items()} == counts
