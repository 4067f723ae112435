import os
from typing import Any, Dict, List

import pytest

from src.cli.main import run
from src.utils.log.manager import get_logger
from tests.case_data import case_ids, load_yaml_data

logger = get_logger(__name__)

# --- 在模块加载时解析参数化数据 ---
_loaded_yaml_data = load_yaml_data("cli/cli_cases.yaml")

SUBCOMMANDS: List[str] = _loaded_yaml_data.get('subcommands', [])
USAGE_ERRORS: List[Dict] = _loaded_yaml_data.get('usage_errors', [])
TINY_EXPERIMENT: str = _loaded_yaml_data.get('tiny_experiment', "")
SYNTHETIC: Dict[str, Any] = _loaded_yaml_data.get('synthetic', {})

USAGE_ERROR_IDS = case_ids(USAGE_ERRORS, "usage")


@pytest.fixture(autouse=True)
def clean_train_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("EOT_TRAIN__"):
            monkeypatch.delenv(key)
    yield


@pytest.fixture(scope="module")
def workspace(tmp_path_factory) -> Dict[str, str]:
    """通过 synth 子命令生成数据集，并写出指向它的实验配置文件。"""
    root = tmp_path_factory.mktemp("cli")
    data_root = str(root / "data")
    code = run(["synth", "--classes", str(SYNTHETIC["classes"]), "--per-class", str(SYNTHETIC["per_class"]),
                "--seed", str(SYNTHETIC["seed"]), "--output", data_root])
    assert code == 0
    config_path = root / "tiny.cfg"
    config_path.write_text(TINY_EXPERIMENT + f"data.root={data_root}\n", encoding="utf-8")
    logger.info(f"命令行测试工作目录: {root}")
    return {"root": str(root), "data": data_root, "config": str(config_path)}
