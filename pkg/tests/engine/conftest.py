import os
from typing import Any, Dict, List, Tuple

import pytest

from src.data.datasets import DatasetIndex
from src.data.synthetic import generate_synthetic
from src.engine.config import TrainConfig
from src.utils.log.manager import get_logger
from tests.case_data import case_ids, load_yaml_data

logger = get_logger(__name__)

# --- 在模块加载时解析参数化数据 ---
_loaded_yaml_data = load_yaml_data("engine/engine_cases.yaml")

TINY_CONFIG: Dict[str, Any] = _loaded_yaml_data.get('tiny_config', {})
TINY_DATASET: Dict[str, Any] = _loaded_yaml_data.get('tiny_dataset', {})
INVALID_VALUES: List[Dict] = _loaded_yaml_data.get('invalid_values', [])
UNKNOWN_KEYS: List[Dict] = _loaded_yaml_data.get('unknown_keys', [])
LR_SCHEDULES: List[Dict] = _loaded_yaml_data.get('lr_schedules', [])
GRADCHECK_COMPONENTS: List[Dict] = _loaded_yaml_data.get('gradcheck_components', [])
DESK_ACCEPTANCE: Dict[str, Any] = _loaded_yaml_data.get('desk_acceptance', {})
ABLATION_ACCEPTANCE: Dict[str, Any] = _loaded_yaml_data.get('ablation_acceptance', {})

INVALID_VALUE_IDS = case_ids(INVALID_VALUES, "invalid")
UNKNOWN_KEY_IDS = case_ids(UNKNOWN_KEYS, "unknown_key")
LR_SCHEDULE_IDS = case_ids(LR_SCHEDULES, "lr")
GRADCHECK_IDS = case_ids(GRADCHECK_COMPONENTS, "component")


@pytest.fixture(autouse=True)
def clean_train_env(monkeypatch):
    """屏蔽宿主环境中的 EOT_TRAIN__* 变量，避免污染配置层级。"""
    for key in list(os.environ):
        if key.startswith("EOT_TRAIN__"):
            monkeypatch.delenv(key)
    yield


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> Tuple[str, DatasetIndex, DatasetIndex]:
    """小规模合成数据集，返回 (根目录, 训练索引, 测试索引)。"""
    root = str(tmp_path_factory.mktemp("engine_synthetic"))
    train_index = generate_synthetic(TINY_DATASET["classes"], TINY_DATASET["train_per_class"],
                                     TINY_DATASET["seed"], root, split="train")
    test_index = generate_synthetic(TINY_DATASET["classes"], TINY_DATASET["test_per_class"],
                                    TINY_DATASET["seed"], root, split="test")
    logger.info(f"引擎测试数据集: {root}")
    return root, train_index, test_index


@pytest.fixture
def tiny_config(tiny_dataset) -> TrainConfig:
    flat = TrainConfig().to_flat()
    flat.update({key: str(value) for key, value in TINY_CONFIG.items()})
    flat["data.root"] = tiny_dataset[0]
    return TrainConfig.from_flat(flat)
