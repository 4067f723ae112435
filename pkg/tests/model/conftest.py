from typing import Any, Dict, List

import pytest
import torch

from src.model.backbone import ResNetBackbone
from src.utils.log.manager import get_logger
from tests.case_data import case_ids, load_yaml_data

logger = get_logger(__name__)

# --- 在模块加载时解析参数化数据 ---
_loaded_yaml_data = load_yaml_data("model/model_cases.yaml")

SHAPE_CONTRACT: Dict[str, Any] = _loaded_yaml_data.get('shape_contract', {})
VARIANT_STAGE_CASES: List[Dict] = _loaded_yaml_data.get('variant_stage_cases', [])
UNIFORM_LOSS_CASES: List[Dict] = _loaded_yaml_data.get('uniform_loss_cases', [])
BACKBONE_BAD_INPUTS: List[Dict] = _loaded_yaml_data.get('backbone_bad_inputs', [])

VARIANT_STAGE_IDS = case_ids(VARIANT_STAGE_CASES, "variant")
UNIFORM_LOSS_IDS = case_ids(UNIFORM_LOSS_CASES, "uniform_loss")
BACKBONE_BAD_INPUT_IDS = case_ids(BACKBONE_BAD_INPUTS, "bad_input")

# 随机小实例的个数（标量循环 oracle 对比）
ORACLE_INSTANCES = 100


@pytest.fixture(scope="session")
def backbone18() -> ResNetBackbone:
    """随机初始化的 ResNet-18 骨干（eval 模式，多个用例共享）。"""
    torch.manual_seed(0)
    return ResNetBackbone(depth=18).eval()


@pytest.fixture
def images() -> torch.Tensor:
    return torch.randn(2, 3, 256, 256)


def random_generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed)
