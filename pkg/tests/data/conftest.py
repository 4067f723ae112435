import os
from typing import Dict, List

import numpy as np
import pytest
from PIL import Image

from src.data.synthetic import generate_synthetic
from src.utils.log.manager import get_logger
from tests.case_data import case_ids, load_yaml_data

logger = get_logger(__name__)

# --- 在模块加载时解析参数化数据 ---
_loaded_yaml_data = load_yaml_data("datasets/dataset_cases.yaml")

SPLIT_FILE_LAYOUTS: List[Dict] = _loaded_yaml_data.get('split_file_layouts', [])
BAD_SPLIT_LINES: List[Dict] = _loaded_yaml_data.get('bad_split_lines', [])
POLICY_MODES: List[Dict] = _loaded_yaml_data.get('policy_modes', [])
IMAGE_SIZES: List[Dict] = _loaded_yaml_data.get('image_sizes', [])
SYNTHETIC_SPECTRUM: Dict = _loaded_yaml_data.get('synthetic_spectrum', {})

SPLIT_FILE_LAYOUT_IDS = case_ids(SPLIT_FILE_LAYOUTS, "layout")
BAD_SPLIT_LINE_IDS = case_ids(BAD_SPLIT_LINES, "bad_line")
POLICY_MODE_IDS = case_ids(POLICY_MODES, "mode")
IMAGE_SIZE_IDS = case_ids(IMAGE_SIZES, "size")


def write_image(path: str, size=(16, 16), value: int = 128) -> str:
    """写一张纯色 RGB 图像（size 为 宽×高）。"""
    os.makedirs(os.path.dirname(path), exist_ok=True)
    Image.fromarray(np.full((size[1], size[0], 3), value, dtype=np.uint8)).save(path)
    return path


@pytest.fixture(scope="session")
def synthetic_root(tmp_path_factory) -> str:
    """3 类 × 每类 4 张的合成数据集（train + test）。"""
    root = str(tmp_path_factory.mktemp("synthetic"))
    generate_synthetic(classes=3, per_class=4, seed=11, out_root=root, split="train")
    generate_synthetic(classes=3, per_class=2, seed=11, out_root=root, split="test")
    logger.info(f"合成测试数据集: {root}")
    return root


def build_split_file_layout(root: str, classes: int, per_class: int = 2) -> List[str]:
    """构造 images/<class>/ 目录，返回类别名列表。"""
    names = [f"material_{c:02d}" for c in range(classes)]
    for name in names:
        for i in range(per_class):
            write_image(os.path.join(root, "images", name, f"{name}_{i}.jpg"), value=10 + i)
    os.makedirs(os.path.join(root, "labels"), exist_ok=True)
    return names
