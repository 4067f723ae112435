"""
合成纹理数据集生成器。

类别按四个纹理族循环（条纹、棋盘、斑点、相关噪声），每四个类别族参数升一级
（条纹频率、棋盘格尺寸、斑点密度、噪声相关长度），因此不同类别的径向功率谱不同。
"""

from __future__ import annotations

import os
from typing import Callable, Dict, List, Tuple

import numpy as np
from PIL import Image
from tqdm import tqdm

from src.core.base.errors import ConfigValueError, DataError
from src.data.datasets import MANIFEST_NAME, DatasetIndex, write_manifest
from src.utils.log.manager import get_logger

IMAGE_SIZE = 256
FAMILIES: Tuple[str, ...] = ("stripes", "checker", "blobs", "noise")
_SPLIT_IDS: Dict[str, int] = {"train": 0, "test": 1}


def class_name(class_id: int) -> str:
    """类别名带零填充序号，字典序与类别 id 一致。"""
    return f"class_{class_id:03d}_{FAMILIES[class_id % len(FAMILIES)]}"


class TextureGenerator:
    """
    程序化纹理生成器，所有随机性来自传入的 numpy Generator。
    """

    def __init__(self, size: int = IMAGE_SIZE):
        self.size = size
        self.logger = get_logger(self.__class__.__name__)
        coords = np.arange(size, dtype=np.float64)
        self._yy, self._xx = np.meshgrid(coords, coords, indexing="ij")

    def stripes(self, rng: np.random.Generator, level: int) -> np.ndarray:
        """正弦条纹，每图周期数随 level 增加。"""
        cycles = 10 * (level + 1) + rng.uniform(-1.0, 1.0)
        angle = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2 * np.pi)
        position = self._xx * np.cos(angle) + self._yy * np.sin(angle)
        return 0.5 + 0.5 * np.sin(2 * np.pi * cycles * position / self.size + phase)

    def checker(self, rng: np.random.Generator, level: int) -> np.ndarray:
        """棋盘格，格子边长随 level 连续递减。"""
        cell = 32.0 / (1 + 0.5 * level) * rng.uniform(0.97, 1.03)
        dy, dx = rng.uniform(0.0, 2 * cell, size=2)
        rows = np.floor((self._yy + dy) / cell)
        cols = np.floor((self._xx + dx) / cell)
        return ((rows + cols) % 2).astype(np.float64)

    def blobs(self, rng: np.random.Generator, level: int) -> np.ndarray:
        """随机高斯斑点，数量随 level 增加、半径随之减小。"""
        count = 24 * (level + 1)
        image = np.zeros((self.size, self.size), dtype=np.float64)
        for _ in range(count):
            cy, cx = rng.uniform(0, self.size, size=2)
            radius = rng.uniform(6.0, 12.0) / (1 + 0.5 * level)
            image += np.exp(-((self._yy - cy) ** 2 + (self._xx - cx) ** 2) / (2 * radius ** 2))
        return np.clip(image, 0.0, 1.0)

    def noise(self, rng: np.random.Generator, level: int) -> np.ndarray:
        """高斯低通滤波后的白噪声，相关长度随 level 减小。"""
        length = 4.0 / (level + 1)
        white = rng.standard_normal((self.size, self.size))
        freq = np.fft.fftfreq(self.size)
        ky, kx = np.meshgrid(freq, freq, indexing="ij")
        response = np.exp(-2 * (np.pi * length) ** 2 * (kx ** 2 + ky ** 2))
        field = np.real(np.fft.ifft2(np.fft.fft2(white) * response))
        field -= field.min()
        peak = field.max()
        return field / peak if peak > 0 else field

    def render(self, class_id: int, rng: np.random.Generator) -> np.ndarray:
        """生成一张 (size, size, 3) 的 uint8 图像。"""
        family = FAMILIES[class_id % len(FAMILIES)]
        level = class_id // len(FAMILIES)
        draw: Callable[[np.random.Generator, int], np.ndarray] = getattr(self, family)
        pattern = draw(rng, level)
        tint = rng.uniform(0.6, 1.0, size=3)
        image = pattern[..., None] * tint + rng.normal(0.0, 0.03, size=(self.size, self.size, 3))
        return (np.clip(image, 0.0, 1.0) * 255.0).round().astype(np.uint8)


def generate_synthetic(classes: int, per_class: int, seed: int, out_root: str,
                       split: str = "train", progress: bool = False) -> DatasetIndex:
    """生成合成纹理数据集。

    写出 ``out_root/<split>/<class>/<class>_<i>.png`` 和 ``out_root/<split>/manifest.tsv``；
    同一 seed 下重复生成得到逐字节相同的文件。

    Args:
        classes: 类别数（≥ 2）
        per_class: 每类图像数（≥ 1）
        seed: 随机种子
        out_root: 输出根目录
        split: train | test，两者使用不同的随机流
        progress: 是否显示 tqdm 进度条

    Returns:
        生成数据的 DatasetIndex

    Raises:
        ConfigValueError: classes < 2、per_class < 1 或未知划分
        DataError: 输出目录不可写
    """
    logger = get_logger(__name__)
    if classes < 2:
        raise ConfigValueError("classes", classes, f"类别数必须 ≥ 2, 实际 {classes}")
    if per_class < 1:
        raise ConfigValueError("per_class", per_class, f"每类图像数必须 ≥ 1, 实际 {per_class}")
    if split not in _SPLIT_IDS:
        raise ConfigValueError("split", split, f"未知的数据集划分: {split}")

    generator = TextureGenerator()
    split_root = os.path.join(out_root, split)
    names = [class_name(c) for c in range(classes)]
    entries: List[Tuple[str, int]] = []
    jobs = [(c, i) for c in range(classes) for i in range(per_class)]
    try:
        for name in names:
            os.makedirs(os.path.join(split_root, name), exist_ok=True)
        for class_id, i in tqdm(jobs, desc=f"synth[{split}]", disable=not progress):
            rng = np.random.default_rng([seed, _SPLIT_IDS[split], class_id, i])
            path = os.path.join(split_root, names[class_id], f"{names[class_id]}_{i:04d}.png")
            Image.fromarray(generator.render(class_id, rng)).save(path, format="PNG")
            entries.append((path, class_id))
        index = DatasetIndex(entries=sorted(entries), class_names=names, split=split)
        write_manifest(index, os.path.join(split_root, MANIFEST_NAME))
    except OSError as e:
        raise DataError(f"无法写入合成数据集目录: {split_root}", cause=e) from e
    logger.info(f"已生成合成数据集: {split_root} ({classes} 类 × {per_class} 张)")
    return index
