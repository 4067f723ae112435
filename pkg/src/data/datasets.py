"""
数据集索引与加载。

支持四种目录布局：
- generic：每个类别一个子目录（可选 train/ test/ 划分子目录）
- gtos_mobile：train/<class>/、test/<class>/，31 类
- dtd：images/<class>/ + labels/{train,val,test}{fold}.txt，47 类
- minc2500：images/<class>/ + labels/{train,validate,test}{fold}.txt，23 类

划分文件只读取，不生成。
"""

from __future__ import annotations

import os
from typing import Dict, Iterator, List, Literal, Optional, Tuple

import torch
from pydantic import BaseModel, ConfigDict, model_validator
from torch.utils.data import Dataset, Sampler

from src.core.base.errors import DataFormatError, DataLoadError, DatasetError
from src.data.transforms import AugmentationPolicy, example_seed, load_example
from src.utils.file_utils import FileUtils
from src.utils.log.manager import get_logger
from src.utils.patterns import RegexPatterns

logger = get_logger(__name__)

Split = Literal["train", "test"]

EXPECTED_CLASSES: Dict[str, int] = {"gtos_mobile": 31, "dtd": 47, "minc2500": 23}
# 训练划分额外并入的验证集文件名前缀
_VALIDATION_PREFIX: Dict[str, str] = {"dtd": "val", "minc2500": "validate"}
MANIFEST_NAME = "manifest.tsv"


class DatasetIndex(BaseModel):
    """数据集索引。

    Attributes:
        entries: (图像路径, 类别 id) 列表，按路径字典序排列
        class_names: 按字典序排列的类别名，下标即类别 id
        split: 划分名
    """

    model_config = ConfigDict(frozen=True)

    entries: List[Tuple[str, int]]
    class_names: List[str]
    split: Split

    @model_validator(mode="after")
    def _check(self) -> "DatasetIndex":
        if len(self.class_names) < 2:
            raise ValueError(f"类别数必须 ≥ 2, 实际 {len(self.class_names)}")
        num_classes = len(self.class_names)
        for path, label in self.entries:
            if not 0 <= label < num_classes:
                raise ValueError(f"类别 id 超出范围 [0, {num_classes}): {path} -> {label}")
        return self

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.entries)

    def class_counts(self) -> List[int]:
        counts = [0] * self.num_classes
        for _, label in self.entries:
            counts[label] += 1
        return counts


def _build_index(entries: List[Tuple[str, int]], class_names: List[str], split: str) -> DatasetIndex:
    if not entries:
        raise DatasetError(f"数据集划分 '{split}' 中没有任何图像")
    try:
        index = DatasetIndex(entries=sorted(entries), class_names=class_names, split=split)
    except ValueError as e:
        raise DatasetError(f"数据集索引无效 (split={split})", cause=e) from e
    logger.info(f"扫描完成: split={split}, 类别数={index.num_classes}, 图像数={len(index)}")
    return index


def _scan_class_folders(base: str, files: FileUtils) -> Tuple[List[Tuple[str, int]], List[str]]:
    class_names = [name for name in files.list_dirs(base) if files.list_images(os.path.join(base, name))]
    entries = [
        (path, label)
        for label, name in enumerate(class_names)
        for path in files.list_images(os.path.join(base, name))
    ]
    return entries, class_names


def _check_class_count(layout: str, class_names: List[str]) -> None:
    expected = EXPECTED_CLASSES.get(layout)
    if expected is not None and len(class_names) != expected:
        raise DatasetError(f"{layout} 布局应有 {expected} 个类别, 实际 {len(class_names)}")


def _read_split_file(path: str, image_root: str, class_ids: Dict[str, int],
                     files: FileUtils) -> List[Tuple[str, int]]:
    entries = []
    for line_no, line in enumerate(files.read_lines(path), start=1):
        relative = line.strip().replace("\\", "/")
        if relative.startswith("images/"):
            relative = relative[len("images/"):]
        class_name = relative.split("/", 1)[0]
        if "/" not in relative or class_name not in class_ids:
            raise DataFormatError(f"{path}:{line_no} 无法识别类别: {line!r}")
        image_path = os.path.join(image_root, *relative.split("/"))
        if not os.path.isfile(image_path):
            raise DatasetError(f"{path}:{line_no} 列出的图像不存在: {image_path}")
        entries.append((image_path, class_ids[class_name]))
    return entries


def scan_dataset(root: str, layout: str = "generic", split: str = "train", fold: int = 1) -> DatasetIndex:
    """扫描数据集目录，建立索引。

    Args:
        root: 数据集根目录
        layout: 目录布局 generic | gtos_mobile | dtd | minc2500
        split: train | test
        fold: dtd / minc2500 的划分折号

    Returns:
        DatasetIndex（路径与类别名均按字典序，结果可重复）

    Raises:
        DatasetError: 根目录不存在或为空、缺少划分定义、类别数与布局约定不符
        DataFormatError: 划分文件行格式错误
    """
    if split not in ("train", "test"):
        raise DatasetError(f"未知的数据集划分: {split}")
    if not os.path.isdir(root):
        raise DatasetError(f"数据集根目录不存在: {root}")
    files = FileUtils()

    if layout in ("generic", "gtos_mobile"):
        split_dirs = [name for name in ("train", "test") if os.path.isdir(os.path.join(root, name))]
        if split_dirs or layout == "gtos_mobile":
            base = os.path.join(root, split)
            if not os.path.isdir(base):
                raise DatasetError(f"缺少划分目录: {base}")
        else:
            base = root
        entries, class_names = _scan_class_folders(base, files)
        if not class_names:
            raise DatasetError(f"数据集目录中没有类别子目录或图像: {base}")
        _check_class_count(layout, class_names)
        return _build_index(entries, class_names, split)

    if layout in ("dtd", "minc2500"):
        image_root = os.path.join(root, "images")
        if not os.path.isdir(image_root):
            raise DatasetError(f"缺少图像目录: {image_root}")
        class_names = files.list_dirs(image_root)
        _check_class_count(layout, class_names)
        class_ids = {name: label for label, name in enumerate(class_names)}
        split_file = os.path.join(root, "labels", f"{split}{fold}.txt")
        if not os.path.isfile(split_file):
            raise DatasetError(f"缺少划分文件: {split_file}")
        entries = _read_split_file(split_file, image_root, class_ids, files)
        if split == "train":
            validation = os.path.join(root, "labels", f"{_VALIDATION_PREFIX[layout]}{fold}.txt")
            if os.path.isfile(validation):
                entries += _read_split_file(validation, image_root, class_ids, files)
        return _build_index(entries, class_names, split)

    raise DatasetError(f"未知的数据集布局: {layout}")


def write_manifest(index: DatasetIndex, path: str) -> None:
    """写出 ``path<TAB>class_id`` 清单，路径相对清单所在目录、使用 / 分隔。"""
    base = os.path.dirname(os.path.abspath(path))
    lines = []
    for image_path, label in index.entries:
        relative = os.path.relpath(os.path.abspath(image_path), base).replace(os.sep, "/")
        lines.append(f"{relative}\t{label}")
    FileUtils().write_text(path, "\n".join(lines) + "\n")


def read_manifest(path: str, split: str = "train", class_names: Optional[List[str]] = None) -> DatasetIndex:
    """读取清单文件。

    未给出 class_names 时，以每个类别 id 对应图像的父目录名作为类别名。

    Raises:
        DatasetError: 清单不存在或列出的图像不存在
        DataFormatError: 行格式错误
    """
    files = FileUtils()
    if not os.path.isfile(path):
        raise DatasetError(f"清单文件不存在: {path}")
    base = os.path.dirname(os.path.abspath(path))
    entries: List[Tuple[str, int]] = []
    for line_no, line in enumerate(files.read_lines(path), start=1):
        match = RegexPatterns.MANIFEST_LINE.fullmatch(line)
        if match is None:
            raise DataFormatError(f"{path}:{line_no} 清单行格式应为 path<TAB>class_id: {line!r}")
        image_path = os.path.join(base, *match.group("path").split("/"))
        if not os.path.isfile(image_path):
            raise DatasetError(f"{path}:{line_no} 列出的图像不存在: {image_path}")
        entries.append((image_path, int(match.group("label"))))
    if class_names is None:
        by_id: Dict[int, str] = {}
        for image_path, label in entries:
            by_id.setdefault(label, os.path.basename(os.path.dirname(image_path)))
        if sorted(by_id) != list(range(len(by_id))):
            raise DataFormatError(f"{path} 中的类别 id 不连续: {sorted(by_id)}")
        class_names = [by_id[label] for label in range(len(by_id))]
    return _build_index(entries, class_names, split)


class TerrainDataset(Dataset):
    """DatasetIndex + AugmentationPolicy 上的 torch Dataset。

    strict=False 时，无法读取的图像由其后第一张可读图像代替并记录警告。
    """

    def __init__(self, index: DatasetIndex, policy: AugmentationPolicy, strict: bool = True) -> None:
        self.index = index
        self.policy = policy
        self.strict = strict
        self.epoch = 0
        self.logger = get_logger(self.__class__.__name__)

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.index)

    def __getitem__(self, item: int) -> Tuple[torch.Tensor, int]:
        total = len(self.index)
        for offset in range(total):
            position = (item + offset) % total
            entry = self.index.entries[position]
            try:
                return load_example(entry, self.policy, index=position, epoch=self.epoch)
            except DataLoadError as e:
                if self.strict:
                    raise
                self.logger.warning(f"跳过无法读取的图像: {entry[0]} ({e})")
        raise DataLoadError(f"数据集中没有任何可读取的图像 (split={self.index.split})")


class SeededEpochSampler(Sampler[int]):
    """按 (seed, epoch) 生成排列的采样器，续训时顺序与不中断运行一致。"""

    def __init__(self, length: int, seed: int = 0, shuffle: bool = True) -> None:
        self.length = length
        self.seed = seed
        self.shuffle = shuffle
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[int]:
        if not self.shuffle:
            return iter(range(self.length))
        generator = torch.Generator()
        generator.manual_seed(example_seed(self.seed, self.epoch, 0))
        return iter(torch.randperm(self.length, generator=generator).tolist())
