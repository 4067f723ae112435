"""
数据层：数据集索引、预处理与增强、合成纹理数据集。
"""

from .datasets import (
    DatasetIndex,
    SeededEpochSampler,
    TerrainDataset,
    read_manifest,
    scan_dataset,
    write_manifest,
)
from .synthetic import generate_synthetic
from .transforms import AugmentationPolicy, load_example

__all__ = [
    "DatasetIndex",
    "SeededEpochSampler",
    "TerrainDataset",
    "read_manifest",
    "scan_dataset",
    "write_manifest",
    "generate_synthetic",
    "AugmentationPolicy",
    "load_example",
]
