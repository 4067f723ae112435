"""
消融实验：依次训练若干模型变体（每个变体多个种子），输出对比表。

输出目录::

    <output>/
    ├── <variant>/seed_<s>/   # 每次训练的 metrics.csv 与检查点
    ├── ablation.csv          # variant,runs,train_acc,test_acc,test_acc_std
    └── ablation.txt          # 对齐的纯文本表
"""

from __future__ import annotations

import os
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from src.core.base.errors import ConfigValueError, ReportGenerationError
from src.data.datasets import DatasetIndex
from src.engine.config import VARIANTS, TrainConfig
from src.engine.trainer import load_indices, train
from src.utils.file_utils import FileUtils
from src.utils.log.manager import get_logger

CSV_NAME = "ablation.csv"
TEXT_NAME = "ablation.txt"
CSV_HEADER = "variant,runs,train_acc,test_acc,test_acc_std"

logger = get_logger(__name__)


class AblationRow(BaseModel):
    variant: str
    train_acc: List[float]
    test_acc: List[float]

    @property
    def runs(self) -> int:
        return len(self.train_acc)

    @property
    def mean_train(self) -> float:
        return float(np.mean(self.train_acc))

    @property
    def mean_test(self) -> Optional[float]:
        return float(np.mean(self.test_acc)) if self.test_acc else None

    @property
    def std_test(self) -> Optional[float]:
        return float(np.std(self.test_acc)) if self.test_acc else None


class AblationTable(BaseModel):
    rows: List[AblationRow]

    def row(self, variant: str) -> AblationRow:
        for row in self.rows:
            if row.variant == variant:
                return row
        raise KeyError(variant)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for row in self.rows:
            test = "" if row.mean_test is None else f"{row.mean_test:.6f}"
            std = "" if row.std_test is None else f"{row.std_test:.6f}"
            lines.append(f"{row.variant},{row.runs},{row.mean_train:.6f},{test},{std}")
        return "\n".join(lines) + "\n"

    def format(self) -> str:
        """对齐的纯文本表，准确率以百分比显示。"""
        header = ("variant", "runs", "train acc (%)", "test acc (%)")
        body = []
        for row in self.rows:
            test = "-" if row.mean_test is None else f"{100 * row.mean_test:.2f} ± {100 * (row.std_test or 0):.2f}"
            body.append((row.variant, str(row.runs), f"{100 * row.mean_train:.2f}", test))
        widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]

        def render(line: Sequence[str]) -> str:
            return "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()

        rule = "  ".join("-" * width for width in widths)
        return "\n".join([render(header), rule, *(render(line) for line in body)]) + "\n"


def parse_variants(text: str) -> List[str]:
    """解析逗号分隔的变体列表（保持给定顺序、去重）。

    Raises:
        ConfigValueError: 列表为空或包含未知变体
    """
    variants: List[str] = []
    for item in (part.strip() for part in text.split(",")):
        if not item:
            continue
        if item not in VARIANTS:
            raise ConfigValueError("variants", item, f"未知的模型变体: {item}，可选 {VARIANTS}")
        if item not in variants:
            variants.append(item)
    if not variants:
        raise ConfigValueError("variants", text, "变体列表为空")
    return variants


def write_report(table: AblationTable, output_dir: str) -> None:
    """写出 ablation.csv 和 ablation.txt。

    Raises:
        ReportGenerationError: 文件无法写入
    """
    files = FileUtils()
    try:
        files.write_text(os.path.join(output_dir, CSV_NAME), table.to_csv())
        files.write_text(os.path.join(output_dir, TEXT_NAME), table.format())
    except OSError as e:
        raise ReportGenerationError(f"无法写入消融对比表: {output_dir}", cause=e) from e


def run_ablation(config: TrainConfig, variants: Sequence[str], seeds: Sequence[int], output_dir: str,
                 train_index: Optional[DatasetIndex] = None, test_index: Optional[DatasetIndex] = None,
                 progress: bool = False) -> AblationTable:
    """按给定顺序训练每个变体 × 种子组合并汇总最后一轮的准确率。

    Args:
        config: 基础训练配置（variant 和 seed 会被逐次替换）
        variants: 变体列表
        seeds: 种子列表
        output_dir: 输出目录
        train_index: 训练集索引，为空时按 config.data 扫描
        test_index: 测试集索引
        progress: 是否显示批进度条

    Returns:
        AblationTable（行顺序与 variants 一致）

    Raises:
        ConfigValueError: 变体或种子列表为空、变体未知
        ReportGenerationError: 对比表无法写入
    """
    variants = parse_variants(",".join(variants))
    if not seeds:
        raise ConfigValueError("seeds", list(seeds), "种子列表为空")
    if train_index is None:
        train_index, test_index = load_indices(config)

    rows = []
    for variant in variants:
        train_acc: List[float] = []
        test_acc: List[float] = []
        for seed in seeds:
            run_config = config.updated(variant=variant, seed=seed)
            run_dir = os.path.join(output_dir, variant, f"seed_{seed}")
            logger.info(f"消融: variant={variant}, seed={seed}, 输出目录={run_dir}")
            final = train(run_config, run_dir, train_index, test_index, progress=progress).final
            train_acc.append(final.train_acc)
            if final.test_acc is not None:
                test_acc.append(final.test_acc)
        rows.append(AblationRow(variant=variant, train_acc=train_acc, test_acc=test_acc))

    table = AblationTable(rows=rows)
    write_report(table, output_dir)
    logger.info(f"消融对比表已写出: {os.path.join(output_dir, CSV_NAME)}")
    return table
