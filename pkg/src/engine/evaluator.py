"""
评估：整体 top-1 与逐类准确率、单图推理。

评估始终使用 eval 预处理（286 缩放 + 256 中心裁剪），结果与加载顺序无关。
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import torch
from pydantic import BaseModel, model_validator
from torch.utils.data import DataLoader

from src.core.base.errors import ClassCountMismatchError, InputValidationError
from src.data.datasets import DatasetIndex, TerrainDataset
from src.data.transforms import AugmentationPolicy, load_example
from src.engine.checkpoint import Checkpoint, restore_model
from src.utils.log.manager import get_logger

logger = get_logger(__name__)

EVAL_BATCH_SIZE = 32


class AccuracyReport(BaseModel):
    """准确率报告。

    Attributes:
        overall: 整体 top-1 准确率
        class_names: 类别名
        per_class: 逐类准确率，该类没有样本时为 None
        counts: 逐类样本数
    """

    overall: float
    class_names: List[str]
    per_class: List[Optional[float]]
    counts: List[int]

    @model_validator(mode="after")
    def _aligned(self) -> "AccuracyReport":
        if not len(self.class_names) == len(self.per_class) == len(self.counts):
            raise ValueError("class_names / per_class / counts 长度不一致")
        return self

    @property
    def total(self) -> int:
        return sum(self.counts)

    def format(self) -> str:
        """对齐的纯文本报告。"""
        width = max(len("class"), *(len(name) for name in self.class_names))
        lines = [f"top-1 accuracy: {self.overall:.4f} ({self.total} images)",
                 f"{'class':<{width}}  {'count':>6}  {'accuracy':>8}"]
        for name, count, accuracy in zip(self.class_names, self.counts, self.per_class):
            shown = "-" if accuracy is None else f"{accuracy:.4f}"
            lines.append(f"{name:<{width}}  {count:>6}  {shown:>8}")
        return "\n".join(lines)


def summarize_predictions(predictions: Sequence[int], labels: Sequence[int],
                          class_names: Sequence[str]) -> AccuracyReport:
    """由预测和真实标签汇总准确率。

    Raises:
        InputValidationError: 长度不一致或为空
    """
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise InputValidationError(f"预测数 {len(predictions)} 与标签数 {len(labels)} 不一致")
    if not labels:
        raise InputValidationError("没有可评估的样本")
    num_classes = len(class_names)
    counts = [0] * num_classes
    hits = [0] * num_classes
    for predicted, label in zip(predictions, labels):
        counts[label] += 1
        hits[label] += int(predicted == label)
    per_class = [hits[c] / counts[c] if counts[c] else None for c in range(num_classes)]
    return AccuracyReport(overall=sum(hits) / len(labels), class_names=list(class_names),
                          per_class=per_class, counts=counts)


@torch.no_grad()
def predict(model: torch.nn.Module, index: DatasetIndex, batch_size: int = EVAL_BATCH_SIZE,
            device: str = "cpu", num_workers: int = 0, strict: bool = True) -> Tuple[List[int], List[int]]:
    """按索引顺序逐批预测。

    Returns:
        (预测类别列表, 真实标签列表)
    """
    dataset = TerrainDataset(index, AugmentationPolicy.evaluation(), strict=strict)
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=num_workers)
    was_training = model.training
    model.eval()
    predictions: List[int] = []
    labels: List[int] = []
    try:
        for images, targets in loader:
            logits = model(images.to(device))
            predictions.extend(logits.argmax(dim=-1).cpu().tolist())
            labels.extend(targets.tolist())
    finally:
        model.train(was_training)
    return predictions, labels


def evaluate_model(model: torch.nn.Module, index: DatasetIndex, batch_size: int = EVAL_BATCH_SIZE,
                   device: str = "cpu", num_workers: int = 0, strict: bool = True) -> AccuracyReport:
    predictions, labels = predict(model, index, batch_size, device, num_workers, strict)
    return summarize_predictions(predictions, labels, index.class_names)


def evaluate(checkpoint: Checkpoint, index: DatasetIndex, device: str = "cpu",
             batch_size: Optional[int] = None) -> AccuracyReport:
    """评估检查点在数据集索引上的准确率。

    Args:
        checkpoint: 训练检查点
        index: 待评估的数据集索引
        device: 运行设备
        batch_size: 批大小，默认取较小的评估批

    Returns:
        AccuracyReport

    Raises:
        ClassCountMismatchError: 检查点类别数与数据集类别数不一致
    """
    if checkpoint.num_classes != index.num_classes:
        raise ClassCountMismatchError(
            f"检查点有 {checkpoint.num_classes} 个类别, 数据集有 {index.num_classes} 个类别")
    model = restore_model(checkpoint, device)
    config = checkpoint.config
    report = evaluate_model(model, index, batch_size or min(config.batch_size, EVAL_BATCH_SIZE),
                            device, config.num_workers, config.data.strict)
    logger.info(f"评估完成: variant={config.variant}, split={index.split}, top-1={report.overall:.4f}")
    return report


@torch.no_grad()
def predict_image(checkpoint: Checkpoint, path: str, top: int = 5,
                  device: str = "cpu") -> List[Tuple[str, float]]:
    """单图推理，返回按概率降序的 (类别名, 概率) 列表。

    Raises:
        DataLoadError: 图像无法读取
    """
    model = restore_model(checkpoint, device).eval()
    image, _ = load_example((path, 0), AugmentationPolicy.evaluation())
    probabilities = torch.softmax(model(image.unsqueeze(0).to(device)), dim=-1)[0].cpu()
    values, indices = probabilities.topk(min(top, checkpoint.num_classes))
    return [(checkpoint.class_names[i], float(p)) for p, i in zip(values.tolist(), indices.tolist())]
