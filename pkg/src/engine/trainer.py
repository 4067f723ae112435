"""
训练循环。

SGD（动量 + 权重衰减），按轮发布 ``epoch_end`` 事件：
- MetricsCsvWriter 追加一行 ``epoch,train_loss,train_acc,test_acc`` 并刷盘
- BestCheckpointKeeper 在测试准确率（无测试集时为训练准确率）创新高时写出 checkpoint_best/

每轮结束都会覆盖 checkpoint_last/，可由 ``resume_from`` 续训。
"""

from __future__ import annotations

import math
import os
from typing import Any, Dict, List, Optional, Tuple

import torch
from pydantic import BaseModel
from torch.utils.data import DataLoader
from tqdm import tqdm

from src.core.base.errors import DatasetError, TrainingDivergedError
from src.data.datasets import DatasetIndex, SeededEpochSampler, TerrainDataset, scan_dataset
from src.data.transforms import AugmentationPolicy
from src.engine.checkpoint import (
    BEST_DIR,
    LAST_DIR,
    Checkpoint,
    load_checkpoint,
    read_best_marker,
    save_checkpoint,
    write_best_marker,
)
from src.engine.config import TrainConfig
from src.engine.evaluator import evaluate_model
from src.model.factory import build_model
from src.model.head import ClassScores, compute_loss
from src.utils.config.manager import get_config, resolve_path
from src.utils.event import EventBus
from src.utils.file_utils import FileUtils
from src.utils.log.manager import get_logger

METRICS_FILE = "metrics.csv"
METRICS_HEADER = "epoch,train_loss,train_acc,test_acc"


class EpochMetrics(BaseModel):
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: Optional[float] = None

    @property
    def score(self) -> float:
        """选择最优检查点所用的准确率。"""
        return self.train_acc if self.test_acc is None else self.test_acc

    def csv_row(self) -> str:
        test = "" if self.test_acc is None else f"{self.test_acc:.6f}"
        return f"{self.epoch},{self.train_loss:.6f},{self.train_acc:.6f},{test}"


class TrainResult(BaseModel):
    """训练结果。

    Attributes:
        output_dir: 输出目录
        last_checkpoint: 最后一轮检查点目录
        best_checkpoint: 最优检查点目录
        best_epoch: 最优轮次
        history: 逐轮指标
    """

    output_dir: str
    last_checkpoint: str
    best_checkpoint: Optional[str]
    best_epoch: Optional[int]
    history: List[EpochMetrics]

    @property
    def final(self) -> EpochMetrics:
        return self.history[-1]


class MetricsCsvWriter:
    """指标 CSV 写入器（epoch_end 订阅者）。"""

    def __init__(self, path: str) -> None:
        self.path = path
        self.files = FileUtils()

    def start(self, history: List[EpochMetrics]) -> None:
        """写表头和已有历史（续训时恢复到检查点所在轮次）。"""
        rows = [METRICS_HEADER] + [metrics.csv_row() for metrics in history]
        self.files.write_text(self.path, "\n".join(rows) + "\n")

    def on_epoch_end(self, metrics: EpochMetrics, checkpoint: Checkpoint) -> None:
        self.files.append_text(self.path, metrics.csv_row() + "\n")


class BestCheckpointKeeper:
    """在 score 严格创新高时保存 checkpoint_best/（epoch_end 订阅者）。"""

    def __init__(self, directory: str) -> None:
        self.directory = directory
        self.best_score: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.logger = get_logger(self.__class__.__name__)
        marker = read_best_marker(directory)
        if marker is not None:
            self.best_score = marker["test_acc"]
            self.best_epoch = int(marker["epoch"])

    def on_epoch_end(self, metrics: EpochMetrics, checkpoint: Checkpoint) -> None:
        if self.best_score is not None and metrics.score <= self.best_score:
            return
        self.best_score, self.best_epoch = metrics.score, metrics.epoch
        save_checkpoint(checkpoint, self.directory)
        write_best_marker(self.directory, metrics.epoch, metrics.score)
        self.logger.info(f"最优检查点更新: epoch={metrics.epoch}, acc={metrics.score:.4f}")


def apply_runtime(settings: Optional[Dict[str, Any]] = None) -> None:
    """应用框架配置中的 runtime 节（线程数、确定性算法）。"""
    runtime = (settings if settings is not None else get_config()).get("runtime", {})
    threads = int(runtime.get("num_threads") or 0)
    if threads > 0:
        torch.set_num_threads(threads)
    if runtime.get("deterministic", True):
        torch.use_deterministic_algorithms(True, warn_only=True)


def resolve_data_root(root: str) -> str:
    """相对且不存在的数据根目录解析到 paths.cache（EOT_TERRAIN_CACHE）之下。"""
    if not root:
        raise DatasetError("未配置数据集根目录 data.root")
    if os.path.isabs(root) or os.path.isdir(root):
        return root
    return resolve_path(root, key="cache")


def load_indices(config: TrainConfig) -> Tuple[DatasetIndex, Optional[DatasetIndex]]:
    """按 data 配置扫描训练集和测试集（测试划分缺失时返回 None）。"""
    data = config.data
    root = resolve_data_root(data.root)
    train_index = scan_dataset(root, data.layout, data.train_split, data.fold)
    try:
        test_index: Optional[DatasetIndex] = scan_dataset(root, data.layout, data.test_split, data.fold)
    except DatasetError as e:
        get_logger(__name__).warning(f"没有可用的测试划分，仅记录训练指标: {e}")
        test_index = None
    return train_index, test_index


def first_non_finite_gradient(model: torch.nn.Module) -> Optional[str]:
    for name, parameter in model.named_parameters():
        if parameter.grad is not None and not torch.isfinite(parameter.grad).all():
            return name
    return None


class Trainer:
    """单进程训练器。

    Attributes:
        config: 训练配置
        output_dir: 输出目录（metrics.csv、checkpoint_last/、checkpoint_best/）
        events: 事件总线，订阅者异常会中止训练
    """

    def __init__(self, config: TrainConfig, output_dir: str, train_index: DatasetIndex,
                 test_index: Optional[DatasetIndex] = None, progress: bool = False) -> None:
        if test_index is not None and test_index.num_classes != train_index.num_classes:
            raise DatasetError(f"训练集 {train_index.num_classes} 类与测试集 {test_index.num_classes} 类不一致")
        self.config = config
        self.output_dir = output_dir
        self.train_index = train_index
        self.test_index = test_index
        self.progress = progress
        self.logger = get_logger(self.__class__.__name__)
        self.device = torch.device(config.device)

        torch.manual_seed(config.seed)
        self.model = build_model(config, train_index.num_classes).to(self.device)
        self.optimizer = torch.optim.SGD(
            [p for p in self.model.parameters() if p.requires_grad],
            lr=config.lr, momentum=config.momentum, weight_decay=config.weight_decay)
        self.dataset = TerrainDataset(train_index, AugmentationPolicy.from_config(config, train=True),
                                      strict=config.data.strict)
        self.sampler = SeededEpochSampler(len(self.dataset), seed=config.seed)
        self.loader = DataLoader(self.dataset, batch_size=config.batch_size, sampler=self.sampler,
                                 num_workers=config.num_workers)
        self.history: List[EpochMetrics] = []
        self.start_epoch = 1

        self.events = EventBus(strict=True)
        self.metrics_writer = MetricsCsvWriter(os.path.join(output_dir, METRICS_FILE))
        self.best_keeper = BestCheckpointKeeper(os.path.join(output_dir, BEST_DIR))
        self.events.subscribe("epoch_end", self.metrics_writer.on_epoch_end)
        self.events.subscribe("epoch_end", self.best_keeper.on_epoch_end)

    def resume(self, directory: str) -> None:
        """从检查点恢复模型、优化器和指标历史，下一轮从检查点轮次 + 1 开始。"""
        checkpoint = load_checkpoint(directory)
        if checkpoint.num_classes != self.train_index.num_classes:
            raise DatasetError(f"检查点有 {checkpoint.num_classes} 个类别, "
                               f"数据集有 {self.train_index.num_classes} 个类别")
        self.model.load_state_dict(checkpoint.model_state)
        self.optimizer.load_state_dict(checkpoint.optimizer_state)
        self.history = [EpochMetrics(**row) for row in checkpoint.history]
        self.start_epoch = checkpoint.epoch + 1
        self.logger.info(f"从检查点续训: {directory}, 下一轮 {self.start_epoch}")

    def learning_rate(self, epoch: int) -> float:
        """第 epoch 轮（从 1 开始）的学习率。"""
        if self.config.lr_step <= 0:
            return self.config.lr
        return self.config.lr * self.config.lr_gamma ** ((epoch - 1) // self.config.lr_step)

    def train_epoch(self, epoch: int) -> Tuple[float, float]:
        """训练一轮，返回 (平均损失, 训练准确率)。

        Raises:
            TrainingDivergedError: 损失或梯度非有限
        """
        for group in self.optimizer.param_groups:
            group["lr"] = self.learning_rate(epoch)
        self.dataset.set_epoch(epoch)
        self.sampler.set_epoch(epoch)
        self.model.train()

        total_loss, correct, seen = 0.0, 0, 0
        batches = tqdm(self.loader, desc=f"epoch {epoch}/{self.config.epochs}", disable=not self.progress,
                       leave=False)
        for images, labels in batches:
            images, labels = images.to(self.device), labels.to(self.device)
            logits = self.model(images)
            scores = ClassScores(logits=logits, probabilities=torch.softmax(logits, dim=-1))
            loss = compute_loss(scores, labels, self.config.loss)

            self.optimizer.zero_grad(set_to_none=True)
            loss.backward()
            if not math.isfinite(loss.item()) or first_non_finite_gradient(self.model):
                raise TrainingDivergedError(first_non_finite_gradient(self.model))
            self.optimizer.step()

            total_loss += loss.item() * labels.numel()
            correct += int((logits.argmax(dim=-1) == labels).sum())
            seen += labels.numel()
        return total_loss / seen, correct / seen

    def fit(self) -> TrainResult:
        """从 start_epoch 训练到 config.epochs。"""
        self.metrics_writer.start(self.history)
        last_dir = os.path.join(self.output_dir, LAST_DIR)
        for epoch in range(self.start_epoch, self.config.epochs + 1):
            train_loss, train_acc = self.train_epoch(epoch)
            test_acc = None
            if self.test_index is not None:
                test_acc = evaluate_model(self.model, self.test_index, device=str(self.device),
                                          num_workers=self.config.num_workers,
                                          strict=self.config.data.strict).overall
            metrics = EpochMetrics(epoch=epoch, train_loss=train_loss, train_acc=train_acc, test_acc=test_acc)
            self.history.append(metrics)
            self.logger.info(f"epoch {epoch}/{self.config.epochs}: loss={train_loss:.4f}, "
                             f"train_acc={train_acc:.4f}, "
                             f"test_acc={'-' if test_acc is None else f'{test_acc:.4f}'}")

            checkpoint = Checkpoint.capture(self.model, self.optimizer, epoch, self.config,
                                            self.train_index.class_names,
                                            [row.model_dump() for row in self.history])
            save_checkpoint(checkpoint, last_dir)
            self.events.publish("epoch_end", metrics, checkpoint)

        best = self.best_keeper.best_epoch
        return TrainResult(
            output_dir=self.output_dir,
            last_checkpoint=last_dir,
            best_checkpoint=self.best_keeper.directory if best is not None else None,
            best_epoch=best,
            history=list(self.history),
        )


def train(config: TrainConfig, output_dir: str, train_index: Optional[DatasetIndex] = None,
          test_index: Optional[DatasetIndex] = None, resume_from: Optional[str] = None,
          progress: bool = False) -> TrainResult:
    """训练一个模型变体。

    Args:
        config: 训练配置
        output_dir: 输出目录
        train_index: 训练集索引，为空时按 config.data 扫描
        test_index: 测试集索引，train_index 为空时一并扫描
        resume_from: 续训检查点目录（通常是 checkpoint_last/）
        progress: 是否显示批进度条

    Returns:
        TrainResult

    Raises:
        DatasetError: 数据集不可用
        TrainingDivergedError: 损失出现 NaN/Inf
        CheckpointError: 续训检查点无效
    """
    logger = get_logger(__name__)
    apply_runtime()
    if train_index is None:
        train_index, test_index = load_indices(config)
    FileUtils().ensure_dir(output_dir)
    trainer = Trainer(config, output_dir, train_index, test_index, progress=progress)
    if resume_from:
        trainer.resume(resume_from)
    result = trainer.fit()
    logger.info(f"训练完成: variant={config.variant}, 最优轮次={result.best_epoch}, 输出目录={output_dir}")
    return result
