"""
检查点读写。

检查点目录结构::

    checkpoint_best/
    ├── config.txt   # TrainConfig 快照（key=value）
    ├── state.pt     # 模型参数、优化器状态、轮次、类别名、指标历史
    └── best         # 仅最优检查点：epoch=<n> / test_acc=<acc>
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import torch

from src.core.base.errors import CheckpointError, ConfigurationError
from src.engine.config import TrainConfig
from src.utils.file_utils import FileUtils
from src.utils.log.manager import get_logger

CONFIG_FILE = "config.txt"
STATE_FILE = "state.pt"
BEST_MARKER = "best"
LAST_DIR = "checkpoint_last"
BEST_DIR = "checkpoint_best"

logger = get_logger(__name__)


@dataclass
class Checkpoint:
    """一次训练状态的完整快照。"""

    config: TrainConfig
    class_names: List[str]
    model_state: Dict[str, torch.Tensor]
    optimizer_state: Dict[str, Any]
    epoch: int
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @classmethod
    def capture(cls, model: torch.nn.Module, optimizer: torch.optim.Optimizer, epoch: int,
                config: TrainConfig, class_names: List[str],
                history: List[Dict[str, float]]) -> "Checkpoint":
        """复制当前模型和优化器状态（张量克隆到 CPU，后续训练不影响快照）。"""
        model_state = {key: value.detach().cpu().clone() for key, value in model.state_dict().items()}
        optimizer_state = _clone(optimizer.state_dict())
        return cls(config=config, class_names=list(class_names), model_state=model_state,
                   optimizer_state=optimizer_state, epoch=epoch, history=[dict(row) for row in history])


def _clone(value: Any) -> Any:
    if isinstance(value, torch.Tensor):
        return value.detach().cpu().clone()
    if isinstance(value, dict):
        return {key: _clone(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_clone(item) for item in value]
    return value


def save_checkpoint(checkpoint: Checkpoint, directory: str) -> str:
    """把检查点写入目录（已存在的同名文件被覆盖）。

    Returns:
        检查点目录路径
    """
    files = FileUtils()
    files.ensure_dir(directory)
    files.write_text(os.path.join(directory, CONFIG_FILE), checkpoint.config.dumps())
    payload = {
        "class_names": checkpoint.class_names,
        "epoch": checkpoint.epoch,
        "history": checkpoint.history,
        "model": checkpoint.model_state,
        "optimizer": checkpoint.optimizer_state,
    }
    torch.save(payload, os.path.join(directory, STATE_FILE))
    logger.debug(f"检查点已保存: {directory} (epoch={checkpoint.epoch})")
    return directory


def load_checkpoint(directory: str) -> Checkpoint:
    """从目录读取检查点。

    Raises:
        CheckpointError: 目录或文件缺失、内容无法解析
    """
    config_path = os.path.join(directory, CONFIG_FILE)
    state_path = os.path.join(directory, STATE_FILE)
    for path in (config_path, state_path):
        if not os.path.isfile(path):
            raise CheckpointError(f"检查点文件缺失: {path}")
    try:
        config = TrainConfig.loads(FileUtils().read_text(config_path))
    except ConfigurationError as e:
        raise CheckpointError(f"检查点配置快照无效: {config_path}", cause=e) from e
    try:
        payload = torch.load(state_path, map_location="cpu", weights_only=True)
        return Checkpoint(
            config=config,
            class_names=list(payload["class_names"]),
            model_state=payload["model"],
            optimizer_state=payload["optimizer"],
            epoch=int(payload["epoch"]),
            history=list(payload["history"]),
        )
    except Exception as e:
        raise CheckpointError(f"检查点状态文件无法解析: {state_path}", cause=e) from e


def restore_model(checkpoint: Checkpoint, device: str = "cpu") -> torch.nn.Module:
    """按检查点配置重建模型并载入参数（不再读取预训练权重文件）。"""
    from src.model.factory import build_model

    config = checkpoint.config.updated(backbone__weights=None)
    model = build_model(config, checkpoint.num_classes)
    try:
        model.load_state_dict(checkpoint.model_state)
    except RuntimeError as e:
        raise CheckpointError(f"检查点参数与变体 {config.variant} 的结构不一致", cause=e) from e
    return model.to(device)


def write_best_marker(directory: str, epoch: int, test_acc: float) -> None:
    FileUtils().write_text(os.path.join(directory, BEST_MARKER), f"epoch={epoch}\ntest_acc={test_acc!r}\n")


def read_best_marker(directory: str) -> Optional[Dict[str, float]]:
    path = os.path.join(directory, BEST_MARKER)
    if not os.path.isfile(path):
        return None
    marker: Dict[str, float] = {}
    for line in FileUtils().read_lines(path):
        key, _, value = line.partition("=")
        marker[key.strip()] = float(value)
    return marker
