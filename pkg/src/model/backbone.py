"""
骨干网络模块。

把 ImageNet 风格的残差网络（去掉全局池化和分类头）包装为特征提取器，
256×256 输入得到 (B, 512, 8, 8) 的潜在特征图 Z。
"""

from __future__ import annotations

import math
import os
from typing import Any, Dict, Mapping, Optional, Tuple

import torch
import torch.nn as nn
from torchvision.models import resnet18, resnet50

from src.core.base.errors import ConfigValueError, ShapeError, WeightsLoadError
from src.utils.config.manager import resolve_path
from src.utils.log.manager import get_logger

logger = get_logger(__name__)

INPUT_SIZE = 256
FEATURE_CHANNELS = 512
FEATURE_GRID = 8
SUPPORTED_DEPTHS: Tuple[int, ...] = (18, 50)

_TRUNK_LAYERS = ("conv1", "bn1", "relu", "maxpool", "layer1", "layer2", "layer3", "layer4")


class ResNetBackbone(nn.Module):
    """残差网络特征提取器。

    depth=50 时末端追加 1×1 卷积把 2048 通道压缩到 512，使下游维度与 depth=18 一致。

    Attributes:
        depth: 残差网络深度（18 或 50）
        trunk: 去掉 avgpool/fc 的卷积主干
        reduce: depth=50 时的 1×1 通道压缩卷积，否则为 None
    """

    def __init__(self, depth: int = 18, freeze: bool = False) -> None:
        super().__init__()
        if depth not in SUPPORTED_DEPTHS:
            raise ConfigValueError("backbone.depth", depth, f"不支持的残差网络深度: {depth}，可选 {SUPPORTED_DEPTHS}")
        self.depth = depth
        base = resnet18(weights=None) if depth == 18 else resnet50(weights=None)
        self.trunk = nn.Sequential(*(getattr(base, name) for name in _TRUNK_LAYERS))
        self.trunk_channels = 512 if depth == 18 else 2048
        self.reduce: Optional[nn.Conv2d] = None
        if depth == 50:
            self.reduce = nn.Conv2d(self.trunk_channels, FEATURE_CHANNELS, kernel_size=1)
        self.reset_parameters()
        self.frozen = False
        if freeze:
            self.freeze()

    def reset_parameters(self) -> None:
        """随机初始化：卷积和全连接权重使用按 fan_in 缩放的均匀分布，BN 复位为恒等。"""
        for module in self.modules():
            if isinstance(module, (nn.Conv2d, nn.Linear)):
                nn.init.kaiming_uniform_(module.weight, a=math.sqrt(5), mode="fan_in")
                if module.bias is not None:
                    fan_in = module.weight[0].numel()
                    bound = 1.0 / math.sqrt(fan_in)
                    nn.init.uniform_(module.bias, -bound, bound)
            elif isinstance(module, nn.BatchNorm2d):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)
                module.reset_running_stats()

    def freeze(self) -> None:
        """停止骨干梯度并固定 BN 统计量。"""
        for parameter in self.parameters():
            parameter.requires_grad_(False)
        self.frozen = True
        self.eval()

    def train(self, mode: bool = True) -> "ResNetBackbone":
        # 冻结后始终保持 eval
        return super().train(mode and not self.frozen)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.extract_features(images)

    def extract_features(self, images: torch.Tensor) -> torch.Tensor:
        """提取潜在特征图。

        Args:
            images: (B, 3, 256, 256) 的归一化图像批

        Returns:
            (B, 512, 8, 8) 特征图

        Raises:
            ShapeError: 输入不是 (B, 3, 256, 256)
        """
        if images.dim() != 4 or images.shape[1] != 3 or tuple(images.shape[2:]) != (INPUT_SIZE, INPUT_SIZE):
            raise ShapeError("images", ("B", 3, INPUT_SIZE, INPUT_SIZE), tuple(images.shape))
        z = self.trunk(images)
        if self.reduce is not None:
            z = self.reduce(z)
        return z

    def manifest(self) -> Dict[str, int]:
        return {
            "depth": self.depth,
            "feature_channels": self.trunk_channels,
            "out_channels": FEATURE_CHANNELS,
        }


def extract_features(images: torch.Tensor, backbone: ResNetBackbone) -> torch.Tensor:
    return backbone.extract_features(images)


def save_weights(backbone: ResNetBackbone, path: str) -> None:
    """把骨干参数连同清单记录写入权重容器文件。

    Args:
        backbone: 骨干网络
        path: 输出文件路径
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    torch.save({"manifest": backbone.manifest(), "state_dict": backbone.state_dict()}, path)
    logger.info(f"骨干权重已保存: {path} (depth={backbone.depth})")


def _infer_depth(state_dict: Mapping[str, Any]) -> int:
    # 瓶颈块才有 conv3
    return 50 if any(".conv3." in key for key in state_dict) else 18


def _from_torchvision(state_dict: Mapping[str, Any]) -> Dict[str, Any]:
    """把 torchvision ResNet 的键名映射到 trunk 序号，丢弃 fc.*。"""
    index = {name: str(i) for i, name in enumerate(_TRUNK_LAYERS)}
    converted: Dict[str, Any] = {}
    for key, value in state_dict.items():
        head, _, rest = key.partition(".")
        if head == "fc":
            continue
        if head not in index:
            raise WeightsLoadError(f"无法识别的权重键: {key}")
        converted[f"trunk.{index[head]}.{rest}"] = value
    return converted


def load_pretrained(source: str, depth: int, freeze: bool = False) -> ResNetBackbone:
    """从权重文件构建骨干网络。

    支持两种格式：``save_weights`` 写出的带清单容器，以及裸的 torchvision ResNet state_dict。

    Args:
        source: 权重文件路径
        depth: 声明的网络深度（18 或 50）
        freeze: 加载后是否冻结

    Returns:
        已加载参数的 ResNetBackbone

    Raises:
        WeightsLoadError: 文件不存在、无法解析、深度不匹配或参数键不一致
    """
    if not os.path.isfile(source):
        raise WeightsLoadError(f"权重文件不存在: {source}")
    try:
        payload = torch.load(source, map_location="cpu", weights_only=True)
    except Exception as e:
        raise WeightsLoadError(f"权重文件无法解析: {source}", cause=e) from e
    if not isinstance(payload, Mapping):
        raise WeightsLoadError(f"权重文件格式无效: {source}")

    if "manifest" in payload and "state_dict" in payload:
        manifest = payload["manifest"]
        stored_depth = int(manifest.get("depth", -1))
        if stored_depth != depth:
            raise WeightsLoadError(f"权重深度不匹配: 文件为 {stored_depth}, 声明为 {depth}")
        if int(manifest.get("out_channels", -1)) != FEATURE_CHANNELS:
            raise WeightsLoadError(f"权重输出通道数无效: {manifest.get('out_channels')}")
        state_dict = payload["state_dict"]
        bare = False
    else:
        stored_depth = _infer_depth(payload)
        if stored_depth != depth:
            raise WeightsLoadError(f"权重深度不匹配: 推断为 {stored_depth}, 声明为 {depth}")
        state_dict = _from_torchvision(payload)
        bare = True

    backbone = ResNetBackbone(depth=depth)
    try:
        outcome = backbone.load_state_dict(state_dict, strict=False)
    except RuntimeError as e:
        raise WeightsLoadError(f"权重参数与 depth={depth} 的结构不一致: {source}", cause=e) from e
    # 裸 torchvision 权重不含 1×1 压缩卷积，只有 reduce.* 允许缺失并保留随机初始化
    missing = [key for key in outcome.missing_keys if not (bare and key.startswith("reduce."))]
    if missing or outcome.unexpected_keys:
        raise WeightsLoadError(f"权重参数与 depth={depth} 的结构不一致: {source}，"
                               f"缺失 {len(missing)} 个键 (如 {missing[:3]})，多余 {outcome.unexpected_keys[:3]}")
    if freeze:
        backbone.freeze()
    logger.info(f"已加载骨干权重: {source} (depth={depth})")
    return backbone


def build_backbone(depth: int = 18, weights: Optional[str] = None, freeze: bool = False) -> ResNetBackbone:
    """按配置构建骨干：给出权重路径则加载，否则随机初始化。

    相对路径在当前目录下不存在时解析到 paths.cache（EOT_TERRAIN_CACHE）之下。
    """
    if weights:
        if not os.path.isabs(weights) and not os.path.isfile(weights):
            weights = resolve_path(weights, key="cache")
        return load_pretrained(weights, depth, freeze=freeze)
    logger.debug(f"未提供预训练权重，使用随机初始化 (depth={depth})")
    return ResNetBackbone(depth=depth, freeze=freeze)
