"""
模型变体工厂。

| 变体     | 分块 | EoT | 域内 | 域间 | 融合 + 双线性 |
|----------|------|-----|------|------|---------------|
| deep_ten | 否   | 否  | 否   | 否   | 否（整图纹理编码直接分类） |
| b1       | 否   | 否  | 否   | 否   | 双线性（整图纹理 + 形状） |
| b2       | 是   | 否  | 否   | 否   | 是 |
| b3       | 是   | 否  | 1 轮 | 否   | 是 |
| b4       | 是   | 是  | 否   | 1 轮 | 是 |
| full     | 是   | 是  | rounds 轮（默认 2） | 是 |

所有变体的分类器输入先经 normalize_features 缩放到固定范数。
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import torch
import torch.nn as nn

from src.core.base.errors import ConfigValueError
from src.engine.config import VARIANTS, TrainConfig
from src.model.backbone import FEATURE_CHANNELS, build_backbone
from src.model.encoding import ShapeEncoding, TextureEncoding
from src.model.eot import EoTWeights, ExtentOfTexture, extract_patches
from src.model.graph import MessagePassingStack
from src.model.head import BilinearFusion, Classifier, ClassScores, PatchFusion, normalize_features
from src.utils.log.manager import get_logger

logger = get_logger(__name__)

VARIANT_STAGES: Dict[str, Tuple[str, ...]] = {
    "deep_ten": ("backbone", "texture_encoding", "classifier"),
    "b1": ("backbone", "texture_encoding", "shape_encoding", "bilinear", "classifier"),
    "b2": ("backbone", "patches", "texture_encoding", "shape_encoding", "fusion", "bilinear", "classifier"),
    "b3": ("backbone", "patches", "texture_encoding", "shape_encoding", "intra_domain", "fusion",
           "bilinear", "classifier"),
    "b4": ("backbone", "patches", "eot", "texture_encoding", "shape_encoding", "inter_domain", "fusion",
           "bilinear", "classifier"),
    "full": ("backbone", "patches", "eot", "texture_encoding", "shape_encoding", "intra_domain",
             "inter_domain", "fusion", "bilinear", "classifier"),
}


class TerrainRecognizer(nn.Module):
    """按变体阶段表组装的地形/纹理识别模型。

    Attributes:
        variant: 变体名
        stages: 该变体包含的阶段名元组（可用 has_stage 查询）
    """

    def __init__(self, variant: str, num_classes: int, backbone: nn.Module,
                 num_codes: int = 8, features: int = 64, heads: int = 4, merge: str = "average",
                 rounds: int = 2, classifier_hidden: int = 512, num_patches: int = 36,
                 eot_grad: bool = False, channels: int = FEATURE_CHANNELS) -> None:
        super().__init__()
        if variant not in VARIANT_STAGES:
            raise ConfigValueError("variant", variant, f"未知的模型变体: {variant}，可选 {VARIANTS}")
        if num_classes < 2:
            raise ConfigValueError("num_classes", num_classes, f"类别数必须 ≥ 2, 实际 {num_classes}")
        self.variant = variant
        self.stages = VARIANT_STAGES[variant]
        self.num_classes = num_classes

        # 梯度检查等场景可传入 nn.Identity 并直接调用 forward_features
        self.backbone = backbone
        self.eot: Optional[ExtentOfTexture] = ExtentOfTexture(grad=eot_grad) if self.has_stage("eot") else None
        self.shape_encoder: Optional[ShapeEncoding] = None
        self.message_passing: Optional[MessagePassingStack] = None
        self.fusion: Optional[PatchFusion] = None
        self.bilinear: Optional[BilinearFusion] = None

        if variant == "deep_ten":
            self.texture_encoder = TextureEncoding(channels, num_codes, out_features=None)
            self.classifier = Classifier(self.texture_encoder.encoded_features, num_classes, classifier_hidden)
            return

        self.texture_encoder = TextureEncoding(channels, num_codes, features)
        self.shape_encoder = ShapeEncoding(channels, features)
        intra, inter = self.has_stage("intra_domain"), self.has_stage("inter_domain")
        if intra or inter:
            self.message_passing = MessagePassingStack.build(
                features, rounds if variant == "full" else 1, heads, merge, intra=intra, inter=inter)
        if self.has_stage("fusion"):
            self.fusion = PatchFusion(num_patches)
        self.bilinear = BilinearFusion(features)
        self.classifier = Classifier(features * features, num_classes, classifier_hidden)

    def has_stage(self, stage: str) -> bool:
        return stage in self.stages

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, 256, 256) -> (B, C) logits"""
        return self.forward_features(self.backbone(images))

    def forward_features(self, z: torch.Tensor) -> torch.Tensor:
        """从骨干特征图 (B, 512, 8, 8) 开始前向，返回 logits。"""
        return self._run(z, None)

    def scores(self, images: torch.Tensor) -> ClassScores:
        logits = self(images)
        return ClassScores(logits=logits, probabilities=torch.softmax(logits, dim=-1))

    def trace(self, images: torch.Tensor) -> Dict[str, torch.Tensor]:
        """前向并记录各阶段中间结果（用于形状契约检查）。"""
        record: Dict[str, torch.Tensor] = {}
        z = self.backbone(images)
        record["feature_map"] = z
        self._run(z, record)
        return record

    def _run(self, z: torch.Tensor, record: Optional[Dict[str, torch.Tensor]]) -> torch.Tensor:
        def keep(name: str, value: torch.Tensor) -> None:
            if record is not None:
                record[name] = value

        if self.variant == "deep_ten":
            encoded = self.texture_encoder(z)
            keep("texture", encoded)
            normalized = normalize_features(encoded)
            keep("normalized", normalized)
            logits = self.classifier(normalized)
            keep("logits", logits)
            return logits

        assert self.shape_encoder is not None and self.bilinear is not None
        if self.has_stage("patches"):
            source = extract_patches(z)
            keep("patches", source)
        else:
            source = z

        eot: Optional[EoTWeights] = None
        if self.eot is not None:
            eot = self.eot(source)
            keep("eot_texture", eot.texture)
            keep("eot_shape", eot.shape)

        texture = self.texture_encoder(source)
        shape = self.shape_encoder(source)
        keep("texture", texture)
        keep("shape", shape)

        if self.message_passing is not None:
            texture, shape = self.message_passing(texture, shape, eot)
            keep("texture_passed", texture)
            keep("shape_passed", shape)

        if self.fusion is not None:
            texture, shape = self.fusion(texture, shape)
            keep("texture_fused", texture)
            keep("shape_fused", shape)

        fused = self.bilinear(texture, shape)
        keep("bilinear", fused)
        normalized = normalize_features(fused)
        keep("normalized", normalized)
        logits = self.classifier(normalized)
        keep("logits", logits)
        return logits


def build_model(config: TrainConfig, num_classes: int) -> TerrainRecognizer:
    """按配置构建模型变体。

    Args:
        config: 训练配置（variant、dims、backbone、eot_grad）
        num_classes: 类别数 C

    Returns:
        TerrainRecognizer

    Raises:
        ConfigValueError: 未知变体或类别数 < 2
    """
    if config.variant not in VARIANT_STAGES:
        raise ConfigValueError("variant", config.variant, f"未知的模型变体: {config.variant}")
    dims = config.dims
    backbone = build_backbone(config.backbone.depth, config.backbone.weights, config.backbone.freeze)
    model = TerrainRecognizer(
        config.variant,
        num_classes,
        backbone,
        num_codes=dims.codes,
        features=dims.features,
        heads=dims.heads,
        merge=dims.merge,
        rounds=dims.rounds,
        classifier_hidden=dims.classifier_hidden,
        num_patches=dims.patches,
        eot_grad=config.eot_grad,
    )
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    logger.info(f"已构建模型变体 {config.variant}: 阶段={'→'.join(model.stages)}, 可训练参数={trainable}")
    return model
