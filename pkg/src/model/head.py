"""
融合层、双线性模型与分类头。
"""

from __future__ import annotations

import math
from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.base.errors import ConfigValueError, LabelRangeError, ShapeError

LOSS_KINDS = ("l2", "cross_entropy")


class ClassScores(NamedTuple):
    logits: torch.Tensor
    probabilities: torch.Tensor


def fuse_patches(features: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Vᵀ X：用长度 k 的权重向量聚合 (B, k, F) 块特征为 (B, F)。"""
    if weights.dim() != 1 or features.dim() != 3 or weights.shape[0] != features.shape[1]:
        raise ShapeError("fusion_weights", (features.shape[1] if features.dim() == 3 else "k",),
                         tuple(weights.shape))
    return torch.einsum("k,bkf->bf", weights, features)


class PatchFusion(nn.Module):
    """纹理流和形状流各自一个可学习的块权重向量，初始为 1/k（即均值）。"""

    def __init__(self, num_patches: int) -> None:
        super().__init__()
        self.num_patches = num_patches
        self.texture_weights = nn.Parameter(torch.full((num_patches,), 1.0 / num_patches))
        self.shape_weights = nn.Parameter(torch.full((num_patches,), 1.0 / num_patches))

    def forward(self, texture: torch.Tensor, shape: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return fuse_patches(texture, self.texture_weights), fuse_patches(shape, self.shape_weights)


def bilinear_fuse(t: torch.Tensor, s: torch.Tensor, omega: torch.Tensor) -> torch.Tensor:
    """逐元素加权的外积并按行优先展平：out[i·F + j] = ω_ij · t_i · s_j。

    Args:
        t: (B, F) 纹理向量
        s: (B, F) 形状向量
        omega: (F, F) 逐格门控

    Returns:
        (B, F²)
    """
    if t.shape != s.shape or t.dim() != 2:
        raise ShapeError("shape_vector", tuple(t.shape), tuple(s.shape))
    width = t.shape[-1]
    if tuple(omega.shape) != (width, width):
        raise ShapeError("omega", (width, width), tuple(omega.shape))
    return (omega * t.unsqueeze(-1) * s.unsqueeze(-2)).flatten(1)


class BilinearFusion(nn.Module):
    def __init__(self, features: int) -> None:
        super().__init__()
        self.features = features
        self.omega = nn.Parameter(torch.ones(features, features))

    def forward(self, t: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        return bilinear_fuse(t, s, self.omega)


def normalize_features(f: torch.Tensor, eps: float = 1e-12) -> torch.Tensor:
    """把分类器输入缩放为 L2 范数 √D 的向量，各分量均方为 1，与输入尺度无关。

    Args:
        f: (B, D)
        eps: 范数下限，全零向量保持为零

    Returns:
        (B, D)
    """
    if f.dim() != 2:
        raise ShapeError("classifier_input", ("B", "D"), tuple(f.shape))
    return F.normalize(f, dim=-1, eps=eps) * math.sqrt(f.shape[-1])


class Classifier(nn.Module):
    """两层全连接分类器：in → hidden → C，中间 ReLU。"""

    def __init__(self, in_features: int, num_classes: int, hidden: int = 512) -> None:
        super().__init__()
        self.in_features = in_features
        self.num_classes = num_classes
        self.hidden = nn.Linear(in_features, hidden)
        self.output = nn.Linear(hidden, num_classes)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        if f.dim() != 2 or f.shape[1] != self.in_features:
            raise ShapeError("classifier_input", ("B", self.in_features), tuple(f.shape))
        return self.output(F.relu(self.hidden(f)))


def classify(f: torch.Tensor, classifier: Classifier) -> ClassScores:
    logits = classifier(f)
    return ClassScores(logits=logits, probabilities=torch.softmax(logits, dim=-1))


def compute_loss(scores: ClassScores, labels: torch.Tensor, kind: str = "l2") -> torch.Tensor:
    """计算批损失。

    ``l2``：softmax 概率与 one-hot 目标的平方欧氏距离的批均值；``cross_entropy``：基于 logits 的交叉熵。

    Raises:
        LabelRangeError: 标签不在 [0, C) 内
        ConfigValueError: 未知的损失类型
    """
    num_classes = scores.logits.shape[-1]
    labels = labels.long()
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= num_classes):
        raise LabelRangeError(f"标签超出范围 [0, {num_classes}): {labels.tolist()}")
    if kind == "l2":
        target = F.one_hot(labels, num_classes).to(scores.probabilities.dtype)
        return (scores.probabilities - target).pow(2).sum(dim=-1).mean()
    if kind == "cross_entropy":
        return F.cross_entropy(scores.logits, labels)
    raise ConfigValueError("loss", kind, f"未知的损失类型: {kind}，可选 {LOSS_KINDS}")
