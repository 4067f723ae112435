"""
纹理程度（Extent-of-Texture）模块。

在 8×8 特征图上以 3×3 窗口、步长 1 滑动取出 36 个重叠块，
并按块内均值向量与中心向量的余弦相似度估计每个块的纹理程度 T（形状程度 S = 1 − T）。
"""

from __future__ import annotations

from typing import NamedTuple

import torch
import torch.nn as nn

from src.core.base.errors import ShapeError

T_MIN = 0.5
T_MAX = 0.9
GRID_SIZE = 8
WINDOW = 3
STRIDE = 1
NUM_PATCHES = ((GRID_SIZE - WINDOW) // STRIDE + 1) ** 2
CENTER = WINDOW // 2


class EoTWeights(NamedTuple):
    """每个块的纹理/形状权重，均为 (B, k)。"""

    texture: torch.Tensor
    shape: torch.Tensor


def extract_patches(z: torch.Tensor) -> torch.Tensor:
    """把特征图切成重叠块。

    Args:
        z: (B, C, 8, 8) 特征图

    Returns:
        (B, 36, C, 3, 3)，按窗口左上角行优先排列

    Raises:
        ShapeError: 空间网格不是 8×8
    """
    if z.dim() != 4 or tuple(z.shape[2:]) != (GRID_SIZE, GRID_SIZE):
        raise ShapeError("feature_map", ("B", "C", GRID_SIZE, GRID_SIZE), tuple(z.shape))
    batch, channels = z.shape[:2]
    windows = z.unfold(2, WINDOW, STRIDE).unfold(3, WINDOW, STRIDE)  # (B, C, 6, 6, 3, 3)
    windows = windows.permute(0, 2, 3, 1, 4, 5)
    return windows.reshape(batch, -1, channels, WINDOW, WINDOW)


def reassemble_centers(patches: torch.Tensor) -> torch.Tensor:
    """取出每个块的中心向量，重新排成 (B, C, 6, 6) 的网格（即原特征图内部 6×6）。"""
    batch, k, channels = patches.shape[:3]
    side = int(round(k ** 0.5))
    if side * side != k:
        raise ShapeError("patches", ("B", "square k", "C", WINDOW, WINDOW), tuple(patches.shape))
    centers = patches[..., CENTER, CENTER]  # (B, k, C)
    return centers.reshape(batch, side, side, channels).permute(0, 3, 1, 2)


def _safe_cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    # 任一范数为零时余弦取 0
    dot = (a * b).sum(dim=-1)
    norms = a.norm(dim=-1) * b.norm(dim=-1)
    positive = norms > 0
    safe_norms = torch.where(positive, norms, torch.ones_like(norms))
    return torch.where(positive, dot / safe_norms, torch.zeros_like(dot))


def compute_eot(patches: torch.Tensor, grad: bool = False) -> EoTWeights:
    """计算每个块的纹理程度和形状程度。

    T = clamp((cos(mean, center) − 0.5) / (0.9 − 0.5), 0, 1)，S = 1 − T。

    Args:
        patches: (B, k, C, 3, 3)
        grad: 是否让余弦路径参与反向传播，默认不参与

    Returns:
        EoTWeights(texture, shape)
    """
    if patches.dim() != 5 or tuple(patches.shape[3:]) != (WINDOW, WINDOW):
        raise ShapeError("patches", ("B", "k", "C", WINDOW, WINDOW), tuple(patches.shape))
    source = patches if grad else patches.detach()
    mean = source.mean(dim=(-2, -1))
    center = source[..., CENTER, CENTER]
    cosine = _safe_cosine(mean, center)
    texture = ((cosine - T_MIN) / (T_MAX - T_MIN)).clamp(0.0, 1.0)
    return EoTWeights(texture=texture, shape=1.0 - texture)


class ExtentOfTexture(nn.Module):
    """compute_eot 的层封装，``grad`` 对应配置项 eot_grad。"""

    def __init__(self, grad: bool = False) -> None:
        super().__init__()
        self.grad = grad

    def forward(self, patches: torch.Tensor) -> EoTWeights:
        return compute_eot(patches, grad=self.grad)

    def extra_repr(self) -> str:
        return f"t_min={T_MIN}, t_max={T_MAX}, grad={self.grad}"
