"""
纹理与形状编码模块。

- TextureEncoding：可学习残差编码（码本 + 平滑因子 + 软分配），得到无序纹理特征
- ShapeEncoding：空间平均池化 + 仿射映射，得到保留布局线索的形状特征

两者都接受任意前导维度的 (..., C, H, W) 描述子块，因此同一层既可用于整张特征图，也可用于逐块输入。
"""

from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn as nn

from src.core.base.errors import ConfigValueError, ShapeError


def _descriptors(x: torch.Tensor, channels: int) -> torch.Tensor:
    # (..., C, H, W) -> (..., H*W, C)
    if x.dim() < 3 or x.shape[-3] != channels:
        raise ShapeError("descriptors", ("...", channels, "H", "W"), tuple(x.shape))
    return x.flatten(-2).transpose(-1, -2)


class TextureEncoding(nn.Module):
    """可学习残差编码层。

    对每个描述子 δ_i 与码字 λ_j 的残差 r_ij = δ_i − λ_j，软分配权重
    w_ij = softmax_j(−s_j·‖r_ij‖²)，码字编码 t_j = Σ_i w_ij·r_ij；
    N 个编码按码字顺序拼接为 N·C 维向量，再经全连接层映射到 F 维。

    Args:
        channels: 描述子维度 C
        num_codes: 码字个数 N
        out_features: 输出特征维度 F
    """

    def __init__(self, channels: int, num_codes: int, out_features: Optional[int]) -> None:
        super().__init__()
        if num_codes < 1:
            raise ConfigValueError("dims.codes", num_codes, f"码字个数必须 ≥ 1, 实际 {num_codes}")
        self.channels = channels
        self.num_codes = num_codes
        self.out_features = out_features
        self.codewords = nn.Parameter(torch.empty(num_codes, channels))
        self.smoothing = nn.Parameter(torch.empty(num_codes))
        # out_features=None 时不投影，直接输出 N·C 维编码
        self.projection: Optional[nn.Linear] = None
        if out_features is not None:
            self.projection = nn.Linear(channels * num_codes, out_features)
        self.reset_parameters()

    @property
    def encoded_features(self) -> int:
        return self.out_features if self.out_features is not None else self.channels * self.num_codes

    def reset_parameters(self) -> None:
        bound = 1.0 / math.sqrt(self.num_codes)
        nn.init.uniform_(self.codewords, -bound, bound)
        nn.init.uniform_(self.smoothing, 0.0, 1.0)
        if self.projection is not None:
            self.projection.reset_parameters()

    def residuals(self, descriptors: torch.Tensor) -> torch.Tensor:
        """(..., M, C) -> (..., M, N, C)"""
        return descriptors.unsqueeze(-2) - self.codewords

    def assignment_weights(self, x: torch.Tensor) -> torch.Tensor:
        """软分配矩阵 (..., M, N)，每行对码字求和为 1。"""
        residuals = self.residuals(_descriptors(x, self.channels))
        return self._soft_assign(residuals)

    def _soft_assign(self, residuals: torch.Tensor) -> torch.Tensor:
        scaled_l2 = self.smoothing * residuals.pow(2).sum(dim=-1)
        return torch.softmax(-scaled_l2, dim=-1)

    def aggregate(self, x: torch.Tensor) -> torch.Tensor:
        """聚合后的码字编码 (..., N, C)。"""
        residuals = self.residuals(_descriptors(x, self.channels))
        weights = self._soft_assign(residuals)
        return (weights.unsqueeze(-1) * residuals).sum(dim=-3)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        """投影前的 N·C 维编码向量（码字优先拼接）。"""
        return self.aggregate(x).flatten(-2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        encoded = self.encode(x)
        return encoded if self.projection is None else self.projection(encoded)

    def extra_repr(self) -> str:
        return f"channels={self.channels}, num_codes={self.num_codes}, out_features={self.out_features}"


class ShapeEncoding(nn.Module):
    """形状编码层：对 (..., C, H, W) 做空间平均后线性映射到 F 维。"""

    def __init__(self, channels: int, out_features: int) -> None:
        super().__init__()
        self.channels = channels
        self.out_features = out_features
        self.projection = nn.Linear(channels, out_features)

    def pool(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() < 3 or x.shape[-3] != self.channels:
            raise ShapeError("descriptors", ("...", self.channels, "H", "W"), tuple(x.shape))
        return x.mean(dim=(-2, -1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.projection(self.pool(x))


def encode_texture(patches: torch.Tensor, encoder: TextureEncoding) -> torch.Tensor:
    """(B, k, C, 3, 3) -> (B, k, F)"""
    return encoder(patches)


def encode_shape(patches: torch.Tensor, encoder: ShapeEncoding) -> torch.Tensor:
    """(B, k, C, 3, 3) -> (B, k, F)"""
    return encoder(patches)
