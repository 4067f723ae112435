"""
块图上的消息传递。

- GraphAttention：完全图（含自环）上的多头图注意力，用于纹理流或形状流内部的信息交换
- InterDomainExchange：以 EoT 权重汇总对方域的代表向量，与本块特征拼接后映射回 F 维
- MessagePassingStack：若干轮“域内 + 域间”传递的串联，每轮独立参数
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.base.errors import ConfigValueError, ShapeError
from src.model.eot import EoTWeights

MERGE_MODES = ("average", "concat_project")


def _check_features(name: str, features: torch.Tensor, width: int) -> None:
    if features.dim() != 3 or features.shape[-1] != width:
        raise ShapeError(name, ("B", "k", width), tuple(features.shape))


class GraphAttention(nn.Module):
    """多头图注意力层（完全图，节点关注包括自身在内的所有块）。

    每个头：e_ij = LeakyReLU(aᵀ[W x_i ‖ W x_j])，α_ij = softmax_j(e_ij)，h_i = Σ_j α_ij W x_j。
    ``average`` 合并方式对各头取平均后 ReLU；``concat_project`` 拼接各头后线性映射回 F 再 ReLU。

    Args:
        features: 节点特征维度 F
        heads: 注意力头数
        merge: 多头合并方式
        negative_slope: LeakyReLU 负斜率
    """

    def __init__(self, features: int, heads: int = 4, merge: str = "average",
                 negative_slope: float = 0.2) -> None:
        super().__init__()
        if heads < 1:
            raise ConfigValueError("dims.heads", heads, f"注意力头数必须 ≥ 1, 实际 {heads}")
        if merge not in MERGE_MODES:
            raise ConfigValueError("dims.merge", merge, f"未知的多头合并方式: {merge}，可选 {MERGE_MODES}")
        self.features = features
        self.heads = heads
        self.merge = merge
        self.negative_slope = negative_slope
        self.transform = nn.Parameter(torch.empty(heads, features, features))
        self.attention_vector = nn.Parameter(torch.empty(heads, 2 * features))
        self.project: Optional[nn.Linear] = None
        if merge == "concat_project":
            self.project = nn.Linear(heads * features, features)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for head in range(self.heads):
            nn.init.xavier_uniform_(self.transform[head])
        nn.init.xavier_uniform_(self.attention_vector)
        if self.project is not None:
            self.project.reset_parameters()

    def _transformed(self, x: torch.Tensor) -> torch.Tensor:
        # (B, k, F) -> (B, heads, k, F)，第 h 个头为 W_h x
        return torch.einsum("hgf,bkf->bhkg", self.transform, x)

    def _attention(self, wx: torch.Tensor) -> torch.Tensor:
        source = torch.einsum("bhkf,hf->bhk", wx, self.attention_vector[:, : self.features])
        target = torch.einsum("bhkf,hf->bhk", wx, self.attention_vector[:, self.features:])
        scores = F.leaky_relu(source.unsqueeze(-1) + target.unsqueeze(-2), self.negative_slope)
        return torch.softmax(scores, dim=-1)

    def attention(self, x: torch.Tensor) -> torch.Tensor:
        """注意力矩阵 (B, heads, k, k)，每行求和为 1。"""
        _check_features("features", x, self.features)
        return self._attention(self._transformed(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_features("features", x, self.features)
        wx = self._transformed(x)
        messages = self._attention(wx) @ wx  # (B, heads, k, F)
        if self.project is None:
            merged = messages.mean(dim=1)
        else:
            merged = self.project(messages.permute(0, 2, 1, 3).flatten(-2))
        return F.relu(merged)

    def extra_repr(self) -> str:
        return (f"features={self.features}, heads={self.heads}, merge={self.merge}, "
                f"negative_slope={self.negative_slope}")


def domain_summary(features: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """按块权重对块特征加权求和。

    Args:
        features: (B, k, F)
        weights: (B, k) 或 (k,)

    Returns:
        (B, F) 代表向量
    """
    if features.dim() != 3:
        raise ShapeError("features", ("B", "k", "F"), tuple(features.shape))
    batch, blocks = features.shape[0], features.shape[1]
    batch_mismatch = weights.dim() == 2 and weights.shape[0] != batch
    if weights.dim() not in (1, 2) or weights.shape[-1] != blocks or batch_mismatch:
        raise ShapeError("weights", (batch, blocks), tuple(weights.shape))
    if weights.dim() == 1:
        weights = weights.expand(batch, -1)
    return torch.einsum("bk,bkf->bf", weights, features)


class InterDomainExchange(nn.Module):
    """EoT 引导的域间消息传递。

    r_s = Σ S_j·e_sj，r_t = Σ T_j·e_tj；T'_i = W_t[e_ti ‖ r_s]，S'_i = W_s[e_si ‖ r_t]。
    """

    def __init__(self, features: int) -> None:
        super().__init__()
        self.features = features
        self.texture_mix = nn.Linear(2 * features, features)
        self.shape_mix = nn.Linear(2 * features, features)

    def forward(self, texture: torch.Tensor, shape: torch.Tensor,
                eot: EoTWeights) -> Tuple[torch.Tensor, torch.Tensor]:
        _check_features("texture", texture, self.features)
        _check_features("shape", shape, self.features)
        if texture.shape != shape.shape:
            raise ShapeError("shape", tuple(texture.shape), tuple(shape.shape))
        shape_summary = domain_summary(shape, eot.shape)
        texture_summary = domain_summary(texture, eot.texture)
        k = texture.shape[1]
        texture_out = self.texture_mix(torch.cat([texture, shape_summary.unsqueeze(1).expand(-1, k, -1)], dim=-1))
        shape_out = self.shape_mix(torch.cat([shape, texture_summary.unsqueeze(1).expand(-1, k, -1)], dim=-1))
        return texture_out, shape_out


class MessagePassingRound(nn.Module):
    """一轮消息传递：可选的域内注意力（两流各自独立参数），再接可选的域间交换。"""

    def __init__(self, features: int, heads: int = 4, merge: str = "average",
                 intra: bool = True, inter: bool = True) -> None:
        super().__init__()
        if not (intra or inter):
            raise ConfigValueError("round", "empty", "一轮消息传递至少需要域内或域间中的一种")
        self.texture_attention = GraphAttention(features, heads, merge) if intra else None
        self.shape_attention = GraphAttention(features, heads, merge) if intra else None
        self.exchange = InterDomainExchange(features) if inter else None

    @property
    def has_intra(self) -> bool:
        return self.texture_attention is not None

    @property
    def has_inter(self) -> bool:
        return self.exchange is not None

    def forward(self, texture: torch.Tensor, shape: torch.Tensor,
                eot: Optional[EoTWeights] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        if self.texture_attention is not None and self.shape_attention is not None:
            texture = self.texture_attention(texture)
            shape = self.shape_attention(shape)
        if self.exchange is not None:
            if eot is None:
                raise ConfigValueError("eot", None, "域间消息传递需要 EoT 权重")
            texture, shape = self.exchange(texture, shape, eot)
        return texture, shape


class MessagePassingStack(nn.Module):
    """多轮消息传递；EoT 权重在各轮间保持不变，代表向量每轮由当前特征重新计算。"""

    def __init__(self, rounds: Iterable[MessagePassingRound]) -> None:
        super().__init__()
        self.rounds = nn.ModuleList(rounds)
        if len(self.rounds) == 0:
            raise ConfigValueError("dims.rounds", 0, "消息传递轮数必须 ≥ 1")

    @classmethod
    def build(cls, features: int, rounds: int, heads: int = 4, merge: str = "average",
              intra: bool = True, inter: bool = True) -> "MessagePassingStack":
        return cls(MessagePassingRound(features, heads, merge, intra, inter) for _ in range(rounds))

    def forward(self, texture: torch.Tensor, shape: torch.Tensor,
                eot: Optional[EoTWeights] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        for round_ in self.rounds:
            texture, shape = round_(texture, shape, eot)
        return texture, shape


def intra_domain_pass(features: torch.Tensor, attention: GraphAttention) -> torch.Tensor:
    return attention(features)


def inter_domain_pass(texture: torch.Tensor, shape: torch.Tensor, eot: EoTWeights,
                      exchange: InterDomainExchange) -> Tuple[torch.Tensor, torch.Tensor]:
    return exchange(texture, shape, eot)


def message_passing_stack(texture: torch.Tensor, shape: torch.Tensor, eot: EoTWeights,
                          rounds: List[MessagePassingRound]) -> Tuple[torch.Tensor, torch.Tensor]:
    """按给定的轮列表执行消息传递。

    Raises:
        ConfigValueError: 轮列表为空
    """
    return MessagePassingStack(rounds)(texture, shape, eot)
