"""
有限差分梯度检查。

在 float64 下比较自动求导梯度与中心差分梯度：
    n = (f(x + ε) − f(x − ε)) / 2ε
    error = |a − n| / max(|a|, |n|, 1)
若 ε 与 ε/2 两个步长的中心差分明显不一致，说明该点落在 ReLU/LeakyReLU 的折点附近，跳过并记录。
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional, Tuple

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, Field

from src.core.base.errors import ConfigValueError
from src.model.encoding import TextureEncoding
from src.model.eot import EoTWeights
from src.model.factory import TerrainRecognizer
from src.model.graph import GraphAttention, InterDomainExchange
from src.model.head import BilinearFusion, Classifier, ClassScores, PatchFusion, compute_loss, normalize_features
from src.utils.log.manager import get_logger

COMPONENTS = ("encoding", "gat", "inter_domain", "head", "full_stack")
# ε 与 ε/2 两种中心差分的允许偏差（相对 max(1, |n|)）
KINK_TOLERANCE = 1e-5
# 含 ReLU 和特征归一化的组件用更小的步长，减少跨越折点的差分
DEFAULT_EPSILON: Dict[str, float] = {
    "encoding": 1e-3,
    "gat": 1e-3,
    "inter_domain": 1e-3,
    "head": 1e-4,
    "full_stack": 1e-4,
}

AnalyticHook = Callable[[str, torch.Tensor], torch.Tensor]
Objective = Callable[[], torch.Tensor]

logger = get_logger(__name__)


class GradCheckDims(BaseModel):
    """梯度检查使用的缩小维度。

    Attributes:
        batch: 批大小
        channels: 描述子维度 C（full_stack 中为特征图通道数）
        descriptors: 每组描述子个数 M
        codes: 码字数 N
        features: 特征维度 F
        patches: 块数 k（full_stack 固定为 36）
        heads: 注意力头数
        classes: 类别数
        hidden: 分类器隐藏层宽度
    """

    model_config = ConfigDict(frozen=True)

    batch: int = Field(2, ge=1)
    channels: int = Field(6, ge=1)
    descriptors: int = Field(4, ge=1)
    codes: int = Field(3, ge=1)
    features: int = Field(4, ge=1)
    patches: int = Field(4, ge=1)
    heads: int = Field(2, ge=1)
    classes: int = Field(3, ge=2)
    hidden: int = Field(8, ge=1)


DEFAULT_DIMS: Dict[str, GradCheckDims] = {
    "encoding": GradCheckDims(channels=6, descriptors=4, codes=3, features=5),
    "gat": GradCheckDims(patches=4, features=4, heads=2),
    "inter_domain": GradCheckDims(patches=4, features=4),
    "head": GradCheckDims(patches=4, features=4, classes=3, hidden=8),
    "full_stack": GradCheckDims(channels=4, codes=2, features=4, heads=2, classes=3, hidden=8),
}


class GradCheckResult(BaseModel):
    component: str
    max_error: float
    worst: Optional[str] = None
    checked: int = 0
    skipped: int = 0


def _randn(generator: torch.Generator, *shape: int) -> torch.Tensor:
    return torch.randn(*shape, generator=generator, dtype=torch.float64)


def _leaf(value: torch.Tensor) -> torch.Tensor:
    return value.requires_grad_(True)


def _parameters(module: nn.Module, prefix: str) -> List[Tuple[str, torch.Tensor]]:
    return [(f"{prefix}.{name}", parameter) for name, parameter in module.named_parameters()]


def _eot(generator: torch.Generator, batch: int, patches: int) -> EoTWeights:
    texture = 0.5 + 0.4 * torch.rand(batch, patches, generator=generator, dtype=torch.float64)
    return EoTWeights(texture=texture, shape=1.0 - texture)


def _build(component: str, dims: GradCheckDims,
           generator: torch.Generator) -> Tuple[Objective, List[Tuple[str, torch.Tensor]]]:
    """构建标量探针和待检查的张量（参数 + 输入）。"""
    b, k, f = dims.batch, dims.patches, dims.features
    if component == "encoding":
        encoder = TextureEncoding(dims.channels, dims.codes, f).double()
        x = _leaf(_randn(generator, b, dims.channels, dims.descriptors, 1))
        return (lambda: encoder(x).sum()), _parameters(encoder, "encoding") + [("input", x)]

    if component == "gat":
        attention = GraphAttention(f, dims.heads).double()
        x = _leaf(_randn(generator, b, k, f))
        return (lambda: attention(x).sum()), _parameters(attention, "gat") + [("input", x)]

    if component == "inter_domain":
        exchange = InterDomainExchange(f).double()
        texture, shape = _leaf(_randn(generator, b, k, f)), _leaf(_randn(generator, b, k, f))
        eot = _eot(generator, b, k)

        def objective() -> torch.Tensor:
            texture_out, shape_out = exchange(texture, shape, eot)
            return texture_out.sum() + shape_out.sum()

        tensors = _parameters(exchange, "inter_domain") + [("texture", texture), ("shape", shape)]
        return objective, tensors

    labels = torch.randint(dims.classes, (b,), generator=generator)
    if component == "head":
        fusion = PatchFusion(k).double()
        bilinear = BilinearFusion(f).double()
        classifier = Classifier(f * f, dims.classes, dims.hidden).double()
        texture, shape = _leaf(_randn(generator, b, k, f)), _leaf(_randn(generator, b, k, f))

        def objective() -> torch.Tensor:
            logits = classifier(normalize_features(bilinear(*fusion(texture, shape))))
            return compute_loss(ClassScores(logits, torch.softmax(logits, dim=-1)), labels)

        tensors = (_parameters(fusion, "fusion") + _parameters(bilinear, "bilinear")
                   + _parameters(classifier, "classifier") + [("texture", texture), ("shape", shape)])
        return objective, tensors

    if component == "full_stack":
        model = TerrainRecognizer("full", dims.classes, nn.Identity(), num_codes=dims.codes,
                                  features=f, heads=dims.heads, classifier_hidden=dims.hidden,
                                  channels=dims.channels).double()
        z = _randn(generator, b, dims.channels, 8, 8)

        def objective() -> torch.Tensor:
            logits = model.forward_features(z)
            return compute_loss(ClassScores(logits, torch.softmax(logits, dim=-1)), labels)

        # EoT 不参与求导，只检查参数梯度
        return objective, _parameters(model, "model")

    raise ConfigValueError("component", component, f"未知的梯度检查组件: {component}，可选 {COMPONENTS}")


@torch.no_grad()
def _central_difference(objective: Objective, flat: torch.Tensor, position: int, step: float) -> float:
    original = flat[position].item()
    flat[position] = original + step
    plus = objective().item()
    flat[position] = original - step
    minus = objective().item()
    flat[position] = original
    return (plus - minus) / (2 * step)


def gradient_check_report(component: str, dims: Optional[GradCheckDims] = None, epsilon: Optional[float] = None,
                          seed: int = 0, analytic_hook: Optional[AnalyticHook] = None) -> GradCheckResult:
    """对单个组件执行梯度检查，返回包含最大相对误差和跳过点数的结果。

    Args:
        component: encoding | gat | inter_domain | head | full_stack
        dims: 缩小维度，默认使用该组件的 DEFAULT_DIMS
        epsilon: 差分步长，默认使用该组件的 DEFAULT_EPSILON
        seed: 参数和输入的随机种子
        analytic_hook: 可选 (张量名, 梯度) -> 梯度，用于人为篡改解析梯度

    Raises:
        ConfigValueError: 未知组件或 epsilon ≤ 0
    """
    if component not in COMPONENTS:
        raise ConfigValueError("component", component, f"未知的梯度检查组件: {component}，可选 {COMPONENTS}")
    epsilon = DEFAULT_EPSILON[component] if epsilon is None else epsilon
    if epsilon <= 0:
        raise ConfigValueError("epsilon", epsilon, f"差分步长必须 > 0, 实际 {epsilon}")
    dims = dims or DEFAULT_DIMS[component]
    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)
    objective, named = _build(component, dims, generator)
    names = [name for name, _ in named]
    tensors = [tensor for _, tensor in named]

    with torch.enable_grad():
        analytic = list(torch.autograd.grad(objective(), tensors, allow_unused=True))
    result = GradCheckResult(component=component, max_error=0.0)
    for name, tensor, grad in zip(names, tensors, analytic):
        grad = torch.zeros_like(tensor) if grad is None else grad
        if analytic_hook is not None:
            grad = analytic_hook(name, grad)
        flat = tensor.data.view(-1)
        flat_grad = grad.reshape(-1)
        for position in range(flat.numel()):
            numeric = _central_difference(objective, flat, position, epsilon)
            refined = _central_difference(objective, flat, position, epsilon / 2)
            if abs(numeric - refined) > KINK_TOLERANCE * max(1.0, abs(numeric)):
                logger.debug(f"[{component}] 跳过折点: {name}[{position}] ({numeric:.6g} vs {refined:.6g})")
                result.skipped += 1
                continue
            value = flat_grad[position].item()
            error = abs(value - numeric) / max(abs(value), abs(numeric), 1.0)
            result.checked += 1
            if error > result.max_error:
                result.max_error, result.worst = error, f"{name}[{position}]"
    logger.info(f"梯度检查 {component} (ε={epsilon:g}): 最大相对误差={result.max_error:.3e}, "
                f"检查 {result.checked} 个元素, 跳过 {result.skipped} 个")
    return result


def gradient_check(component: str, dims: Optional[GradCheckDims] = None, epsilon: Optional[float] = None,
                   seed: int = 0, analytic_hook: Optional[AnalyticHook] = None) -> float:
    """返回组件解析梯度与中心差分梯度之间的最大相对误差。"""
    return gradient_check_report(component, dims, epsilon, seed, analytic_hook).max_error
