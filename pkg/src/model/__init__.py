"""
模型层：骨干网络、EoT、纹理/形状编码、块图消息传递、融合与分类头、变体工厂。
"""

from .backbone import ResNetBackbone, build_backbone, load_pretrained, save_weights
from .encoding import ShapeEncoding, TextureEncoding
from .eot import EoTWeights, ExtentOfTexture, compute_eot, extract_patches
from .graph import GraphAttention, InterDomainExchange, MessagePassingRound, MessagePassingStack
from .head import BilinearFusion, Classifier, ClassScores, PatchFusion, compute_loss, normalize_features

__all__ = [
    "ResNetBackbone",
    "build_backbone",
    "load_pretrained",
    "save_weights",
    "ShapeEncoding",
    "TextureEncoding",
    "EoTWeights",
    "ExtentOfTexture",
    "compute_eot",
    "extract_patches",
    "GraphAttention",
    "InterDomainExchange",
    "MessagePassingRound",
    "MessagePassingStack",
    "BilinearFusion",
    "Classifier",
    "ClassScores",
    "PatchFusion",
    "compute_loss",
    "normalize_features",
]
