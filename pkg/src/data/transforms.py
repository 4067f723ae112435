"""
图像预处理与数据增强。

- eval：缩放到 286×286，中心裁剪 256×256，无随机性
- single_scale：同 eval，再加随机水平翻转和亮度/对比度/饱和度抖动
- multi_scale：从 {256, 384, 512} 中随机选边长缩放，中心裁剪 256×256，再加翻转和抖动

随机性全部来自由 (seed, epoch, 样本下标) 播种的 torch.Generator，与加载顺序和并行方式无关。
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Literal, Optional, Sequence, Tuple

import torch
import torchvision.transforms.functional as TF
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.base.errors import DataLoadError

if TYPE_CHECKING:
    from src.engine.config import TrainConfig

CROP_SIZE = 256
EVAL_RESIZE = 286
MULTI_SCALES: Tuple[int, ...] = (256, 384, 512)
IMAGENET_MEAN: Tuple[float, float, float] = (0.485, 0.456, 0.406)
IMAGENET_STD: Tuple[float, float, float] = (0.229, 0.224, 0.225)


class AugmentationPolicy(BaseModel):
    """数据增强策略。

    Attributes:
        mode: single_scale | multi_scale | eval
        flip_prob: 水平翻转概率
        jitter: (亮度, 对比度, 饱和度) 抖动幅度，因子在 [1 − j, 1 + j] 内均匀采样
        seed: 随机种子
    """

    model_config = ConfigDict(frozen=True)

    mode: Literal["single_scale", "multi_scale", "eval"] = "eval"
    flip_prob: float = Field(0.5, ge=0.0, le=1.0)
    jitter: Tuple[float, float, float] = (0.4, 0.4, 0.4)
    seed: int = 0

    @field_validator("jitter")
    @classmethod
    def _non_negative(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(v < 0 for v in value):
            raise ValueError("抖动幅度不能为负")
        return value

    @classmethod
    def evaluation(cls) -> "AugmentationPolicy":
        return cls(mode="eval")

    @classmethod
    def from_config(cls, config: TrainConfig, train: bool) -> "AugmentationPolicy":
        """由 TrainConfig 构建：训练按 scale_mode 选择单/多尺度，评估始终为 eval。"""
        if not train:
            return cls.evaluation()
        augment = config.augment
        return cls(
            mode="multi_scale" if config.scale_mode == "multi" else "single_scale",
            flip_prob=augment.flip_prob,
            jitter=(augment.brightness, augment.contrast, augment.saturation),
            seed=config.seed,
        )


def example_seed(seed: int, epoch: int, index: int) -> int:
    """由 (seed, epoch, 样本下标) 导出的逐样本随机种子。"""
    return ((seed * 1_000_003 + epoch) * 1_000_033 + index) % (2 ** 63 - 1)


def _uniform(generator: torch.Generator, low: float, high: float) -> float:
    return low + (high - low) * float(torch.rand((), generator=generator))


def choose_scale(generator: torch.Generator, scales: Sequence[int] = MULTI_SCALES) -> int:
    return int(scales[int(torch.randint(len(scales), (), generator=generator))])


def read_image(path: str) -> torch.Tensor:
    """读取图像为 (3, H, W) 的 [0, 1] 浮点张量。

    Raises:
        DataLoadError: 文件不存在或无法解码
    """
    try:
        with Image.open(path) as image:
            rgb = image.convert("RGB")
    except (OSError, UnidentifiedImageError) as e:
        raise DataLoadError(f"无法读取图像: {path}", cause=e) from e
    return TF.pil_to_tensor(rgb).float().div_(255.0)


def _resize(image: torch.Tensor, size: int) -> torch.Tensor:
    # 不保持宽高比，直接缩放为正方形
    return TF.resize(image, [size, size], interpolation=TF.InterpolationMode.BILINEAR, antialias=True)


def preprocess(image: torch.Tensor, policy: AugmentationPolicy,
               generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """对 (3, H, W) 的 [0, 1] 图像执行缩放、裁剪、增强和逐通道归一化。"""
    if policy.mode != "eval" and generator is None:
        generator = torch.Generator().manual_seed(policy.seed)

    if policy.mode == "multi_scale":
        assert generator is not None
        image = _resize(image, choose_scale(generator))
    else:
        image = _resize(image, EVAL_RESIZE)
    image = TF.center_crop(image, [CROP_SIZE, CROP_SIZE])

    if policy.mode != "eval":
        assert generator is not None
        if float(torch.rand((), generator=generator)) < policy.flip_prob:
            image = TF.hflip(image)
        brightness, contrast, saturation = policy.jitter
        image = TF.adjust_brightness(image, _uniform(generator, max(0.0, 1 - brightness), 1 + brightness))
        image = TF.adjust_contrast(image, _uniform(generator, max(0.0, 1 - contrast), 1 + contrast))
        image = TF.adjust_saturation(image, _uniform(generator, max(0.0, 1 - saturation), 1 + saturation))

    return TF.normalize(image, list(IMAGENET_MEAN), list(IMAGENET_STD))


def load_example(entry: Tuple[str, int], policy: AugmentationPolicy,
                 index: int = 0, epoch: int = 0) -> Tuple[torch.Tensor, int]:
    """读取并预处理一个样本。

    Args:
        entry: (图像路径, 类别 id)
        policy: 增强策略
        index: 样本下标（参与随机种子）
        epoch: 当前轮次（参与随机种子）

    Returns:
        ((3, 256, 256) 归一化图像, 类别 id)

    Raises:
        DataLoadError: 图像无法读取
    """
    path, label = entry
    image = read_image(path)
    generator = None
    if policy.mode != "eval":
        generator = torch.Generator().manual_seed(example_seed(policy.seed, epoch, index))
    return preprocess(image, policy, generator), label
