"""
实验配置模型。

TrainConfig 是训练、评估和消融共用的配置，按以下层级合并（低 → 高）：
字段默认值 < 实验配置文件（key=value） < EOT_TRAIN__* 环境变量 < 命令行覆盖。
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.core.base.config_defs import CONFIG_MERGE_ORDER, ConfigLevel
from src.core.base.errors import ConfigKeyError, ConfigTypeError, ConfigValueError
from src.utils.config.loaders import EnvConfigLoader, KeyValueConfigLoader
from src.utils.log.manager import get_logger
from src.utils.patterns import RegexPatterns

logger = get_logger(__name__)

VARIANTS = ("deep_ten", "b1", "b2", "b3", "b4", "full")
LAYOUTS = ("generic", "gtos_mobile", "dtd", "minc2500")
_PARSING_TYPES = {"int_parsing": "int", "float_parsing": "float", "bool_parsing": "bool"}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DimsConfig(_Section):
    """网络维度：块数 k、码字数 N、特征维度 F、注意力头数、轮数、分类器隐藏层宽度。"""

    patches: int = Field(36, description="8×8 网格、3×3 窗口、步长 1 时固定为 36")
    codes: int = Field(8, ge=1)
    features: int = Field(64, ge=1)
    heads: int = Field(4, ge=1)
    merge: Literal["average", "concat_project"] = "average"
    rounds: int = Field(2, ge=1)
    classifier_hidden: int = Field(512, ge=1)

    @field_validator("patches")
    @classmethod
    def _fixed_patch_count(cls, value: int) -> int:
        if value != 36:
            raise ValueError("patches 由特征网格决定，只能为 36")
        return value


class BackboneConfig(_Section):
    depth: int = 18
    weights: Optional[str] = None
    freeze: bool = False

    @field_validator("depth")
    @classmethod
    def _supported_depth(cls, value: int) -> int:
        if value not in (18, 50):
            raise ValueError("depth 只能为 18 或 50")
        return value

    @field_validator("weights", mode="before")
    @classmethod
    def _empty_is_none(cls, value: Any) -> Any:
        return None if value in ("", "none", "None") else value


class DataConfig(_Section):
    root: str = ""
    layout: Literal["generic", "gtos_mobile", "dtd", "minc2500"] = "generic"
    fold: int = Field(1, ge=1, le=10)
    strict: bool = True
    train_split: Literal["train", "test"] = "train"
    test_split: Literal["train", "test"] = "test"


class AugmentConfig(_Section):
    flip_prob: float = Field(0.5, ge=0.0, le=1.0)
    brightness: float = Field(0.4, ge=0.0)
    contrast: float = Field(0.4, ge=0.0)
    saturation: float = Field(0.4, ge=0.0)


class TrainConfig(_Section):
    """训练配置。

    默认值对应 30 轮、批大小 128、学习率 0.01、动量 0.9、权重衰减 1e-4 的 SGD 方案。
    """

    variant: Literal["deep_ten", "b1", "b2", "b3", "b4", "full"] = "full"
    epochs: int = Field(30, ge=1)
    batch_size: int = Field(128, ge=1)
    lr: float = Field(0.01, gt=0.0)
    momentum: float = Field(0.9, ge=0.0)
    weight_decay: float = Field(1e-4, ge=0.0)
    scale_mode: Literal["single", "multi"] = "single"
    seed: int = 0
    loss: Literal["l2", "cross_entropy"] = "l2"
    lr_step: int = Field(0, ge=0, description="每隔多少轮衰减一次学习率，0 表示不衰减")
    lr_gamma: float = Field(0.1, gt=0.0)
    device: str = "cpu"
    num_workers: int = Field(0, ge=0)
    eot_grad: bool = False
    dims: DimsConfig = Field(default_factory=DimsConfig)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)

    def to_flat(self) -> Dict[str, str]:
        """展开为点分键 → 字符串值的有序字典（与 from_flat 互逆）。"""
        return _flatten(self.model_dump())

    @classmethod
    def from_flat(cls, flat: Mapping[str, Any]) -> "TrainConfig":
        """由点分键字典构建配置。

        Raises:
            ConfigKeyError: 存在未知配置键
            ConfigValueError: 配置值不合法
            ConfigTypeError: 配置值无法解析为字段类型
        """
        nested = _nest(flat)
        try:
            return cls.model_validate(nested)
        except ValidationError as e:
            raise _translate(e) from e

    def dumps(self) -> str:
        return KeyValueConfigLoader.dumps(self.to_flat())

    @classmethod
    def loads(cls, text: str) -> "TrainConfig":
        return cls.from_flat(KeyValueConfigLoader().loads(text))

    def updated(self, **changes: Any) -> "TrainConfig":
        """返回应用点分键修改后的新配置（键中的点用双下划线表示也可）。"""
        flat = self.to_flat()
        for key, value in changes.items():
            flat[key.replace("__", ".")] = _render(value)
        return TrainConfig.from_flat(flat)


def _render(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, str]:
    flat: Dict[str, str] = {}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, f"{dotted}."))
        else:
            flat[dotted] = _render(value)
    return flat


def _nest(flat: Mapping[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for dotted, value in flat.items():
        if not RegexPatterns.DOTTED_KEY.fullmatch(dotted):
            raise ConfigKeyError(dotted, f"非法的配置键: {dotted!r}")
        *parents, leaf = dotted.split(".")
        node = nested
        for depth, part in enumerate(parents):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigKeyError(dotted, f"配置键 '{'.'.join(parents[:depth + 1])}' 不是配置节")
            node = child
        if isinstance(node.get(leaf), dict):
            raise ConfigKeyError(dotted, f"配置键 '{dotted}' 是配置节，不能直接赋值")
        node[leaf] = value
    return nested


def _translate(error: ValidationError) -> Union[ConfigKeyError, ConfigTypeError, ConfigValueError]:
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"])
    if first["type"] == "extra_forbidden":
        return ConfigKeyError(key, f"未知的配置键: {key}")
    expected = _PARSING_TYPES.get(first["type"])
    if expected is not None:
        return ConfigTypeError(key, expected, repr(first.get("input")))
    return ConfigValueError(key, first.get("input"), f"配置键 '{key}' 的值 {first.get('input')!r} 无效: {first['msg']}")


def parse_override(text: str) -> tuple[str, str]:
    """解析单个 ``key=value`` 覆盖项。

    Raises:
        ConfigValueError: 格式不是 key=value
    """
    match = RegexPatterns.CONFIG_LINE.fullmatch(text)
    if match is None:
        raise ConfigValueError("override", text, f"覆盖项格式应为 key=value: {text!r}")
    return match.group("key"), match.group("value")


def load_train_config(path: Optional[str] = None,
                      overrides: Optional[Union[Iterable[str], Mapping[str, Any]]] = None,
                      use_env: bool = True) -> TrainConfig:
    """按层级合并得到 TrainConfig。

    Args:
        path: 实验配置文件路径（key=value 格式），可为空
        overrides: 命令行覆盖项，``key=value`` 字符串列表或字典
        use_env: 是否读取 EOT_TRAIN__* 环境变量

    Returns:
        校验后的 TrainConfig
    """
    if overrides is None:
        override_layer: Dict[str, str] = {}
    elif isinstance(overrides, Mapping):
        override_layer = {key: _render(value) for key, value in overrides.items()}
    else:
        override_layer = dict(parse_override(item) for item in overrides)

    layers: Dict[ConfigLevel, Dict[str, str]] = {
        ConfigLevel.DEFAULT: TrainConfig().to_flat(),
        ConfigLevel.EXPERIMENT: KeyValueConfigLoader().load(path) if path else {},
        ConfigLevel.ENV_VAR: EnvConfigLoader().load() if use_env else {},
        ConfigLevel.OVERRIDE: override_layer,
    }
    merged: Dict[str, str] = {}
    for level in CONFIG_MERGE_ORDER:
        if level is not ConfigLevel.DEFAULT and layers[level]:
            logger.debug(f"应用配置层 {level.name}: {sorted(layers[level])}")
        merged.update(layers[level])
    config = TrainConfig.from_flat(merged)
    logger.info(f"实验配置: variant={config.variant}, epochs={config.epochs}, "
                f"batch_size={config.batch_size}, lr={config.lr}, seed={config.seed}")
    return config
