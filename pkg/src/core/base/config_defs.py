"""
配置相关的定义，如配置层级枚举。
"""
from enum import Enum, auto


class ConfigLevel(Enum):
    """实验配置层级枚举。"""
    DEFAULT = auto()     # 模型字段默认值 (TrainConfig 中的 pydantic 默认值)
    EXPERIMENT = auto()  # 实验配置文件 (e.g., config/experiments/synthetic_desk.cfg)
    ENV_VAR = auto()     # 环境变量覆盖 (EOT_TRAIN__DATA__ROOT -> data.root)
    OVERRIDE = auto()    # 命令行 --override / --seed / --device (最高优先级)


# 配置优先级顺序（高优先级会覆盖低优先级）
CONFIG_PRIORITY_ORDER = [
    ConfigLevel.OVERRIDE,
    ConfigLevel.ENV_VAR,
    ConfigLevel.EXPERIMENT,
    ConfigLevel.DEFAULT,
]

# 配置合并顺序：先加载低优先级，最后加载高优先级
CONFIG_MERGE_ORDER = list(reversed(CONFIG_PRIORITY_ORDER))

# 环境变量前缀，双下划线分隔层级
TRAIN_ENV_PREFIX = "EOT_TRAIN__"
