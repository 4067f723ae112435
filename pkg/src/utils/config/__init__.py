"""
配置子模块。

提供框架配置（YAML）和实验配置（键值对文本、环境变量）的加载功能。
"""

from src.utils.config.manager import get_config, resolve_path
from src.utils.config.loaders import (
    EnvConfigLoader as EnvLoader,
    KeyValueConfigLoader as KeyValueLoader,
    YamlConfigLoader as YamlLoader,
)

__all__ = [
    'get_config',
    'resolve_path',
    'YamlLoader',
    'KeyValueLoader',
    'EnvLoader',
]
