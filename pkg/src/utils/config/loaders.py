"""
配置加载器模块。

提供 YAML 框架配置、键值对实验配置以及环境变量的加载功能。
"""

import os
from typing import Any, Dict, Optional
from abc import ABC, abstractmethod

from src.utils.patterns import RegexPatterns
from src.core.base.config_defs import TRAIN_ENV_PREFIX
from src.core.base.errors import ConfigFileError


class ConfigLoader(ABC):
    """配置加载器接口。

    定义配置加载的标准接口。
    """

    @abstractmethod
    def load(self, path: str) -> Dict[str, Any]:
        """加载配置文件。

        Args:
            path: 配置文件路径

        Returns:
            配置字典

        Raises:
            ConfigFileError: 配置文件不存在或格式错误
        """
        pass

    @abstractmethod
    def supports(self, path: str) -> bool:
        """检查是否支持加载指定路径的配置文件。

        Args:
            path: 配置文件路径

        Returns:
            是否支持加载指定路径的配置文件
        """
        pass


class YamlConfigLoader(ConfigLoader):
    """YAML配置加载器。

    从YAML文件加载框架级配置（日志、路径、运行时）。
    """

    def load(self, path: str) -> Dict[str, Any]:
        """从YAML文件加载配置。

        Args:
            path: 配置文件路径

        Returns:
            配置字典

        Raises:
            ConfigFileError: 配置文件不存在或 YAML 解析错误
        """
        import yaml

        if not os.path.exists(path):
            raise ConfigFileError(f"配置文件不存在: {path}")

        try:
            with open(path, 'r', encoding='utf-8') as file:
                config = yaml.safe_load(file)
                if config is None:  # 空文件
                    config = {}
                return config
        except yaml.YAMLError as e:
            raise ConfigFileError(f"YAML 解析失败: {path}", cause=e) from e

    def supports(self, path: str) -> bool:
        return path.lower().endswith(('.yaml', '.yml'))


class KeyValueConfigLoader(ConfigLoader):
    """键值对实验配置加载器。

    格式：每行一个 ``key=value``，``#`` 之后为注释，点分键表示子配置
    （如 ``data.layout=gtos_mobile``）。值保持字符串，由 TrainConfig 负责类型转换。
    """

    def load(self, path: str) -> Dict[str, Any]:
        """从键值对文本文件加载配置。

        Args:
            path: 配置文件路径

        Returns:
            扁平的点分键配置字典（保持文件中的顺序）

        Raises:
            ConfigFileError: 文件不存在、行格式错误或键重复
        """
        if not os.path.exists(path):
            raise ConfigFileError(f"配置文件不存在: {path}")
        with open(path, 'r', encoding='utf-8') as file:
            return self.loads(file.read(), source=path)

    def loads(self, text: str, source: str = "<string>") -> Dict[str, str]:
        """解析键值对文本。

        Args:
            text: 配置文本
            source: 出错时报告的来源名

        Returns:
            扁平的点分键配置字典
        """
        config: Dict[str, str] = {}
        for line_no, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split('#', 1)[0].strip()
            if not line:
                continue
            match = RegexPatterns.CONFIG_LINE.fullmatch(line)
            if match is None:
                raise ConfigFileError(f"{source}:{line_no} 无法解析的配置行: {raw_line!r}")
            key = match.group('key')
            if key in config:
                raise ConfigFileError(f"{source}:{line_no} 配置键重复: {key}")
            config[key] = match.group('value')
        return config

    @staticmethod
    def dumps(config: Dict[str, Any], header: Optional[str] = None) -> str:
        """把扁平配置序列化为键值对文本（与 loads 互逆）。"""
        lines = []
        if header:
            lines.extend(f"# {row}" for row in header.splitlines())
        for key, value in config.items():
            lines.append(f"{key}={'' if value is None else value}")
        return "\n".join(lines) + "\n"

    def supports(self, path: str) -> bool:
        return path.lower().endswith(('.cfg', '.conf', '.txt'))


class EnvConfigLoader(ConfigLoader):
    """环境变量配置加载器。

    从环境变量加载实验配置覆盖项。
    """

    def __init__(self, prefix: str = TRAIN_ENV_PREFIX):
        """初始化环境变量配置加载器。

        Args:
            prefix: 环境变量前缀，默认为"EOT_TRAIN__"
        """
        self._prefix = prefix

    def load(self, path: Optional[str] = None) -> Dict[str, Any]:
        """从环境变量加载配置。

        环境变量命名规则：
        - 前缀后双下划线分隔层级，例如 EOT_TRAIN__DATA__ROOT
        - 转换为小写点分键，例如 data.root

        Args:
            path: 在环境变量加载器中不使用，但保留以兼容接口

        Returns:
            配置字典（值保持字符串）
        """
        config = {}

        for key, value in os.environ.items():

            if not key.startswith(self._prefix):
                continue

            config_key = key[len(self._prefix):].lower()
            config_key = config_key.replace("__", ".")
            config[config_key] = value

        return config

    def supports(self, path: str) -> bool:
        return True
