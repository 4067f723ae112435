"""
工具模块。

提供日志、配置、事件总线和文件操作等通用工具。
"""
from .log.manager import get_logger, log_exception, setup_logging
from .config.manager import get_config
from .event import EventBus
from .file_utils import FileUtils

__all__ = [
    'get_config',
    'get_logger',
    'log_exception',
    'setup_logging',
    'EventBus',
    'FileUtils',
]
