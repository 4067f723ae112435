"""
日志工具模块。

提供日志管理器和相关工具。
"""
from .manager import get_logger, setup_logging, log_exception, set_global_log_level

__all__ = [
    "get_logger",
    "setup_logging",
    "log_exception",
    "set_global_log_level",
]
