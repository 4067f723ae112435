"""
核心抽象层，定义工具包的异常和配置层级。
"""

from .base import __all__ as base_all

__all__ = [
    *base_all,
]
