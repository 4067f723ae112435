from __future__ import annotations
from typing import Callable, Dict, List, Any, Optional
from src.utils.log.manager import get_logger


def _callback_name(callback: Callable[..., Any]) -> str:
    return getattr(callback, "__qualname__", None) or callback.__class__.__name__


class EventBus:
    """
    简单事件总线，支持事件订阅、取消订阅和事件发布。

    训练循环在每个 epoch 结束时发布 ``epoch_end`` 事件，指标写入和最优检查点保存作为订阅者挂接。
    """

    def __init__(self, strict: bool = False):
        """
        Args:
            strict: 为 True 时回调异常会向上抛出，否则仅记录日志
        """
        self._subscribers: Dict[str, List[Callable[..., Any]]] = {}
        self._strict = strict
        self._logger = get_logger(self.__class__.__name__)

    def subscribe(self, event: str, callback: Callable[..., Any]) -> None:
        """
        订阅事件。
        Args:
            event: 事件名
            callback: 回调函数
        """
        self._subscribers.setdefault(event, []).append(callback)
        self._logger.debug(f"[subscribe] 订阅事件: {event} -> {_callback_name(callback)}")

    def unsubscribe(self, event: str, callback: Callable[..., Any]) -> None:
        """
        取消订阅事件。
        Args:
            event: 事件名
            callback: 回调函数
        """
        if event in self._subscribers and callback in self._subscribers[event]:
            self._subscribers[event].remove(callback)
            self._logger.debug(f"[unsubscribe] 取消订阅事件: {event} -> {_callback_name(callback)}")

    def publish(self, event: str, *args, **kwargs) -> None:
        """
        发布事件，按订阅顺序通知所有订阅者。
        Args:
            event: 事件名
            *args: 回调参数
            **kwargs: 回调参数
        """
        subscribers = list(self._subscribers.get(event, []))
        self._logger.debug(f"[publish] 发布事件: {event}，订阅者数量: {len(subscribers)}")
        for callback in subscribers:
            try:
                callback(*args, **kwargs)
            except Exception as e:
                if self._strict:
                    raise
                self._logger.error(f"[publish] 事件回调异常: {_callback_name(callback)}，错误: {e}", exc_info=True)

    def subscribers(self, event: str) -> List[Callable[..., Any]]:
        return list(self._subscribers.get(event, []))

    def clear(self, event: Optional[str] = None) -> None:
        """
        清除订阅者。
        Args:
            event: 事件名（如为None则清除所有事件）
        """
        if event:
            self._subscribers.pop(event, None)
        else:
            self._subscribers.clear()
