from __future__ import annotations
import logging
import os
from typing import Optional, Dict, Any
from datetime import datetime
from pathlib import Path

from src.utils.config.manager import get_config, project_root

LOG_LEVEL_DEBUG = logging.DEBUG
LOG_LEVEL_INFO = logging.INFO
LOG_LEVEL_WARNING = logging.WARNING
LOG_LEVEL_ERROR = logging.ERROR
LOG_LEVEL_CRITICAL = logging.CRITICAL

_loggers: Dict[str, logging.Logger] = {}

_LEVEL_MAP = {
    'DEBUG': LOG_LEVEL_DEBUG,
    'INFO': LOG_LEVEL_INFO,
    'WARNING': LOG_LEVEL_WARNING,
    'ERROR': LOG_LEVEL_ERROR,
    'CRITICAL': LOG_LEVEL_CRITICAL
}

# --- 默认配置 --- (会被 settings.yaml 和 LOG_LEVEL 环境变量覆盖)
DEFAULT_LOG_CONFIG: Dict[str, Any] = {
    "format": '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    "level": "INFO",
    "file": {
        "enabled": False,  # 训练运行目录自带 metrics.csv，文件日志按需开启
        "path": "output/logs",
    },
    "console": {
        "enabled": True,
    },
    "loggers": {}  # 特定 logger 的级别，例如 PIL: WARNING
}

# --- 全局日志状态标记 --- #
_logging_configured = False
_root_logger = logging.getLogger()


def _get_level_from_config() -> int:
    """从配置中读取日志级别字符串并转换为 logging 常量。"""
    level_str = os.environ.get("LOG_LEVEL") or get_config().get('log', {}).get('level', 'INFO')
    return _LEVEL_MAP.get(str(level_str).upper(), LOG_LEVEL_INFO)


def get_logger(
    name: Optional[str] = None,
    level: Optional[int] = None,
) -> logging.Logger:
    """
    获取或创建标准化日志器。
    日志级别优先从配置读取，首次创建后缓存。
    """
    logger_name = name or "root"

    if logger_name in _loggers:
        existing_logger = _loggers[logger_name]
        if level is not None and existing_logger.level != level:
            existing_logger.setLevel(level)
        return existing_logger

    logger = logging.getLogger(logger_name)
    determined_level = level if level is not None else _get_level_from_config()
    logger.setLevel(determined_level)
    logger.propagate = True
    _loggers[logger_name] = logger
    return logger


def set_global_log_level(level: int) -> None:
    """
    设置所有已创建日志器的日志级别以及根日志器的级别（CLI 的 --verbose 使用）。
    """
    _root_logger.setLevel(level)
    for logger in _loggers.values():
        logger.setLevel(level)


def _merge_configs(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """递归合并两个字典，override 中的值会覆盖 base 中的值。"""
    merged = base.copy()
    for key, value in override.items():
        if isinstance(value, dict) and key in merged and isinstance(merged[key], dict):
            merged[key] = _merge_configs(merged[key], value)
        else:
            merged[key] = value
    return merged


def setup_logging(config: Optional[Dict[str, Any]] = None) -> None:
    """
    配置全局日志系统。

    根据配置设置日志格式、级别和输出目标（控制台、按日期命名的文件 run_YYYY-MM-DD.log）。
    应在 CLI 启动或测试会话开始时调用一次，重复调用无效果。

    Args:
        config: 框架配置（含 ``log`` 节）或日志配置字典；为 None 时使用默认配置
    """
    global _logging_configured
    if _logging_configured:
        return

    config = config or {}
    log_config = _merge_configs(DEFAULT_LOG_CONFIG, config.get('log', config))

    for handler in _root_logger.handlers[:]:
        _root_logger.removeHandler(handler)
        handler.close()

    final_level_str = os.environ.get("LOG_LEVEL") or log_config.get("level", "INFO")
    if not isinstance(final_level_str, str):
        print(f"[ERROR] [Logging Setup] 日志级别配置无效: {final_level_str!r}，回退为 INFO")
        final_level_str = "INFO"
    _root_logger.setLevel(_LEVEL_MAP.get(final_level_str.upper(), LOG_LEVEL_INFO))

    formatter = logging.Formatter(log_config.get("format", DEFAULT_LOG_CONFIG["format"]))

    if log_config["console"].get("enabled", True):
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        _root_logger.addHandler(console_handler)

    file_config = log_config["file"]
    if file_config.get("enabled", False):
        log_dir = Path(file_config.get("path", DEFAULT_LOG_CONFIG["file"]["path"]))
        if not log_dir.is_absolute():
            log_dir = Path(project_root()) / log_dir
        log_file_path = log_dir / f"run_{datetime.now().strftime('%Y-%m-%d')}.log"
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(filename=str(log_file_path), encoding='utf-8', mode='a')
            file_handler.setFormatter(formatter)
            _root_logger.addHandler(file_handler)
        except OSError as e:
            print(f"[ERROR] [Logging Setup] 创建日志文件失败 ({log_file_path}): {e}")

    loggers_config = log_config.get("loggers") or {}
    for logger_name, logger_opts in loggers_config.items():
        level_str = logger_opts.get("level") if isinstance(logger_opts, dict) else None
        level_int = _LEVEL_MAP.get(str(level_str).upper()) if level_str else None
        if level_int is None:
            print(f"[WARNING] [Logging Setup] Logger '{logger_name}' 的配置无效: {logger_opts!r}")
            continue
        logging.getLogger(logger_name).setLevel(level_int)

    _logging_configured = True


def log_exception(logger: logging.Logger, msg: str = "发生未处理的异常", *args, **kwargs) -> None:
    """记录异常信息，自动包含 traceback。"""
    logger.exception(msg, *args, **kwargs)
