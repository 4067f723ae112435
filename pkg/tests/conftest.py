"""
全局通用pytest固件配置。
提供在所有测试中都可使用的基本固件和命令行选项。
"""
import sys
from pathlib import Path
from typing import Any, Dict

import pytest
import torch
from dotenv import load_dotenv

from src.utils.config.manager import get_config
from src.utils.log.manager import get_logger, setup_logging

# 模块级别的全局变量来存储会话配置
session_config_global: Dict[str, Any] | None = None


def pytest_addoption(parser):
    """添加命令行选项。"""
    parser.addoption(
        "--env", action="store", default="test", help="指定运行环境 (dev, test, gpu)"
    )
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="运行 slow 用例（桌面规模学习与消融验收）"
    )


def pytest_sessionstart(session):
    """在测试会话开始时执行，加载 .env 并配置日志。"""
    env_path = Path(__file__).parent.parent / '.env'
    if env_path.is_file():
        load_dotenv(dotenv_path=env_path)

    env_param = session.config.getoption("--env")
    global session_config_global
    session_config_global = get_config(env=env_param)

    setup_logging(session_config_global)
    logger = get_logger("global_session_start")
    logger.info(f"======== 测试会话开始 (环境: {session_config_global.get('env', '未知')}) ========")
    logger.info(f"使用的 Python 版本: {sys.version}")
    logger.info(f"torch 版本: {torch.__version__}")
    threads = int(session_config_global.get("runtime", {}).get("num_threads") or 0)
    if threads > 0:
        torch.set_num_threads(threads)


def pytest_sessionfinish(session):
    """在测试会话结束时执行。"""
    logger = get_logger("global_session_finish")
    logger.info("======== 测试会话结束 ========")


def pytest_collection_modifyitems(config, items):
    """未传入 --run-slow 时跳过 slow 用例。"""
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def fixed_seed():
    """每个用例开始前固定 torch 全局随机种子。"""
    torch.manual_seed(0)
    yield


@pytest.fixture(scope="session")
def config(request) -> Dict[str, Any]:
    """全局框架配置fixture。"""
    global session_config_global
    if session_config_global:
        return session_config_global
    env_param = request.config.getoption("--env")
    session_config_global = get_config(env=env_param)
    setup_logging(session_config_global)
    get_logger("fallback_config_fixture").warning("全局会话配置未找到，fixture 重新加载配置。")
    return session_config_global
