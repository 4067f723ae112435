import os
import re
from typing import Any, Dict, Optional

from .loaders import YamlConfigLoader


def _replace_env_vars(obj):
    """递归替换${env:KEY:-default}为os.environ['KEY']或默认值"""
    pattern = re.compile(r"\$\{env:([A-Z0-9_]+)(:-(.*?))?\}")
    if isinstance(obj, dict):
        return {k: _replace_env_vars(v) for k, v in obj.items()}
    elif isinstance(obj, list):
        return [_replace_env_vars(i) for i in obj]
    elif isinstance(obj, str):
        def repl(match):
            key = match.group(1)
            default = match.group(3) if match.group(3) is not None else ""
            env_value = os.environ.get(key)
            return env_value if env_value is not None else default

        return pattern.sub(repl, obj)
    else:
        return obj


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def project_root() -> str:
    """项目根目录（config/ 与 output/ 所在目录）。"""
    return os.path.abspath(os.path.join(os.path.dirname(__file__), '../../../'))


def get_config(env: Optional[str] = None) -> Dict[str, Any]:
    """统一加载框架配置，优先级：settings.yaml < env/{env}.yaml < 环境变量

    与实验配置（TrainConfig）不同，这里只包含日志、路径和运行时设置。
    """
    base = project_root()
    settings_path = os.path.join(base, 'config/settings.yaml')

    determined_env = env or os.environ.get("APP_ENV", "dev")

    env_path = os.path.join(base, f'config/env/{determined_env}.yaml')

    loader = YamlConfigLoader()
    config = loader.load(settings_path) if os.path.exists(settings_path) else {}
    if os.path.exists(env_path):
        config = _merge(config, loader.load(env_path))
    config.setdefault('env', determined_env)

    return _replace_env_vars(config)


def resolve_path(path: str, config: Optional[Dict[str, Any]] = None, key: str = 'output') -> str:
    """把相对路径解析到 ``paths.<key>`` 之下；绝对路径原样返回。"""
    if os.path.isabs(path):
        return path
    config = config if config is not None else get_config()
    root = config.get('paths', {}).get(key) or ''
    if root and not os.path.isabs(root):
        root = os.path.join(project_root(), root)
    return os.path.join(root, path) if root else os.path.abspath(path)
