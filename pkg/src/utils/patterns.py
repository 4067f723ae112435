from __future__ import annotations
import re
from typing import Pattern


class RegexPatterns:
    """
    常用正则表达式模式集中管理类（配置行、点分键、清单行）。
    """

    # data.layout=gtos_mobile  (值可为空，行尾注释由加载器先行剥离)
    CONFIG_LINE: Pattern = re.compile(r"^\s*(?P<key>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)\s*=\s*(?P<value>.*?)\s*$")
    DOTTED_KEY: Pattern = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*$")
    # images/brick/brick_000001.jpg<TAB>3
    MANIFEST_LINE: Pattern = re.compile(r"^(?P<path>[^\t]+)\t(?P<label>\d+)$")
