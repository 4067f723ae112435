from __future__ import annotations
import os
from typing import Iterable, List, Optional, Tuple
from src.utils.log.manager import get_logger

IMAGE_SUFFIXES: Tuple[str, ...] = (".png", ".jpg", ".jpeg", ".bmp")


class FileUtils:
    """
    通用文件操作工具类：文本读写、追加写（指标文件）、目录与图像文件遍历。
    """

    def __init__(self):
        self.logger = get_logger(self.__class__.__name__)

    def read_text(self, path: str, encoding: str = "utf-8") -> str:
        """
        读取文本文件内容。
        Args:
            path: 文件路径
            encoding: 编码
        Returns:
            str: 文件内容
        Raises:
            FileNotFoundError: 文件不存在
        """
        self.logger.debug(f"读取文本文件: {path}")
        if not os.path.exists(path):
            self.logger.error(f"文件不存在: {path}")
            raise FileNotFoundError(f"文件不存在: {path}")
        with open(path, "r", encoding=encoding) as f:
            return f.read()

    def write_text(self, path: str, content: str, encoding: str = "utf-8") -> None:
        """
        写入文本内容到文件（自动创建父目录，换行符固定为 \\n）。
        Args:
            path: 文件路径
            content: 写入内容
            encoding: 编码
        """
        self.logger.debug(f"写入文本到文件: {path}")
        self.ensure_dir(os.path.dirname(path))
        with open(path, "w", encoding=encoding, newline="\n") as f:
            f.write(content)

    def read_lines(self, path: str, encoding: str = "utf-8") -> List[str]:
        """
        读取文本文件所有非空行（去除行尾换行）。
        Args:
            path: 文件路径
            encoding: 编码
        Returns:
            List[str]: 文件行列表
        Raises:
            FileNotFoundError: 文件不存在
        """
        content = self.read_text(path, encoding)
        return [line.rstrip("\r") for line in content.split("\n") if line.strip()]

    def append_text(self, path: str, content: str, encoding: str = "utf-8") -> None:
        """
        追加文本内容到文件并立即刷盘。
        Args:
            path: 文件路径
            content: 追加内容
            encoding: 编码
        """
        self.logger.debug(f"追加文本到文件: {path}")
        with open(path, "a", encoding=encoding, newline="\n") as f:
            f.write(content)
            f.flush()
            os.fsync(f.fileno())

    def ensure_dir(self, directory: str) -> str:
        """创建目录（已存在时不报错），返回目录路径。"""
        if directory:
            os.makedirs(directory, exist_ok=True)
        return directory

    def list_dirs(self, directory: str) -> List[str]:
        """
        列出目录下的直接子目录名（按字典序）。
        Raises:
            NotADirectoryError: 目录不存在
        """
        if not os.path.isdir(directory):
            self.logger.error(f"目录不存在: {directory}")
            raise NotADirectoryError(f"目录不存在: {directory}")
        return sorted(entry for entry in os.listdir(directory)
                      if os.path.isdir(os.path.join(directory, entry)))

    def list_files(self, directory: str, suffixes: Optional[Iterable[str]] = None,
                   recursive: bool = False) -> List[str]:
        """
        列出目录下所有文件（可选后缀过滤，大小写不敏感），结果按路径字典序排序。
        Args:
            directory: 目录路径
            suffixes: 文件后缀元组（如 ('.png', '.jpg')）
            recursive: 是否递归子目录
        Returns:
            List[str]: 文件路径列表
        Raises:
            NotADirectoryError: 目录不存在
        """
        if not os.path.isdir(directory):
            self.logger.error(f"目录不存在: {directory}")
            raise NotADirectoryError(f"目录不存在: {directory}")
        wanted = tuple(s.lower() for s in suffixes) if suffixes else None
        files = []
        if recursive:
            for current, _, names in os.walk(directory):
                files.extend(os.path.join(current, name) for name in names)
        else:
            files = [os.path.join(directory, entry) for entry in os.listdir(directory)
                     if os.path.isfile(os.path.join(directory, entry))]
        if wanted:
            files = [path for path in files if path.lower().endswith(wanted)]
        return sorted(files)

    def list_images(self, directory: str, recursive: bool = False) -> List[str]:
        return self.list_files(directory, IMAGE_SUFFIXES, recursive)
