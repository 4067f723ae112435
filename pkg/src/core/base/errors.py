"""
异常基类和层次化的异常体系。

定义纹理识别工具包中使用的所有异常接口和实现，遵循层次结构和明确的命名规范。
每个异常接口对应特定的错误场景（形状、权重、数据、配置、训练……），避免使用通用异常。
"""

from typing import Any, Optional, Sequence


class TerrainError(Exception):
    """工具包基础异常类。

    所有工具包特定异常都应继承自此类，便于 CLI 统一处理（退出码 1）。

    Attributes:
        message: 错误信息
        cause: 原始异常（如果有）
    """

    def __init__(self, message: str, cause: Optional[Exception] = None) -> None:
        """初始化异常。

        Args:
            message: 错误信息
            cause: 导致此异常的原始异常（如果有）
        """
        self.message = message
        self.cause = cause
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        """格式化错误信息。

        如果有原始异常，将其包含在消息中。

        Returns:
            格式化后的错误信息
        """
        if self.cause:
            return f"{self.message} | 原因: {self.cause}"
        return self.message


# 配置相关异常接口
class ConfigurationError(TerrainError):
    """配置相关异常基类接口。

    用于表示所有与配置加载、访问和验证相关的错误。
    """
    pass


class ConfigKeyError(ConfigurationError):
    """配置键不存在异常接口。

    当访问或覆盖不存在的配置项时抛出（未知键一律拒绝）。
    """
    def __init__(self, key: str, message: Optional[str] = None) -> None:
        """初始化异常。

        Args:
            key: 不存在的配置键（点分形式，如 data.layout）
            message: 错误信息，默认为None
        """
        self.key = key
        message = message or f"配置键 '{key}' 不存在"
        super().__init__(message)


class ConfigTypeError(ConfigurationError):
    """配置类型错误异常接口。

    当配置项值类型不符合预期时抛出。
    """
    def __init__(self, key: str, expected_type: str, actual_type: str,
                 message: Optional[str] = None) -> None:
        """初始化异常。

        Args:
            key: 配置键
            expected_type: 预期类型
            actual_type: 实际类型
            message: 错误信息，默认为None
        """
        self.key = key
        self.expected_type = expected_type
        self.actual_type = actual_type
        message = message or f"配置键 '{key}' 类型错误: 预期 {expected_type}, 实际 {actual_type}"
        super().__init__(message)


class ConfigValueError(ConfigurationError):
    """配置值错误异常接口。

    当配置项值不符合预期范围或格式时抛出（如 epochs=0、未知的模型变体）。
    """
    def __init__(self, key: str, value: Any, message: Optional[str] = None) -> None:
        """初始化异常。

        Args:
            key: 配置键
            value: 无效的配置值
            message: 错误信息，默认为None
        """
        self.key = key
        self.value = value
        message = message or f"配置键 '{key}' 的值 '{value}' 无效"
        super().__init__(message)


class ConfigFileError(ConfigurationError):
    """配置文件错误异常。

    当配置文件不存在或某一行无法解析时抛出。
    """
    pass


# 张量形状相关异常
class ShapeError(TerrainError):
    """张量形状不符合约定时抛出。

    消息中总是同时给出预期尺寸和实际尺寸。
    """
    def __init__(self, name: str, expected: Sequence[Any], actual: Sequence[Any],
                 message: Optional[str] = None) -> None:
        """初始化异常。

        Args:
            name: 出错张量的名称
            expected: 预期形状（可含 None 表示任意）
            actual: 实际形状
            message: 错误信息，默认为None
        """
        self.name = name
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        message = message or f"{name} 形状错误: 预期 {self.expected}, 实际 {self.actual}"
        super().__init__(message)


# 权重相关异常接口
class WeightsError(TerrainError):
    """预训练权重相关异常基类接口。"""
    pass


class WeightsLoadError(WeightsError):
    """权重文件缺失、损坏或深度不匹配。"""
    pass


# 数据相关异常接口
class DataError(TerrainError):
    """数据相关异常基类接口。

    用于表示所有与数据集扫描、图像读取和生成相关的错误。
    """
    pass


class DatasetError(DataError):
    """数据集目录结构异常。

    当根目录为空、缺少划分文件或类别数与约定布局不符时抛出。
    """
    pass


class DataLoadError(DataError):
    """图像读取失败异常。"""
    pass


class DataFormatError(DataError):
    """数据格式错误异常。

    当清单文件或划分文件的某一行格式不符合预期时抛出。
    """
    pass


# 输入校验相关异常接口
class InputValidationError(TerrainError):
    """输入校验失败异常接口。"""
    pass


class LabelRangeError(InputValidationError):
    """标签超出 [0, C) 范围。"""
    pass


class ClassCountMismatchError(InputValidationError):
    """检查点的类别数与数据集的类别数不一致。"""
    pass


# 训练相关异常接口
class TrainingError(TerrainError):
    """训练过程相关异常基类接口。"""
    pass


class TrainingDivergedError(TrainingError):
    """损失出现 NaN/Inf 时中止训练。

    Attributes:
        parameter: 第一个梯度非有限的参数名（若能定位）
    """
    def __init__(self, parameter: Optional[str], message: Optional[str] = None) -> None:
        self.parameter = parameter
        if message is None:
            if parameter:
                message = f"损失非有限，训练中止；第一个非有限梯度参数: {parameter}"
            else:
                message = "损失非有限，训练中止；所有参数梯度均有限"
        super().__init__(message)


class CheckpointError(TerrainError):
    """检查点目录缺失或内容损坏。"""
    pass


# 报告相关异常接口
class ReportError(TerrainError):
    """报告相关异常基类接口。"""
    pass


class ReportGenerationError(ReportError):
    """消融对比表等报告生成失败。"""
    pass
