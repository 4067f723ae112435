"""
核心基础模块，定义异常体系和配置层级。
"""

from .config_defs import CONFIG_MERGE_ORDER, ConfigLevel
from .errors import (
    CheckpointError,
    ClassCountMismatchError,
    ConfigFileError,
    ConfigKeyError,
    ConfigTypeError,
    ConfigValueError,
    ConfigurationError,
    DataError,
    DataFormatError,
    DataLoadError,
    DatasetError,
    InputValidationError,
    LabelRangeError,
    ReportGenerationError,
    ShapeError,
    TerrainError,
    TrainingDivergedError,
    WeightsLoadError,
)

__all__ = [
    "CONFIG_MERGE_ORDER",
    "ConfigLevel",
    "CheckpointError",
    "ClassCountMismatchError",
    "ConfigFileError",
    "ConfigKeyError",
    "ConfigTypeError",
    "ConfigValueError",
    "ConfigurationError",
    "DataError",
    "DataFormatError",
    "DataLoadError",
    "DatasetError",
    "InputValidationError",
    "LabelRangeError",
    "ReportGenerationError",
    "ShapeError",
    "TerrainError",
    "TrainingDivergedError",
    "WeightsLoadError",
]
