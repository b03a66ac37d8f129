"""
esclust 异常定义

所有数值错误均继承自 ValueError，并附带一个机器可读的 reason 字段，
便于基准测试流程把失败原因写入结果标记。
"""


class EsClustError(ValueError):
    """esclust 基础异常"""

    reason = "error"

    def __init__(self, message: str = "", reason: str = None):
        super().__init__(message or self.reason)
        if reason is not None:
            self.reason = reason


class NotSymmetricError(EsClustError):
    reason = "not symmetric"


class NotPSDError(EsClustError):
    reason = "not PSD"


class LabelRangeError(EsClustError):
    reason = "label out of range"


class IsolatedVertexError(EsClustError):
    reason = "isolated vertex"


class InsufficientSpectrumError(EsClustError):
    reason = "insufficient positive spectrum"


class DegenerateConfigurationError(EsClustError):
    reason = "degenerate latent configuration"


class InvalidScalingError(EsClustError):
    reason = "invalid empirical scaling"


class ComponentCollapseError(EsClustError):
    reason = "component collapse"


class CovarianceNotPDError(EsClustError):
    reason = "covariance not PD"


class NothingToCompareError(EsClustError):
    reason = "nothing to compare"


class ConfigError(EsClustError):
    reason = "invalid config"
