"""
异常定义

All library errors derive from AutoLCError so the command line can map them
to process exit codes (0 ok, 1 usage, 2 data error, 3 numerical failure).
"""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class AutoLCError(Exception):
    """基础异常类"""

    default_exit_code = EXIT_DATA
    default_error_code = 'AUTOLC_ERROR'

    def __init__(self,
                 message: str,
                 exit_code: Optional[int] = None,
                 error_code: Optional[str] = None,
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.exit_code = self.default_exit_code if exit_code is None else exit_code
        self.error_code = error_code or self.default_error_code
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        result = {
            'code': self.exit_code,
            'message': self.message,
            'error_details': {'code': self.error_code},
        }
        if self.details:
            result['error_details']['details'] = self.details
        return result


class ConfigError(AutoLCError):
    """配置错误 (usage)"""
    default_exit_code = EXIT_USAGE
    default_error_code = 'INVALID_CONFIG'


class DataError(AutoLCError):
    """数据错误: missing files, bad labels, malformed documents"""
    default_error_code = 'DATA_ERROR'


class GenotypeError(DataError):
    default_error_code = 'INVALID_GENOTYPE'


class SearchSpaceError(DataError):
    default_error_code = 'INVALID_SEARCH_SPACE'


class ShapeError(AutoLCError, ValueError):
    """张量形状不匹配"""
    default_error_code = 'SHAPE_MISMATCH'


class AutodiffError(AutoLCError):
    default_exit_code = EXIT_NUMERICAL
    default_error_code = 'AUTODIFF_ERROR'


class NumericalError(AutoLCError):
    """数值异常 (non-finite loss, broken normalization)"""
    default_exit_code = EXIT_NUMERICAL
    default_error_code = 'NUMERICAL_FAILURE'
