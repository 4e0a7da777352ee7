"""
AutoLC - 核心设施 (配置、异常、日志、检查点)
"""

from .config import config, load_run_config

__all__ = ['config', 'load_run_config']
