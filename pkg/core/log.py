"""
日志配置

Root logger setup plus a timing context manager used around long stages
(search epochs, training runs, cost traces).
"""

import contextlib
import logging
import os
import time
from logging.handlers import RotatingFileHandler

logger = logging.getLogger(__name__)

DEBUG_FORMAT = '%(asctime)s %(levelname)s: %(message)s'
DEFAULT_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'


def setup_logging(level='INFO', log_file=None):
    """配置日志系统"""
    level_value = logging.getLevelName(str(level).upper())
    if not isinstance(level_value, int):
        level_value = logging.INFO

    if level_value <= logging.DEBUG:
        logging.basicConfig(level=level_value, format=DEBUG_FORMAT, force=True)
    else:
        logging.basicConfig(level=level_value, format=DEFAULT_FORMAT, force=True)

    if log_file:
        log_dir = os.path.dirname(os.path.abspath(log_file))
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(log_file, maxBytes=10240000, backupCount=10)
        file_handler.setFormatter(logging.Formatter(DEFAULT_FORMAT))
        file_handler.setLevel(level_value)
        logging.getLogger().addHandler(file_handler)


@contextlib.contextmanager
def log_stage(name, **context):
    """Log [STAGE_START]/[STAGE_END] around a block with its duration."""
    stage_id = f"{int(time.time() * 1000)}-{name}"
    start = time.time()
    logger.info(f"[STAGE_START] {stage_id}", extra={'stage': name, **context})
    try:
        yield stage_id
    except Exception as e:
        duration = time.time() - start
        logger.error(f"[STAGE_FAILED] {stage_id} after {duration:.3f}s: {e}", extra={
            'stage': name,
            'duration_s': round(duration, 3),
            **context,
        })
        raise
    duration = time.time() - start
    logger.info(f"[STAGE_END] {stage_id} Duration: {duration:.3f}s", extra={
        'stage': name,
        'duration_ms': round(duration * 1000, 2),
        'duration_s': round(duration, 3),
        **context,
    })
