"""
检查点读写

Checkpoint files are JSON documents mapping tensor names to shape, dtype
and base64-encoded little-endian values:

    {
        "format": "autolc-checkpoint/1",
        "tensors": {"stem.conv1.weight": {"shape": [6, 3, 3, 3],
                                          "dtype": "float32",
                                          "data": "<base64>"}},
        "meta": {...}
    }
"""

import base64
import json
import logging
import os
from datetime import date, datetime
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'autolc-checkpoint/1'
_SUPPORTED_DTYPES = {'float32': '<f4', 'float64': '<f8', 'int64': '<i8'}


def json_default(value):
    """JSON 序列化兜底处理"""
    if isinstance(value, (datetime, date)):
        return value.isoformat()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, 'value'):
        return value.value
    return str(value)


def encode_array(array: np.ndarray) -> Dict[str, Any]:
    array = np.asarray(array)
    dtype_name = array.dtype.name
    if dtype_name not in _SUPPORTED_DTYPES:
        raise DataError(f"Unsupported checkpoint dtype: {dtype_name}")
    raw = np.ascontiguousarray(array, dtype=_SUPPORTED_DTYPES[dtype_name]).tobytes()
    return {
        'shape': list(array.shape),
        'dtype': dtype_name,
        'data': base64.b64encode(raw).decode('ascii'),
    }


def decode_array(entry: Dict[str, Any]) -> np.ndarray:
    dtype_name = entry.get('dtype', 'float32')
    if dtype_name not in _SUPPORTED_DTYPES:
        raise DataError(f"Unsupported checkpoint dtype: {dtype_name}")
    raw = base64.b64decode(entry['data'])
    array = np.frombuffer(raw, dtype=_SUPPORTED_DTYPES[dtype_name]).astype(dtype_name)
    shape = tuple(int(s) for s in entry['shape'])
    if int(np.prod(shape, dtype=np.int64)) != array.size:
        raise DataError(f"Checkpoint entry size mismatch for shape {shape}")
    return array.reshape(shape)


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray], meta: Optional[Dict[str, Any]] = None) -> str:
    """写入检查点文件 (atomic replace)"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    document = {
        'format': CHECKPOINT_FORMAT,
        'tensors': {name: encode_array(value) for name, value in tensors.items()},
        'meta': meta or {},
    }
    tmp_path = f"{path}.tmp"
    with open(tmp_path, 'w', encoding='utf-8') as f:
        json.dump(document, f, default=json_default)
    os.replace(tmp_path, path)
    logger.debug(f"[CHECKPOINT_SAVED] {path}", extra={'tensor_count': len(tensors)})
    return path


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """读取检查点文件"""
    if not os.path.exists(path):
        raise DataError(f"Checkpoint not found: {path}", error_code='CHECKPOINT_NOT_FOUND')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except (OSError, ValueError) as e:
        raise DataError(f"Unreadable checkpoint {path}: {e}", error_code='CHECKPOINT_UNREADABLE')

    if document.get('format') != CHECKPOINT_FORMAT:
        raise DataError(f"Unknown checkpoint format in {path}: {document.get('format')}")
    tensors = {name: decode_array(entry) for name, entry in document.get('tensors', {}).items()}
    return tensors, document.get('meta', {})


def write_json(path: str, value: Any) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(value, f, indent=2, default=json_default)
    return path


def read_json(path: str) -> Any:
    if not os.path.exists(path):
        raise DataError(f"File not found: {path}", error_code='FILE_NOT_FOUND')
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except ValueError as e:
        raise DataError(f"Malformed JSON in {path}: {e}", error_code='MALFORMED_JSON')
