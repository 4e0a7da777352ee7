"""
参数初始化
"""

import math
from typing import Optional

import numpy as np

from autodiff.tensor import get_default_dtype

_generator = np.random.default_rng(0)


def manual_seed(seed: int) -> np.random.Generator:
    """Reseed the generator used by every layer constructor."""
    global _generator
    _generator = np.random.default_rng(seed)
    return _generator


def get_generator() -> np.random.Generator:
    return _generator


def kaiming_normal(shape, fan_in: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """He initialization for ReLU networks: N(0, 2 / fan_in)."""
    rng = rng or _generator
    std = math.sqrt(2.0 / max(1, fan_in))
    return (rng.standard_normal(shape) * std).astype(get_default_dtype())


def zeros(shape) -> np.ndarray:
    return np.zeros(shape, dtype=get_default_dtype())


def ones(shape) -> np.ndarray:
    return np.ones(shape, dtype=get_default_dtype())
