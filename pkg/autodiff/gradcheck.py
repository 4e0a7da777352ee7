"""
有限差分梯度检查
"""

import logging
from typing import Callable, Sequence

import numpy as np

from core.errors import NumericalError
from .tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)


def _evaluate(function: Callable[[], Tensor]) -> float:
    with no_grad():
        value = function()
    value = float(np.asarray(value.data).reshape(-1)[0])
    if not np.isfinite(value):
        raise NumericalError("Function under check returned a non-finite value")
    return value


def finite_diff_check(function: Callable[[], Tensor], parameters: Sequence[Tensor], eps: float = 1e-5) -> float:
    """
    Max over every parameter scalar of
    |analytic - central difference| / max(|analytic|, |cd|, 1e-12).

    ``function`` takes no arguments and recomputes the scalar from the
    current parameter values. Run it in double precision.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    for p in parameters:
        p.grad = None
    loss = function()
    if not np.all(np.isfinite(np.asarray(loss.data))):
        raise NumericalError("Function under check returned a non-finite value")
    analytic = backward(loss, parameters)

    worst = 0.0
    for p in parameters:
        grad = analytic[p]
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            upper = _evaluate(function)
            flat[i] = original - eps
            lower = _evaluate(function)
            flat[i] = original
            numeric = (upper - lower) / (2 * eps)
            exact = float(grad.reshape(-1)[i])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-12)
            worst = max(worst, error)
    logger.debug(f"[GRADCHECK] parameters={len(parameters)} max_rel_error={worst:.3e}")
    return worst
