"""
AutoLC - 自动微分引擎

Dense numpy tensors with a reverse-mode tape, optimizers, learning-rate
schedules and a finite-difference checker.
"""

from .tensor import (
    Tensor, Parameter, MetaArray, Function, backward, no_grad, is_grad_enabled,
    default_dtype, get_default_dtype, frozen, trace_hook, name_scope, current_scope, unbroadcast,
)
from .ops import concat, softmax, broadcast_to, identity, zeros_like
from .optim import SGD, Adam, sgd_momentum_step, adam_step
from .schedule import LrSchedule, ScheduleKind, lr_at
from .gradcheck import finite_diff_check

__all__ = [
    'Tensor', 'Parameter', 'MetaArray', 'Function', 'backward', 'no_grad', 'is_grad_enabled',
    'default_dtype', 'get_default_dtype', 'frozen', 'trace_hook', 'name_scope', 'current_scope', 'unbroadcast',
    'concat', 'softmax', 'broadcast_to', 'identity', 'zeros_like',
    'SGD', 'Adam', 'sgd_momentum_step', 'adam_step',
    'LrSchedule', 'ScheduleKind', 'lr_at',
    'finite_diff_check',
]
