"""
AutoLC - 神经网络构件

Functional kernels, the Module system, basic layers and the eight candidate
operators of the cell search space.
"""

from . import functional, init
from .module import Module, ModuleList, ModuleDict, Sequential
from .layers import Conv2d, BatchNorm2d, ReLU, ConvBNReLU
from .operations import CandidateOp, OPS, make_op, candidate_forward, op_param_count

__all__ = [
    'functional', 'init',
    'Module', 'ModuleList', 'ModuleDict', 'Sequential',
    'Conv2d', 'BatchNorm2d', 'ReLU', 'ConvBNReLU',
    'CandidateOp', 'OPS', 'make_op', 'candidate_forward', 'op_param_count',
]
