"""
候选算子

The eight branch operators of a block. Convolutional candidates use the
pre-activation stack ReLU -> depthwise k x k -> pointwise 1 x 1 -> BN, with
bias-free convolutions. All candidates preserve the input shape.
"""

from typing import Callable, Dict

from autodiff.ops import identity, zeros_like
from autodiff.tensor import Tensor
from core.errors import ShapeError
from models.genotype import OperatorKind
from . import functional as F
from .layers import BatchNorm2d, Conv2d
from .module import Module


class CandidateOp(Module):
    """Operator instance bound to a channel count."""

    kind: OperatorKind = None

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels

    def __repr__(self):
        return f'{self.__class__.__name__}(kind={self.kind.value}, channels={self.channels})'


class SepConv(CandidateOp):
    def __init__(self, channels: int, kernel_size: int, dilation: int = 1):
        super().__init__(channels)
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.depthwise = Conv2d(channels, channels, kernel_size, dilation=dilation, groups=channels)
        self.pointwise = Conv2d(channels, channels, 1)
        self.bn = BatchNorm2d(channels)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.pointwise(self.depthwise(F.relu(x))))


class AvgPool(CandidateOp):
    kind = OperatorKind.AVG_POOL_3X3

    def forward(self, x):
        return F.avg_pool2d(x, 3, stride=1)


class MaxPool(CandidateOp):
    kind = OperatorKind.MAX_POOL_3X3

    def forward(self, x):
        return F.max_pool2d(x, 3, stride=1)


class Skip(CandidateOp):
    kind = OperatorKind.SKIP

    def forward(self, x):
        return identity(x)


class Null(CandidateOp):
    kind = OperatorKind.NULL

    def forward(self, x):
        return zeros_like(x)


def _sep(kind, kernel_size, dilation):
    def build(channels):
        op = SepConv(channels, kernel_size, dilation)
        op.kind = kind
        return op
    return build


OPS: Dict[OperatorKind, Callable[[int], CandidateOp]] = {
    OperatorKind.SEP_CONV_3X3: _sep(OperatorKind.SEP_CONV_3X3, 3, 1),
    OperatorKind.ATROUS_CONV_3X3: _sep(OperatorKind.ATROUS_CONV_3X3, 3, 2),
    OperatorKind.SEP_CONV_5X5: _sep(OperatorKind.SEP_CONV_5X5, 5, 1),
    OperatorKind.ATROUS_CONV_5X5: _sep(OperatorKind.ATROUS_CONV_5X5, 5, 2),
    OperatorKind.AVG_POOL_3X3: AvgPool,
    OperatorKind.MAX_POOL_3X3: MaxPool,
    OperatorKind.SKIP: Skip,
    OperatorKind.NULL: Null,
}


def make_op(kind, channels: int) -> CandidateOp:
    return OPS[OperatorKind.parse(kind)](channels)


def candidate_forward(op: CandidateOp, x: Tensor) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"Candidate operators expect 4-D input, got {x.shape}")
    if x.shape[1] != op.channels:
        raise ShapeError(f"{op.kind.value} built for {op.channels} channels got {x.shape[1]}")
    return op(x)


def op_param_count(kind, channels: int) -> int:
    """Closed form: k^2 C + C^2 + 2C for the convolutional candidates, 0 otherwise."""
    kind = OperatorKind.parse(kind)
    sizes = {OperatorKind.SEP_CONV_3X3: 3, OperatorKind.ATROUS_CONV_3X3: 3,
             OperatorKind.SEP_CONV_5X5: 5, OperatorKind.ATROUS_CONV_5X5: 5}
    if kind not in sizes:
        return 0
    return sizes[kind] ** 2 * channels + channels * channels + 2 * channels
