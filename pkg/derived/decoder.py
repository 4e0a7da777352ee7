"""
自适应轻量解码器

Feature pyramid over the encoder's tapped rates, a fusion module bringing
every level to rate 4, ASPP on the deepest encoder state, and the semantic
aggregation head producing per-pixel class scores.
"""

import math
from typing import Dict, Sequence, Tuple

from autodiff.ops import broadcast_to, concat
from autodiff.tensor import Tensor
from core.errors import ConfigError, ShapeError
from models.configs import DEFAULT_RESOLUTIONS
from models.genotype import STEM_RATE, level_of
from nn import functional as F
from nn.layers import Conv2d, ConvBNReLU
from nn.module import Module, ModuleDict, ModuleList, Sequential


class FPN(Module):
    """1x1 lateral + BN per level, top-down resize-and-add from the coarsest level, 3x3 smoothing."""

    def __init__(self, in_channels: Dict[int, int], dim: int):
        super().__init__()
        if not in_channels:
            raise ShapeError("FPN needs at least one tapped level")
        self.rates = tuple(sorted(in_channels))
        self.dim = dim
        self.lateral = ModuleDict({s: ConvBNReLU(c, dim, 1, relu=False) for s, c in in_channels.items()})
        self.smooth = ModuleDict({s: ConvBNReLU(dim, dim, 3) for s in self.rates})

    def forward(self, taps: Dict[int, Tensor]) -> Dict[int, Tensor]:
        if set(taps) != set(self.rates):
            raise ShapeError(f"FPN built for rates {self.rates}, got {sorted(taps)}")
        merged = {}
        top = None
        for rate in reversed(self.rates):
            lateral = self.lateral[rate](taps[rate])
            if top is not None:
                # gaps in the tapped rates are bridged by resizing straight to the lateral's extent
                lateral = lateral + F.bilinear_resize(top, size=lateral.shape[2:])
            merged[rate] = lateral
            top = lateral
        return {rate: self.smooth[rate](merged[rate]) for rate in self.rates}


def fusion_stage_count(rate: int) -> int:
    """log2(s / 4) upsampling stages; the rate-4 level gets one stage without upsampling."""
    if rate not in DEFAULT_RESOLUTIONS:
        raise ShapeError(f"Unsupported pyramid rate {rate}")
    return max(1, level_of(rate))


class FusionStage(Module):
    """3x3 conv + BN + ReLU, then x2 bilinear upsampling when ``upsample``."""

    def __init__(self, dim: int, upsample: bool):
        super().__init__()
        self.conv = ConvBNReLU(dim, dim, 3)
        self.upsample = upsample

    def forward(self, x: Tensor) -> Tensor:
        out = self.conv(x)
        return F.bilinear_resize(out, factor=2) if self.upsample else out


class FeatureFusion(Module):
    def __init__(self, rates: Sequence[int], dim: int):
        super().__init__()
        self.rates = tuple(sorted(rates))
        self.stages = ModuleDict()
        for rate in self.rates:
            upsample = rate > STEM_RATE
            self.stages[rate] = Sequential([FusionStage(dim, upsample) for _ in range(fusion_stage_count(rate))])

    def forward(self, levels: Dict[int, Tensor]) -> Tensor:
        out = None
        for rate in self.rates:
            term = self.stages[rate](levels[rate])
            if out is not None and term.shape != out.shape:
                raise ShapeError(f"Fusion level {rate} produced {term.shape}, expected {out.shape}")
            out = term if out is None else out + term
        return out


def aspp_rates(rates: Sequence[int], final_rate: int) -> Tuple[int, ...]:
    """Configured atrous rates scaled by final_rate / 16, at least 1."""
    return tuple(max(1, int(math.floor(r * final_rate / 16))) for r in rates)


class ASPPPooling(Module):
    """Global average pool, 1x1 conv with bias, ReLU, broadcast back."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, 1, bias=True)

    def forward(self, x: Tensor) -> Tensor:
        pooled = F.relu(self.conv(x.mean(axis=(2, 3), keepdims=True)))
        n, _, h, w = x.shape
        return broadcast_to(pooled, (n, pooled.shape[1], h, w))


class ASPP(Module):
    def __init__(self, in_channels: int, out_channels: int, rates: Sequence[int] = (6, 12, 18)):
        super().__init__()
        self.rates = tuple(rates)
        self.branches = ModuleList([ConvBNReLU(in_channels, out_channels, 1)])
        for rate in self.rates:
            self.branches.append(ConvBNReLU(in_channels, out_channels, 3, dilation=rate))
        self.pooling = ASPPPooling(in_channels, out_channels)
        self.project = ConvBNReLU(out_channels * (len(self.rates) + 2), out_channels, 1)

    def forward(self, x: Tensor) -> Tensor:
        outputs = [branch(x) for branch in self.branches]
        outputs.append(self.pooling(x))
        return self.project(concat(outputs, axis=1))


class SemanticAggregation(Module):
    """Combine fusion and ASPP outputs (concat or add), 3x3 conv+BN+ReLU, 1x1 classifier."""

    def __init__(self, dim: int, num_classes: int, mode: str = 'concat'):
        super().__init__()
        if mode not in ('concat', 'add'):
            raise ConfigError(f"aggregation must be 'concat' or 'add', got {mode}")
        self.mode = mode
        self.conv = ConvBNReLU(2 * dim if mode == 'concat' else dim, dim, 3)
        self.classifier = Conv2d(dim, num_classes, 1, bias=True)

    def forward(self, fusion: Tensor, aspp: Tensor, input_hw: Tuple[int, int]) -> Tensor:
        """Class logits at ``input_hw``."""
        if aspp.shape[2:] != fusion.shape[2:]:
            aspp = F.bilinear_resize(aspp, size=fusion.shape[2:])
        if aspp.shape != fusion.shape:
            raise ShapeError(f"Cannot combine {fusion.shape} with {aspp.shape}")
        combined = concat([fusion, aspp], axis=1) if self.mode == 'concat' else fusion + aspp
        logits = self.classifier(self.conv(combined))
        return F.bilinear_resize(logits, size=tuple(input_hw))


def semantic_aggregation(head: SemanticAggregation, fusion: Tensor, aspp: Tensor,
                         input_hw: Tuple[int, int]) -> Tensor:
    """Per-pixel class distribution."""
    return F.softmax(head(fusion, aspp, input_hw), axis=1)
