"""
共享网络组件: stem and trellis transition adapters

Used by both the supernet and the derived encoder so the two stay
structurally identical.
"""

from typing import Tuple

import numpy as np

from autodiff.tensor import Tensor
from core.errors import ShapeError
from models.configs import SearchConfig
from models.genotype import STEM_RATE
from nn import functional as F
from nn.layers import BatchNorm2d, Conv2d, ConvBNReLU
from nn.module import Module, Sequential
from .space import channels_for


def stem_channels(config: SearchConfig) -> Tuple[int, int]:
    """(rate-2 channels, rate-4 channels)"""
    base = config.blocks * config.filter_multiplier
    return max(1, base // 2), base


class Stem(Module):
    """Two stride-2 3x3 conv+BN+ReLU layers: rate 2 then rate 4."""

    def __init__(self, config: SearchConfig, in_channels: int = 3):
        super().__init__()
        half, full = stem_channels(config)
        self.divisor = config.max_rate
        self.conv1 = ConvBNReLU(in_channels, half, 3, stride=2)
        self.conv2 = ConvBNReLU(half, full, 3, stride=2)

    def forward(self, image: Tensor) -> Tuple[Tensor, Tensor]:
        if image.ndim != 4:
            raise ShapeError(f"Stem expects (N, C, H, W), got {image.shape}")
        h, w = image.shape[2:]
        if h % self.divisor or w % self.divisor:
            raise ShapeError(f"Input extent {h}x{w} must be divisible by {self.divisor}")
        stem1 = self.conv1(image)
        stem0 = self.conv2(stem1)
        return stem1, stem0


def pad_to_multiple(image: Tensor, multiple: int) -> Tensor:
    """Mirror-pads bottom/right so H and W become multiples of ``multiple``; images carry no gradient."""
    h, w = image.shape[2:]
    pad_h, pad_w = -h % multiple, -w % multiple
    if not pad_h and not pad_w:
        return image
    if image.requires_grad:
        raise ShapeError(f"Cannot pad an input that requires grad ({h}x{w} to a multiple of {multiple})")
    if image.is_meta:
        return Tensor.meta(image.shape[:2] + (h + pad_h, w + pad_w), image.dtype)
    padding = ((0, 0), (0, 0), (0, pad_h), (0, pad_w))
    return Tensor(np.pad(image.data, padding, mode='symmetric'))


def crop_to(logits: Tensor, size: Tuple[int, int]) -> Tensor:
    """Top-left window of ``size``; a no-op when the extents already match."""
    h, w = size
    if logits.shape[2:] == (h, w):
        return logits
    return logits[:, :, :h, :w]


class UpAdapter(Module):
    """x2 bilinear upsample then 1x1 conv + BN"""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, 1)
        self.bn = BatchNorm2d(out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.conv(F.bilinear_resize(x, factor=2)))


class DownAdapter(Module):
    """3x3 stride-2 conv + BN"""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, 3, stride=2)
        self.bn = BatchNorm2d(out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.conv(x))


def make_adapter(config: SearchConfig, source_rate: int, target_rate: int):
    """None for the identity transition."""
    if source_rate == target_rate:
        return None
    if source_rate * 2 == target_rate:
        return DownAdapter(channels_for(config, source_rate), channels_for(config, target_rate))
    if source_rate == target_rate * 2:
        return UpAdapter(channels_for(config, source_rate), channels_for(config, target_rate))
    raise ShapeError(f"No transition from rate {source_rate} to {target_rate}")


def make_stem_chain(config: SearchConfig, target_rate: int) -> Sequential:
    """Down adapters from the rate-2 stem output to ``target_rate``; the first cell's second input."""
    chain = Sequential()
    channels, rate = stem_channels(config)[0], STEM_RATE // 2
    while rate < target_rate:
        out = channels_for(config, rate * 2)
        chain.append(DownAdapter(channels, out))
        channels, rate = out, rate * 2
    return chain
