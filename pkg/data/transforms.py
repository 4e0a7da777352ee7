"""
成对数据增强

Every transform applies the same geometry to image and mask.
"""

import numpy as np

from core.errors import DataError
from nn.functional import resize_matrix
from .dataset import SegSample


def reflect_pad_pair(sample: SegSample, size: int) -> SegSample:
    """Reflect-pads bottom/right until both extents reach ``size``."""
    h, w = sample.mask.shape
    pad_h, pad_w = max(0, size - h), max(0, size - w)
    if not pad_h and not pad_w:
        return sample
    if (pad_h and h < 2) or (pad_w and w < 2):
        raise DataError(f"Sample {sample.id} of extent {h}x{w} is too small to reflect-pad")
    image = np.pad(sample.image, ((0, 0), (0, pad_h), (0, pad_w)), mode='reflect')
    mask = np.pad(sample.mask, ((0, pad_h), (0, pad_w)), mode='reflect')
    return SegSample(image, mask, sample.id)


def random_crop_pair(sample: SegSample, size: int, rng: np.random.Generator) -> SegSample:
    """One ``size`` x ``size`` window drawn from ``rng``, shared by image and mask."""
    sample = reflect_pad_pair(sample, size)
    h, w = sample.mask.shape
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return SegSample(
        np.ascontiguousarray(sample.image[:, top:top + size, left:left + size]),
        np.ascontiguousarray(sample.mask[top:top + size, left:left + size]),
        sample.id,
    )


def half_scale(sample: SegSample) -> SegSample:
    """Image bilinear x1/2, mask nearest-neighbour x1/2."""
    h, w = sample.mask.shape
    if h % 2 or w % 2:
        raise DataError(f"Sample {sample.id}: half-scaling needs even extents, got {h}x{w}")
    rows = resize_matrix(h, h // 2)
    cols = resize_matrix(w, w // 2)
    image = np.matmul(np.matmul(rows, sample.image.astype(np.float64)), cols.T).astype(sample.image.dtype)
    mask = np.ascontiguousarray(sample.mask[::2, ::2])
    return SegSample(image, mask, sample.id)
