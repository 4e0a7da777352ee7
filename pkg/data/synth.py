"""
合成分割数据

Rectangles and ellipses of class colours on a faintly textured background
(class 0). Class colours sit on corners of the RGB cube, with the first four
on a regular tetrahedron, so a per-pixel affine classifier separates them.
"""

import logging
from typing import List, Tuple

import numpy as np

from core.errors import ConfigError
from .dataset import SegSample

logger = logging.getLogger(__name__)

_LOW, _HIGH = 0.15, 0.85
_CORNERS = [(0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
PALETTE = np.array([[_HIGH if bit else _LOW for bit in corner] for corner in _CORNERS], dtype=np.float32)
TEXTURE_AMPLITUDE = 0.03
NOISE_AMPLITUDE = 0.02


def _background(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / size
    fy, fx, phase = rng.uniform(1, 4), rng.uniform(1, 4), rng.uniform(0, 2 * np.pi)
    texture = TEXTURE_AMPLITUDE * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
    return PALETTE[0][:, None, None] + texture[None]


def _shape_mask(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = rng.integers(0, size, 2)
    hy, hx = rng.integers(max(1, size // 16), max(2, size // 6) + 1, 2)
    if rng.random() < 0.5:
        return (np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)
    return ((yy - cy) / hy) ** 2 + ((xx - cx) / hx) ** 2 <= 1.0


def synth_generate(num_samples: int, size: int, num_classes: int, seed: int = 0) -> List[SegSample]:
    """
    Deterministic per seed. Sample i always contains a shape of class
    1 + i mod (num_classes - 1), so every class occurs when
    num_samples >= num_classes - 1.
    """
    if num_classes < 2 or num_classes > len(PALETTE):
        raise ConfigError(f"num_classes must be in [2, {len(PALETTE)}], got {num_classes}")
    if num_samples <= 0 or size <= 0:
        raise ConfigError("num_samples and size must be positive")
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(num_samples):
        image = _background(size, rng)
        mask = np.zeros((size, size), dtype=np.int64)
        classes = [1 + i % (num_classes - 1)] + list(rng.integers(1, num_classes, int(rng.integers(1, 4))))
        for cls in classes:
            region = _shape_mask(size, rng)
            image[:, region] = PALETTE[cls][:, None]
            mask[region] = cls
        image = image + rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, image.shape).astype(np.float32)
        samples.append(SegSample(np.clip(image, 0.0, 1.0).astype(np.float32), mask, f'synth_{i:05d}'))
    logger.info(f"[SYNTH_GENERATED] samples={num_samples} size={size} classes={num_classes} seed={seed}")
    return samples


def class_census(samples, num_classes: int) -> np.ndarray:
    """Number of samples each class appears in."""
    counts = np.zeros(num_classes, dtype=np.int64)
    for sample in samples:
        present = np.unique(sample.load().mask)
        counts[present[present < num_classes]] += 1
    return counts


def fit_linear_pixel_classifier(samples, num_classes: int, ignore_index: int = 255) -> Tuple[np.ndarray, float]:
    """
    Class-balanced least-squares fit of one-hot targets on [r, g, b, 1].

    Returns the (4, C) weights and the training-set mIoU of argmax
    predictions, the separability figure reported for synthetic data.
    """
    from derived.metrics import confusion_matrix, mean_iou

    features, labels = [], []
    for sample in samples:
        sample = sample.load()
        keep = sample.mask.reshape(-1) != ignore_index
        pixels = sample.image.reshape(3, -1).T[keep].astype(np.float64)
        features.append(np.hstack([pixels, np.ones((len(pixels), 1))]))
        labels.append(sample.mask.reshape(-1)[keep])
    x = np.concatenate(features)
    y = np.concatenate(labels)
    targets = np.eye(num_classes)[y]
    frequency = np.bincount(y, minlength=num_classes).astype(np.float64)
    weights = np.sqrt(1.0 / np.maximum(frequency, 1.0))[y][:, None]
    coef, *_ = np.linalg.lstsq(x * weights, targets * weights, rcond=None)
    pred = (x @ coef).argmax(axis=1)
    miou = mean_iou(confusion_matrix(pred, y, num_classes, ignore_index))
    logger.info(f"[SYNTH_SEPARABILITY] linear pixel classifier miou={miou:.4f}")
    return coef, miou
