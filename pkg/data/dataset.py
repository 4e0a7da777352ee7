"""
分割数据集

Directory layout::

    <root>/<split>/images_png/<stem>.png   RGB
    <root>/<split>/masks_png/<stem>.png    single channel class indices

Samples are referenced lazily and decoded with Pillow on ``load()``.
"""

import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image

from core.errors import DataError
from models.configs import DatasetConfig

logger = logging.getLogger(__name__)

IMAGES_DIR = 'images_png'
MASKS_DIR = 'masks_png'


@dataclass(frozen=True)
class SegSample:
    """image (3, H, W) float in [0, 1]; mask (H, W) int64"""
    image: np.ndarray
    mask: np.ndarray
    id: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise DataError(f"Sample {self.id}: image must be (3, H, W), got {self.image.shape}")
        if self.mask.shape != self.image.shape[1:]:
            raise DataError(f"Sample {self.id}: mask {self.mask.shape} does not match image {self.image.shape[1:]}")

    def load(self) -> 'SegSample':
        return self


def check_labels(mask: np.ndarray, num_classes: int, ignore_index: int, source: str):
    bad = ((mask >= num_classes) & (mask != ignore_index)) | (mask < 0)
    if bad.any():
        values = sorted(int(v) for v in np.unique(mask[bad]))[:10]
        raise DataError(f"Labels out of range in {source}: {values}",
                        error_code='LABEL_OUT_OF_RANGE',
                        details={'file': source, 'num_classes': num_classes, 'ignore_index': ignore_index})


def read_image(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            array = np.asarray(img.convert('RGB'), dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        raise DataError(f"Unreadable image {path}: {e}", error_code='UNREADABLE_FILE')
    return np.ascontiguousarray(array.transpose(2, 0, 1))


def read_mask(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode not in ('L', 'P', 'I', 'I;16'):
                raise DataError(f"Mask {path} must be single channel, got mode {img.mode}")
            array = np.asarray(img, dtype=np.int64)
    except OSError as e:
        raise DataError(f"Unreadable mask {path}: {e}", error_code='UNREADABLE_FILE')
    return array


@dataclass(frozen=True)
class SampleRef:
    id: str
    image_path: str
    mask_path: str
    num_classes: int
    ignore_index: int = 255
    validate_labels: bool = True

    def load(self) -> SegSample:
        image = read_image(self.image_path)
        mask = read_mask(self.mask_path)
        if self.validate_labels:
            check_labels(mask, self.num_classes, self.ignore_index, self.mask_path)
        return SegSample(image, mask, self.id)


def _stems(directory: str) -> List[str]:
    return sorted(os.path.splitext(name)[0] for name in os.listdir(directory) if name.lower().endswith('.png'))


def load_dataset(config: DatasetConfig, split: Optional[str] = None) -> List[SampleRef]:
    """Sorted references over matched image/mask pairs of ``split`` (the train split by default)."""
    if not config.root:
        raise DataError("Dataset root is not configured", error_code='DATASET_NOT_FOUND')
    split_dir = os.path.join(config.root, split or config.train_split)
    images_dir = os.path.join(split_dir, IMAGES_DIR)
    masks_dir = os.path.join(split_dir, MASKS_DIR)
    for directory in (images_dir, masks_dir):
        if not os.path.isdir(directory):
            raise DataError(f"Dataset directory not found: {directory}", error_code='DATASET_NOT_FOUND')

    mask_stems = set(_stems(masks_dir))
    refs = []
    for stem in _stems(images_dir):
        if stem not in mask_stems:
            raise DataError(f"Image '{stem}' has no mask in {masks_dir}", error_code='MISSING_MASK',
                            details={'stem': stem})
        refs.append(SampleRef(
            id=stem,
            image_path=os.path.join(images_dir, f'{stem}.png'),
            mask_path=os.path.join(masks_dir, f'{stem}.png'),
            num_classes=config.num_classes,
            ignore_index=config.ignore_index,
            validate_labels=config.validate_labels,
        ))
    if not refs:
        raise DataError(f"No samples under {split_dir}", error_code='EMPTY_DATASET')
    logger.info(f"[DATASET_LOADED] {split_dir} samples={len(refs)}")
    return refs


def write_dataset(samples: Sequence[SegSample], root: str, split: str) -> str:
    """Writes samples as PNG pairs in the standard layout."""
    images_dir = os.path.join(root, split, IMAGES_DIR)
    masks_dir = os.path.join(root, split, MASKS_DIR)
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)
    for sample in samples:
        if sample.mask.min(initial=0) < 0 or sample.mask.max(initial=0) > 255:
            raise DataError(f"Sample {sample.id}: mask values must fit in 8 bits")
        rgb = np.clip(np.round(sample.image.transpose(1, 2, 0) * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(rgb).save(os.path.join(images_dir, f'{sample.id}.png'))
        Image.fromarray(sample.mask.astype(np.uint8)).save(os.path.join(masks_dir, f'{sample.id}.png'))
    logger.info(f"[DATASET_WRITTEN] {os.path.join(root, split)} samples={len(samples)}")
    return os.path.join(root, split)
