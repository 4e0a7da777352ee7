"""
分割评估指标
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from autodiff.tensor import Tensor, no_grad
from core.errors import DataError
from models.base import BaseModel

logger = logging.getLogger(__name__)


def confusion_matrix(pred: np.ndarray, label: np.ndarray, num_classes: int, ignore_index: int = 255) -> np.ndarray:
    """(C, C) counts, rows = ground truth, columns = prediction; ignored pixels skipped."""
    pred = np.asarray(pred).reshape(-1)
    label = np.asarray(label).reshape(-1)
    if pred.shape != label.shape:
        raise DataError(f"Prediction has {pred.size} pixels, labels have {label.size}")
    keep = label != ignore_index
    label, pred = label[keep].astype(np.int64), pred[keep].astype(np.int64)
    if label.size and (label.min() < 0 or label.max() >= num_classes):
        raise DataError(f"Labels outside [0, {num_classes})")
    counts = np.bincount(num_classes * label + pred, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def iou_from_confusion(confusion: np.ndarray) -> np.ndarray:
    """Per-class TP / (TP + FP + FN); NaN where the union is empty."""
    confusion = np.asarray(confusion, dtype=np.float64)
    intersection = np.diag(confusion)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - intersection
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(union > 0, intersection / np.maximum(union, 1), np.nan)


def mean_iou(confusion: np.ndarray) -> float:
    iou = iou_from_confusion(confusion)
    valid = ~np.isnan(iou)
    return float(iou[valid].mean()) if valid.any() else 0.0


@dataclass(frozen=True)
class MIoUResult(BaseModel):
    per_class: List[float]
    miou: float
    confusion: List[List[int]] = field(repr=False)

    def to_table(self) -> str:
        lines = ['class  IoU']
        for c, value in enumerate(self.per_class):
            lines.append(f'{c:>5}  ' + ('  -' if value is None else f'{value:.4f}'))
        lines.append(f' mean  {self.miou:.4f}')
        return '\n'.join(lines)


def result_from_confusion(confusion: np.ndarray) -> MIoUResult:
    iou = iou_from_confusion(confusion)
    return MIoUResult(
        per_class=[None if np.isnan(v) else float(v) for v in iou],
        miou=mean_iou(confusion),
        confusion=np.asarray(confusion, dtype=np.int64).tolist(),
    )


def predict_labels(model, images: np.ndarray) -> np.ndarray:
    """Argmax class per pixel from a model returning (N, C, H, W) scores."""
    with no_grad():
        scores = model(Tensor(images))
    scores = scores.numpy() if isinstance(scores, Tensor) else np.asarray(scores)
    return scores.argmax(axis=1)


def evaluate_miou(model, dataset: Sequence, num_classes: int, ignore_index: int = 255,
                  batch_size: int = 1, transform: Optional[Callable] = None) -> MIoUResult:
    """
    Accumulates one confusion matrix over every pixel of ``dataset`` and
    averages IoU over classes with a nonzero union. ``transform`` maps each
    loaded sample before prediction (e.g. half scaling).
    """
    if not len(dataset):
        raise DataError("Cannot evaluate on an empty dataset", error_code='EMPTY_DATASET')
    if hasattr(model, 'eval'):
        model.eval()
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for start in range(0, len(dataset), batch_size):
        samples = [item.load() for item in dataset[start:start + batch_size]]
        if transform is not None:
            samples = [transform(s) for s in samples]
        shapes = {s.mask.shape for s in samples}
        if len(shapes) > 1:
            raise DataError(f"Evaluation batch mixes extents {sorted(shapes)}; use batch_size=1")
        images = np.stack([s.image for s in samples])
        labels = np.stack([s.mask for s in samples])
        confusion += confusion_matrix(predict_labels(model, images), labels, num_classes, ignore_index)
    result = result_from_confusion(confusion)
    logger.info(f"[EVAL_DONE] samples={len(dataset)} miou={result.miou:.4f}")
    return result
