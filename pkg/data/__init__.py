"""
AutoLC - 数据管线
"""

from .dataset import SegSample, SampleRef, load_dataset, write_dataset, check_labels
from .transforms import random_crop_pair, half_scale, reflect_pad_pair
from .loader import Batch, BatchLoader
from .synth import synth_generate, class_census, fit_linear_pixel_classifier

__all__ = [
    'SegSample', 'SampleRef', 'load_dataset', 'write_dataset', 'check_labels',
    'random_crop_pair', 'half_scale', 'reflect_pad_pair',
    'Batch', 'BatchLoader',
    'synth_generate', 'class_census', 'fit_linear_pixel_classifier',
]
