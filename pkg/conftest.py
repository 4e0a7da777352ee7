"""
测试公共夹具
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from autodiff.tensor import default_dtype  # noqa: E402
from core.config import load_run_config  # noqa: E402
from data.dataset import write_dataset  # noqa: E402
from data.synth import synth_generate  # noqa: E402
from models.configs import SearchConfig  # noqa: E402
from nn import init  # noqa: E402


@pytest.fixture(autouse=True)
def _seeded_layers():
    """Every test starts from the same layer-initialization stream."""
    init.manual_seed(0)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def float64():
    with default_dtype(np.float64):
        yield np.float64


@pytest.fixture
def tiny_search_config():
    """L=3, B=2, F=2 over rates 4/8/16."""
    return SearchConfig(layers=3, blocks=2, filter_multiplier=2, num_classes=3, resolutions=(4, 8, 16))


@pytest.fixture
def synth_root(tmp_path):
    """Six train and four validation 32x32 samples with three classes."""
    root = str(tmp_path / 'data')
    write_dataset(synth_generate(6, 32, 3, seed=0), root, 'Train')
    write_dataset(synth_generate(4, 32, 3, seed=1), root, 'Val')
    return root


@pytest.fixture
def testing_run(synth_root):
    return load_run_config(profile='testing', overrides={'DATASET_ROOT': synth_root})
