import csv
import os

import pytest

from models.configs import SearchConfig
from models.genotype import CellGenotype, PathGenotype
from scripts.desk_pipeline import run_pipeline
from scripts.run_sensitivity_grid import COLUMNS, run_grid
from search.decoder import emit_genotype


@pytest.mark.slow
def test_desk_pipeline(tmp_path):
    out = str(tmp_path / 'desk')
    summary = run_pipeline(out, seed=0, search_epochs=2, iters=50)

    assert summary['separability_miou'] > 0.9
    assert len(summary['path']) == 6 and summary['path'][0] in (4, 8)
    assert len(summary['cell']) == 3
    assert 0.0 <= summary['miou'] <= 1.0
    assert summary['cost']['Params (M)'] > 0
    for name in ('search/history.csv', 'search/arch_logits.json', 'genotype/genotype.json', 'train/metrics.csv'):
        assert os.path.exists(os.path.join(out, name))


@pytest.mark.slow
def test_desk_pipeline_defaults_learn_the_synthetic_task(tmp_path):
    summary = run_pipeline(str(tmp_path / 'desk'), seed=0)
    assert summary['miou'] >= 0.85


def test_sensitivity_grid(tmp_path, synth_root):
    cell = CellGenotype.from_list([[0, 1, 'sep_conv_3x3', 'skip_connect'], [2, 1, 'max_pool_3x3', 'atrous_conv_3x3']])
    config = SearchConfig(layers=3, blocks=2, filter_multiplier=1, num_classes=3, resolutions=(4, 8, 16))
    files = emit_genotype(cell, PathGenotype((4, 8, 8)), config, str(tmp_path / 'genotype'))
    out = str(tmp_path / 'grid')

    rows = run_grid(files['genotype'], synth_root, multipliers=(1, 2), dims=(4, 8), iters=2, out=out,
                    input_size=64)

    assert [(row['F'], row['dim']) for row in rows] == [(1, 4), (1, 8), (2, 4), (2, 8)]
    for row in rows:
        assert 0.0 <= row['miou'] <= 1.0
        assert row['params'] > 0
    with open(os.path.join(out, 'grid.csv'), encoding='utf-8') as f:
        written = list(csv.DictReader(f))
    assert len(written) == 4
    assert tuple(written[0]) == COLUMNS
