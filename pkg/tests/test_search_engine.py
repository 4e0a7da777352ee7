import os
import shutil

import numpy as np
import pytest

from autodiff import SGD, Adam, Tensor, no_grad
from core.errors import DataError
from data.loader import BatchLoader
from data.synth import synth_generate
from models.configs import SearchConfig, SearchRunConfig
from search.decoder import read_arch_logits
from search.engine import (
    HISTORY_FILE, SPLIT_A, SPLIT_B, SearchHistory, arch_step, latest_checkpoint, run_search, search_step,
    split_train, weight_step,
)
from search.supernet import Supernet


def small_run(**overrides):
    values = dict(epochs=2, arch_start_epoch=1, batch_size=1, crop=32, half_scale=False, seed=0)
    values.update(overrides)
    return SearchRunConfig(**values)


def first_batch(samples, split):
    return next(iter(BatchLoader(samples, batch_size=1, crop=32, split=split).epoch(0)))


def optimizers(supernet, run_config):
    w_opt = SGD(supernet.weight_parameters(), lr=run_config.w_lr_initial, momentum=run_config.w_momentum)
    arch_opt = Adam(supernet.arch_parameters(), lr=run_config.arch_lr)
    return w_opt, arch_opt


@pytest.mark.parametrize('size, expected', [(10, (5, 5)), (11, (6, 5)), (1, (1, 0))])
def test_split_sizes(size, expected):
    a, b = split_train(list(range(size)), seed=4)
    assert (len(a), len(b)) == expected
    assert sorted(a + b) == list(range(size))


def test_split_is_deterministic_per_seed():
    items = list(range(20))
    assert split_train(items, seed=1) == split_train(items, seed=1)
    assert split_train(items, seed=1) != split_train(items, seed=2)


def test_split_of_empty_dataset():
    with pytest.raises(DataError):
        split_train([])


def test_warm_phase_leaves_architecture_untouched(tiny_search_config):
    samples = synth_generate(2, 32, 3, seed=0)
    supernet = Supernet(tiny_search_config)
    run_config = small_run()
    w_opt, arch_opt = optimizers(supernet, run_config)
    alpha0 = supernet.alpha.logits.data.copy()
    beta0 = supernet.beta.logits.data.copy()
    weight0 = supernet.weight_parameters()[0].data.copy()

    step = search_step(supernet, first_batch(samples[:1], SPLIT_A), first_batch(samples[1:], SPLIT_B),
                       0, run_config, w_opt, arch_opt, lr=0.025)
    assert not step.arch_updated
    assert np.isfinite(step.loss_a) and np.isfinite(step.loss_b)
    np.testing.assert_array_equal(supernet.alpha.logits.data, alpha0)
    np.testing.assert_array_equal(supernet.beta.logits.data, beta0)
    assert not np.array_equal(supernet.weight_parameters()[0].data, weight0)


def test_arch_step_moves_only_the_relaxation(tiny_search_config):
    samples = synth_generate(1, 32, 3, seed=2)
    supernet = Supernet(tiny_search_config)
    _, arch_opt = optimizers(supernet, small_run())
    weights0 = [p.data.copy() for p in supernet.weight_parameters()]
    alpha0 = supernet.alpha.logits.data.copy()
    beta0 = supernet.beta.logits.data.copy()

    arch_step(supernet, first_batch(samples, SPLIT_B), arch_opt)
    assert not np.array_equal(supernet.alpha.logits.data, alpha0)
    assert not np.array_equal(supernet.beta.logits.data, beta0)
    for before, p in zip(weights0, supernet.weight_parameters()):
        np.testing.assert_array_equal(p.data, before)


def test_steps_reject_batches_from_the_other_split(tiny_search_config):
    samples = synth_generate(1, 32, 3, seed=0)
    supernet = Supernet(tiny_search_config)
    w_opt, arch_opt = optimizers(supernet, small_run())
    with pytest.raises(DataError) as excinfo:
        weight_step(supernet, first_batch(samples, SPLIT_B), w_opt, lr=0.01)
    assert excinfo.value.error_code == 'WRONG_SPLIT'
    with pytest.raises(DataError):
        arch_step(supernet, first_batch(samples, SPLIT_A), arch_opt)


def test_run_search_writes_history_and_checkpoints(tiny_search_config, tmp_path):
    out_dir = str(tmp_path / 'search')
    seen = []
    result = run_search(synth_generate(4, 32, 3, seed=0), tiny_search_config, small_run(), out_dir=out_dir,
                        on_epoch=seen.append)

    assert len(result.history) == 2
    assert [r.epoch for r in seen] == [0, 1]
    assert all(np.isfinite(r.loss_a) and np.isfinite(r.loss_b) for r in result.history.records)
    assert latest_checkpoint(out_dir) == 1
    for name in ('weights', 'optimizer', 'arch_logits.json', 'state.json'):
        assert os.path.exists(os.path.join(out_dir, 'epoch_1', name))

    alpha, beta, epoch = read_arch_logits(os.path.join(out_dir, 'arch_logits.json'))
    assert epoch == 1
    np.testing.assert_array_equal(alpha.logits.data, result.alpha.logits.data)
    np.testing.assert_array_equal(beta.logits.data, result.beta.logits.data)

    history = SearchHistory.read_csv(os.path.join(out_dir, HISTORY_FILE))
    assert [r.loss_a for r in history.records] == [r.loss_a for r in result.history.records]


def test_resume_reproduces_the_interrupted_epoch(tiny_search_config, tmp_path):
    dataset = synth_generate(4, 32, 3, seed=0)
    run_config = small_run(epochs=3)
    full_dir = str(tmp_path / 'full')
    full = run_search(dataset, tiny_search_config, run_config, out_dir=full_dir)

    cut_dir = str(tmp_path / 'cut')
    shutil.copytree(full_dir, cut_dir)
    shutil.rmtree(os.path.join(cut_dir, 'epoch_2'))
    assert latest_checkpoint(cut_dir) == 1

    resumed = run_search(dataset, tiny_search_config, run_config, out_dir=cut_dir, resume=True)
    assert [r.epoch for r in resumed.history.records] == [0, 1, 2]
    assert resumed.history.records[2].loss_a == pytest.approx(full.history.records[2].loss_a, rel=1e-5)
    assert resumed.history.records[2].loss_b == pytest.approx(full.history.records[2].loss_b, rel=1e-5)
    np.testing.assert_allclose(resumed.alpha.logits.data, full.alpha.logits.data, rtol=1e-5, atol=1e-7)


def test_resume_without_checkpoint_starts_fresh(tiny_search_config, tmp_path):
    result = run_search(synth_generate(2, 32, 3, seed=0), tiny_search_config, small_run(epochs=1, arch_start_epoch=0),
                        out_dir=str(tmp_path / 'empty'), resume=True)
    assert [r.epoch for r in result.history.records] == [0]


def test_run_search_needs_two_samples(tiny_search_config):
    with pytest.raises(DataError) as excinfo:
        run_search(synth_generate(1, 32, 3, seed=0), tiny_search_config, small_run())
    assert excinfo.value.error_code == 'TOO_FEW_SAMPLES'


@pytest.mark.parametrize('crop', [321, 521])
def test_search_runs_at_published_crops(crop):
    config = SearchConfig(layers=2, blocks=1, filter_multiplier=1, num_classes=3)
    dataset = synth_generate(2, crop + 1, 3, seed=0)
    result = run_search(dataset, config, small_run(epochs=1, arch_start_epoch=0, crop=crop))
    record = result.history.records[0]
    assert np.isfinite(record.loss_a) and np.isfinite(record.loss_b)


def test_supernet_logits_keep_an_indivisible_extent(tiny_search_config, rng):
    supernet = Supernet(tiny_search_config)
    with no_grad():
        logits = supernet(Tensor(rng.standard_normal((1, 3, 40, 27)).astype(np.float32)))
    assert logits.shape == (1, 3, 40, 27)
