import csv
import os

import numpy as np
import pytest

from autodiff import Tensor, no_grad
from autodiff.schedule import LrSchedule
from core.errors import ConfigError, DataError, ShapeError
from cost.profiler import count_params
from data.dataset import load_dataset
from data.synth import synth_generate
from derived.decoder import FPN, ASPPPooling, ASPP, FeatureFusion, SemanticAggregation, aspp_rates, \
    fusion_stage_count, semantic_aggregation
from derived.gradcheck_suite import GRADCHECK_CASES, run_case
from derived.metrics import confusion_matrix, iou_from_confusion, mean_iou
from derived.network import DerivedNetwork
from derived.trainer import (
    METRICS_COLUMNS, METRICS_FILE, iteration_lr, load_trained, read_metrics, train_derived,
)
from models.configs import TrainConfig
from models.genotype import CellGenotype, PathGenotype
from models.network_spec import DerivedNetworkSpec

CELL = CellGenotype.from_list([[0, 1, 'sep_conv_3x3', 'skip_connect'], [2, 1, 'atrous_conv_3x3', 'max_pool_3x3']])


def make_spec(path=(4, 8, 8, 4), **kwargs):
    values = dict(filter_multiplier=2, dim=8, num_classes=3)
    values.update(kwargs)
    return DerivedNetworkSpec(CELL, PathGenotype(path), **values)


def test_fpn_single_level(rng):
    fpn = FPN({4: 3}, dim=4)
    out = fpn({4: Tensor(rng.standard_normal((1, 3, 8, 8)).astype(np.float32))})
    assert list(out) == [4]
    assert out[4].shape == (1, 4, 8, 8)


def test_fpn_two_levels(rng):
    fpn = FPN({4: 3, 16: 5}, dim=4)
    out = fpn({4: Tensor(rng.standard_normal((1, 3, 8, 8)).astype(np.float32)),
               16: Tensor(rng.standard_normal((1, 5, 2, 2)).astype(np.float32))})
    assert out[4].shape == (1, 4, 8, 8)
    assert out[16].shape == (1, 4, 2, 2)


def test_fpn_rejects_unexpected_levels(rng):
    fpn = FPN({4: 3}, dim=4)
    with pytest.raises(ShapeError):
        fpn({8: Tensor(rng.standard_normal((1, 3, 4, 4)))})
    with pytest.raises(ShapeError):
        FPN({}, dim=4)


@pytest.mark.parametrize('rate, stages', [(4, 1), (8, 1), (16, 2), (32, 3)])
def test_fusion_stage_count(rate, stages):
    assert fusion_stage_count(rate) == stages


def test_fusion_brings_levels_to_rate_four(rng):
    fusion = FeatureFusion((4, 16), dim=2)
    out = fusion({4: Tensor(rng.standard_normal((1, 2, 8, 8)).astype(np.float32)),
                  16: Tensor(rng.standard_normal((1, 2, 2, 2)).astype(np.float32))})
    assert out.shape == (1, 2, 8, 8)


def test_aspp_rates_follow_final_rate():
    assert aspp_rates((6, 12, 18), 16) == (6, 12, 18)
    assert aspp_rates((6, 12, 18), 32) == (12, 24, 36)
    assert aspp_rates((6, 12, 18), 4) == (1, 3, 4)


def test_aspp_output_channels(rng):
    aspp = ASPP(5, 4, rates=(1, 2))
    assert aspp(Tensor(rng.standard_normal((2, 5, 6, 6)).astype(np.float32))).shape == (2, 4, 6, 6)


def test_aspp_pooling_is_spatially_constant(rng):
    out = ASPPPooling(3, 2)(Tensor(rng.standard_normal((1, 3, 5, 7)).astype(np.float32))).numpy()
    assert out.shape == (1, 2, 5, 7)
    np.testing.assert_allclose(out, np.broadcast_to(out[:, :, :1, :1], out.shape))


@pytest.mark.parametrize('mode', ['concat', 'add'])
def test_aggregation_head_gives_distributions(rng, mode):
    head = SemanticAggregation(4, 3, mode=mode)
    fusion = Tensor(rng.standard_normal((1, 4, 8, 8)).astype(np.float32))
    context = Tensor(rng.standard_normal((1, 4, 2, 2)).astype(np.float32))
    probs = semantic_aggregation(head, fusion, context, (32, 32)).numpy()
    assert probs.shape == (1, 3, 32, 32)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-5)


def test_single_class_head_is_certain(rng):
    head = SemanticAggregation(2, 1)
    x = Tensor(rng.standard_normal((1, 2, 4, 4)).astype(np.float32))
    probs = semantic_aggregation(head, x, x, (8, 8)).numpy()
    np.testing.assert_array_equal(probs, 1.0)


def test_aggregation_mode_is_validated():
    with pytest.raises(ConfigError):
        SemanticAggregation(2, 3, mode='max')


def test_miou_worked_example():
    label = np.array([0, 0, 1, 1])
    pred = np.array([0, 1, 1, 1])
    confusion = confusion_matrix(pred, label, 2)
    assert confusion.tolist() == [[1, 1], [0, 2]]
    np.testing.assert_allclose(iou_from_confusion(confusion), [1 / 2, 2 / 3])
    assert mean_iou(confusion) == pytest.approx(7 / 12)


def test_miou_extremes():
    label = np.array([[0, 1], [1, 0]])
    assert mean_iou(confusion_matrix(label, label, 2)) == 1.0
    assert mean_iou(confusion_matrix(1 - label, label, 2)) == 0.0


def test_miou_skips_ignored_pixels_and_absent_classes():
    label = np.array([0, 0, 255, 255])
    pred = np.array([0, 0, 2, 1])
    confusion = confusion_matrix(pred, label, 3)
    assert confusion.sum() == 2
    assert mean_iou(confusion) == 1.0


def test_confusion_rejects_bad_labels():
    with pytest.raises(DataError):
        confusion_matrix(np.array([0, 1]), np.array([0, 5]), 3)
    with pytest.raises(DataError):
        confusion_matrix(np.array([0, 1, 1]), np.array([0, 1]), 3)


@pytest.mark.parametrize('aggregation', ['concat', 'add'])
def test_derived_forward_shape(rng, aggregation):
    network = DerivedNetwork(make_spec(aggregation=aggregation))
    with no_grad():
        logits = network(Tensor(rng.standard_normal((2, 3, 32, 32)).astype(np.float32)))
    assert logits.shape == (2, 3, 32, 32)


def test_derived_eval_is_deterministic(rng):
    network = DerivedNetwork(make_spec(path=(4, 8, 16, 8))).eval()
    image = Tensor(rng.standard_normal((1, 3, 32, 32)).astype(np.float32))
    with no_grad():
        first = network.predict_proba(image).numpy()
        second = network.predict_proba(image).numpy()
    np.testing.assert_array_equal(first, second)
    np.testing.assert_allclose(first.sum(axis=1), 1.0, atol=1e-5)


def test_derived_parameter_count():
    network = DerivedNetwork(make_spec())
    assert count_params(network) == network.num_parameters() > 0
    assert network.spec.pyramid_inputs == {4: 4, 8: 3}


def test_train_and_reload(testing_run, tmp_path):
    dataset = testing_run.dataset
    train_set = load_dataset(dataset)
    val_set = load_dataset(dataset, dataset.val_split)
    network_config = testing_run.network
    spec = DerivedNetworkSpec(CELL, PathGenotype((4, 8, 8)), filter_multiplier=network_config.filter_multiplier,
                              dim=network_config.dim, num_classes=dataset.num_classes)
    evaluations = []
    out_dir = str(tmp_path / 'train')
    result = train_derived(spec, train_set, val_set, testing_run.train, out_dir=out_dir,
                           on_eval=lambda it, r: evaluations.append(it))

    assert evaluations == [2, 4]
    assert result.final is not None and 0.0 <= result.final.miou <= 1.0
    assert [row.iteration for row in result.metrics] == [1, 2, 3, 4]
    assert all(np.isfinite(row.loss) for row in result.metrics)

    with open(os.path.join(out_dir, METRICS_FILE), newline='', encoding='utf-8') as f:
        assert tuple(next(csv.reader(f))) == METRICS_COLUMNS
    rows = read_metrics(os.path.join(out_dir, METRICS_FILE))
    assert [row.miou is not None for row in rows] == [False, True, False, True]

    reloaded = load_trained(out_dir)
    assert reloaded.spec == spec
    image = Tensor(val_set[0].load().image[None])
    with no_grad():
        np.testing.assert_allclose(reloaded(image).numpy(), result.network.eval()(image).numpy(), atol=1e-6)


@pytest.mark.parametrize('name', sorted(GRADCHECK_CASES))
def test_gradcheck_cases(name):
    result = run_case(name)
    assert result.passed, f'{name}: max relative error {result.max_error:.3e}'
    assert result.num_scalars > 0


def test_unknown_gradcheck_case():
    with pytest.raises(ConfigError):
        run_case('conv_9x9')


def test_derived_logits_keep_an_indivisible_extent(rng):
    network = DerivedNetwork(make_spec(path=(4, 8, 16)))
    with no_grad():
        logits = network(Tensor(rng.standard_normal((1, 3, 33, 47)).astype(np.float32)))
    assert logits.shape == (1, 3, 33, 47)


@pytest.mark.parametrize('crop', [321, 521])
def test_training_runs_at_published_crops(crop):
    spec = DerivedNetworkSpec(CellGenotype.from_list([[0, 1, 'sep_conv_3x3', 'skip_connect']]), PathGenotype((4, 8)),
                              filter_multiplier=1, dim=4, num_classes=3)
    config = TrainConfig(total_iters=1, warmup_iters=0, batch_size=1, crop=crop, eval_interval=1, log_interval=1)
    result = train_derived(spec, synth_generate(1, crop + 1, 3, seed=0), None, config)
    assert len(result.metrics) == 1
    assert np.isfinite(result.metrics[0].loss)


def test_warmup_never_yields_a_zero_rate():
    schedule = LrSchedule.polynomial(0.05, total_steps=4, warmup_steps=2)
    rates = [iteration_lr(schedule, i) for i in range(4)]
    assert rates[:3] == pytest.approx([0.025, 0.05, 0.05])
    assert rates[3] == pytest.approx(0.05 * 0.5 ** 0.9)
    assert all(rate > 0 for rate in rates)
