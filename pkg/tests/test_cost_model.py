import numpy as np
import pytest

from cost.profiler import activation_memory, count_flops, count_madd, count_params, mem_rw, profile, report
from derived.network import DerivedNetwork
from models.genotype import OPERATORS, CellGenotype, OperatorKind, PathGenotype
from models.network_spec import DerivedNetworkSpec
from nn import Conv2d, make_op, op_param_count


def small_spec(**kwargs):
    cell = CellGenotype.from_list([[0, 1, 'sep_conv_5x5', 'skip_connect'], [2, 0, 'avg_pool_3x3', 'atrous_conv_3x3']])
    values = dict(filter_multiplier=2, dim=8, num_classes=3)
    values.update(kwargs)
    return DerivedNetworkSpec(cell, PathGenotype((4, 8, 16, 16, 8)), **values)


def test_single_conv_costs():
    conv = Conv2d(3, 8, 3, bias=True)
    result = profile(conv, (32, 32))
    assert result.params == 224
    assert result.flops == 2 * 8 * 32 * 32 * 27 + 8 * 32 * 32 == 450560
    assert result.madd == 8 * 32 * 32 * 27
    assert result.memory_bytes == 32768
    assert result.mem_rw_bytes == (3 * 32 * 32 + 224 + 8 * 32 * 32) * 4


def test_conv_flops_scale_with_area():
    conv = Conv2d(4, 4, 3)
    assert count_flops(conv, (64, 64)) == 4 * count_flops(conv, (32, 32))
    assert count_madd(conv, (64, 64)) == 4 * count_madd(conv, (32, 32))


def test_separable_candidate_params():
    op = make_op(OperatorKind.SEP_CONV_3X3, 16)
    # depthwise 16*9, pointwise 16*16, BN 2*16
    assert profile(op, (8, 8), in_channels=16).params == 144 + 256 + 32 == op_param_count('sep_conv_3x3', 16)


@pytest.mark.parametrize('kind', [OperatorKind.NULL, OperatorKind.SKIP])
def test_parameter_free_connections(kind):
    op = make_op(kind, 4)
    result = profile(op, (8, 8), in_channels=4)
    assert result.params == 0
    assert result.flops == 0
    assert result.madd == 0


def test_skip_reads_and_writes_its_tensor():
    n = 4 * 8 * 8
    result = profile(make_op(OperatorKind.SKIP, 4), (8, 8), in_channels=4)
    assert result.mem_rw_bytes == 2 * n * 4
    assert result.memory_bytes == n * 4


@pytest.mark.parametrize('kind', OPERATORS, ids=lambda k: k.value)
def test_profiled_params_match_closed_form(kind):
    assert profile(make_op(kind, 6), (8, 8), in_channels=6).params == op_param_count(kind, 6)


def test_report_totals_are_layer_sums():
    result = report(small_spec(), input_hw=(64, 64))
    layers = result.per_layer
    assert result.params == sum(layer.params for layer in layers)
    assert result.flops == sum(layer.flops for layer in layers)
    assert result.memory_bytes == sum(layer.memory_bytes for layer in layers)
    assert result.mem_rw_bytes == sum(layer.mem_rw_bytes for layer in layers)
    assert any(layer.name.startswith('encoder') for layer in layers)
    assert any(layer.name.startswith('aspp') for layer in layers)


def test_report_params_match_instantiated_network():
    spec = small_spec()
    assert report(spec, input_hw=(64, 64)).params == count_params(DerivedNetwork(spec))


def test_report_helpers_agree():
    spec = small_spec(aggregation='add')
    network = DerivedNetwork(spec)
    result = profile(network, (64, 64))
    assert result.flops == count_flops(network, (64, 64))
    assert result.memory_bytes == activation_memory(network, (64, 64))
    assert result.mem_rw_bytes == mem_rw(network, (64, 64))


def test_report_document_and_table():
    result = report(small_spec(), input_hw=(64, 64), bytes_per_elem=2)
    document = result.to_dict()
    assert document['input_hw'] == [64, 64]
    assert document['bytes_per_elem'] == 2
    assert set(document['table']) == {'Params (M)', 'FLOPs (G)', 'Memory (GB)', 'MAdd (T)', 'MemR+W (GB)'}
    assert document['params'] == result.params
    assert 'Params (M)' in result.to_table()


def test_larger_input_costs_more_but_same_params():
    spec = small_spec()
    small, large = report(spec, (64, 64)), report(spec, (128, 128))
    assert small.params == large.params
    assert large.flops > small.flops
    assert large.memory_bytes > small.memory_bytes


def random_spec(rng):
    kinds = [kind.value for kind in OPERATORS if kind is not OperatorKind.NULL]
    rows = []
    for number in range(1, int(rng.integers(1, 4)) + 1):
        input1, input2 = rng.choice(number + 1, size=2, replace=False)
        rows.append([int(input1), int(input2), kinds[rng.integers(len(kinds))], kinds[rng.integers(len(kinds))]])
    path, previous = [], 4
    for _ in range(int(rng.integers(2, 6))):
        previous = int(rng.choice([s for s in (previous // 2, previous, previous * 2) if s in (4, 8, 16, 32)]))
        path.append(previous)
    return DerivedNetworkSpec(CellGenotype.from_list(rows), PathGenotype(tuple(path)),
                              filter_multiplier=int(rng.integers(1, 4)), dim=int(rng.choice([4, 8])), num_classes=3)


@pytest.mark.parametrize('seed', range(20))
def test_report_params_match_random_genotypes(seed):
    spec = random_spec(np.random.default_rng(seed))
    assert report(spec, input_hw=(64, 64)).params == count_params(DerivedNetwork(spec))


@pytest.mark.slow
def test_published_scale_costs_fall_in_band():
    cell = CellGenotype.from_list([
        [0, 1, 'sep_conv_3x3', 'sep_conv_5x5'],
        [1, 2, 'atrous_conv_3x3', 'skip_connect'],
        [0, 3, 'sep_conv_3x3', 'max_pool_3x3'],
        [2, 4, 'atrous_conv_5x5', 'sep_conv_3x3'],
        [1, 5, 'sep_conv_5x5', 'avg_pool_3x3'],
    ])
    path = PathGenotype((4, 8, 16, 32, 32, 16, 8, 8, 4, 4))
    spec = DerivedNetworkSpec(cell, path, filter_multiplier=10, dim=128, num_classes=7)
    result = report(spec, input_hw=(1024, 1024))
    assert 2.1e6 <= result.params <= 8.6e6
    assert 102.2e9 / 2 <= result.flops <= 102.2e9 * 2
