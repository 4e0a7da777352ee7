import json
import math
import os

import numpy as np
import pytest

from autodiff import no_grad
from core.errors import GenotypeError, SearchSpaceError
from models.configs import SearchConfig
from models.genotype import NULL_INDEX, OPERATORS, CellGenotype, OperatorKind, PathGenotype
from search.decoder import (
    brute_force_cell, brute_force_path, decode, decode_cell, decode_path_dp, emit_genotype, load_genotype,
    parse_genotype, read_arch_logits, write_arch_logits,
)
from search.space import AlphaParams, BetaParams, init_relaxation, num_edges
from search.supernet import planted_relaxation


def normalized_beta(config, logits):
    with no_grad():
        return BetaParams(config, logits).normalized().numpy()


def random_alpha(rng, blocks):
    raw = rng.random((num_edges(blocks), len(OPERATORS)))
    return raw / raw.sum(axis=-1, keepdims=True)


def test_decode_cell_one_hot():
    alpha = np.zeros((2, len(OPERATORS)))
    alpha[0, OperatorKind.MAX_POOL_3X3.index] = 1.0
    alpha[1, OperatorKind.SEP_CONV_5X5.index] = 0.9
    alpha[1, NULL_INDEX] = 0.1
    cell = decode_cell(alpha)
    assert cell.to_list() == [[0, 1, 'max_pool_3x3', 'sep_conv_5x5']]


def test_decode_cell_stronger_slot_first():
    alpha = np.full((5, len(OPERATORS)), 0.01)
    alpha[1, OperatorKind.SKIP.index] = 0.5
    alpha[0, OperatorKind.AVG_POOL_3X3.index] = 0.7
    alpha[4, OperatorKind.ATROUS_CONV_5X5.index] = 0.9
    alpha[3, OperatorKind.SEP_CONV_3X3.index] = 0.6
    cell = decode_cell(alpha)
    assert cell.to_list() == [[0, 1, 'avg_pool_3x3', 'skip_connect'], [2, 1, 'atrous_conv_5x5', 'sep_conv_3x3']]


def test_decode_cell_uniform_ties():
    cell = decode_cell(np.full((9, len(OPERATORS)), 0.125))
    for block in cell.blocks:
        assert (block.input1, block.input2) == (0, 1)
        assert block.op1 is OperatorKind.SEP_CONV_3X3 and block.op2 is OperatorKind.SEP_CONV_3X3


def test_decode_cell_never_selects_null_unless_allowed():
    alpha = np.full((2, len(OPERATORS)), 0.05)
    alpha[:, NULL_INDEX] = 0.65
    alpha[0, OperatorKind.SKIP.index] = 0.3
    assert decode_cell(alpha).blocks[0].op1 is OperatorKind.SKIP
    assert decode_cell(alpha, allow_null=True).blocks[0].op1 is OperatorKind.NULL


def test_decode_cell_matches_brute_force(rng):
    for _ in range(50):
        blocks = int(rng.integers(1, 6))
        alpha = random_alpha(rng, blocks)
        assert decode_cell(alpha) == brute_force_cell(alpha)


def test_decode_cell_rejects_bad_shape():
    with pytest.raises(SearchSpaceError):
        decode_cell(np.full((4, len(OPERATORS)), 0.125))


def test_planted_path_has_zero_log_prob():
    config = SearchConfig(layers=6)
    path = (4, 8, 16, 16, 8, 8)
    cell = CellGenotype.from_list([[0, 1, 'sep_conv_3x3', 'skip_connect']])
    _, beta = planted_relaxation(SearchConfig(layers=6, blocks=1), cell, path)
    decoded = decode_path_dp(normalized_beta(config, beta), config)
    assert decoded.path == path
    assert decoded.log_prob == pytest.approx(0.0, abs=1e-9)


def test_uniform_beta_prefers_smaller_rates():
    config = SearchConfig(layers=2, resolutions=(4, 8))
    decoded = decode_path_dp(normalized_beta(config, np.zeros((2, 2, 3))), config)
    assert decoded.path == (4, 4)
    assert decoded.log_prob == pytest.approx(-math.log(2))


def test_single_layer_path():
    config = SearchConfig(layers=1)
    decoded = decode_path_dp(normalized_beta(config, np.zeros((1, 4, 3))), config)
    assert decoded.path == (4,)
    assert decoded.log_prob == pytest.approx(0.0)


@pytest.mark.parametrize('layers', range(3, 9))
def test_path_decoding_matches_brute_force(layers):
    rng = np.random.default_rng(layers)
    for instance in range(200):
        # every other instance spans all four rates
        resolutions = (4, 8, 16, 32) if instance % 2 == 0 else (4, 8, 16, 32)[:int(rng.integers(1, 4))]
        config = SearchConfig(layers=layers, resolutions=resolutions)
        beta_norm = normalized_beta(config, rng.standard_normal((layers, len(resolutions), 3)) * 2)
        dp = decode_path_dp(beta_norm, config)
        brute = brute_force_path(beta_norm, config)
        assert dp.path == brute.path
        assert dp.log_prob == pytest.approx(brute.log_prob, abs=1e-9)


def test_brute_force_path_is_limited():
    config = SearchConfig(layers=13)
    with pytest.raises(SearchSpaceError):
        brute_force_path(np.full((13, 4, 3), 1 / 3), config)


def test_decode_from_fresh_relaxation_is_valid():
    config = SearchConfig(layers=5, blocks=3)
    alpha, beta = init_relaxation(config, seed=7)
    cell, path = decode(alpha, beta)
    assert cell.num_blocks == 3
    assert path.num_layers == 5
    cell.validate()


def test_emit_and_load_genotype(tmp_path):
    config = SearchConfig(layers=4, blocks=2)
    cell = CellGenotype.from_list([[1, 0, 'sep_conv_5x5', 'max_pool_3x3'], [2, 0, 'skip_connect', 'sep_conv_3x3']])
    path = PathGenotype((4, 8, 8, 16))
    files = emit_genotype(cell, path, config, str(tmp_path / 'genotype'))

    loaded_cell, loaded_path, loaded_config = load_genotype(files['genotype'])
    assert loaded_cell == cell
    assert loaded_path == path
    assert loaded_config == {'L': 4, 'B': 2, 'F': 8, 'num_classes': 7}

    with open(files['cell'], encoding='utf-8') as f:
        cell_text = f.read()
    with open(files['trellis'], encoding='utf-8') as f:
        trellis_text = f.read()
    assert cell_text.count('shape=circle') == 2
    assert cell_text.count('label="sep_conv_5x5"') == 1
    assert sum(1 for line in trellis_text.splitlines() if line.strip().startswith('layer_') and '[' in line) == 4


@pytest.mark.parametrize('document', [
    {'cell': [[0, 5, 'sep_conv_3x3', 'skip_connect']], 'path': [4], 'config': {'L': 1, 'B': 1, 'F': 8, 'num_classes': 7}},
    {'cell': [[0, 1, 'conv_7x7', 'skip_connect']], 'path': [4], 'config': {'L': 1, 'B': 1, 'F': 8, 'num_classes': 7}},
    {'cell': [[0, 1, 'sep_conv_3x3', 'null']], 'path': [4], 'config': {'L': 1, 'B': 1, 'F': 8, 'num_classes': 7}},
    {'cell': [[0, 1, 'sep_conv_3x3', 'skip_connect']], 'path': [4, 8], 'config': {'L': 1, 'B': 1, 'F': 8, 'num_classes': 7}},
    {'cell': [[0, 1, 'sep_conv_3x3', 'skip_connect']], 'path': [4]},
    [1, 2, 3],
])
def test_malformed_genotypes(document):
    with pytest.raises(GenotypeError):
        parse_genotype(document)


def test_arch_logits_round_trip(tmp_path, rng):
    config = SearchConfig(layers=3, blocks=2, resolutions=(4, 8, 16))
    alpha = AlphaParams(config, rng.standard_normal((5, 8)))
    beta = BetaParams(config, rng.standard_normal((3, 3, 3)))
    path = write_arch_logits(str(tmp_path / 'arch.json'), alpha, beta, epoch=9)

    loaded_alpha, loaded_beta, epoch = read_arch_logits(path, dtype=np.float64)
    assert epoch == 9
    assert loaded_alpha.config == config
    np.testing.assert_array_equal(loaded_alpha.logits.data, alpha.logits.data)
    np.testing.assert_array_equal(loaded_beta.logits.data, beta.logits.data)


def test_arch_logits_with_wrong_shape(tmp_path):
    target = tmp_path / 'arch.json'
    target.write_text(json.dumps({'alpha': [[0.0] * 8] * 3, 'beta': [[[0.0] * 3] * 4],
                                  'config': {'L': 1, 'B': 1, 'F': 8, 'num_classes': 7}}))
    with pytest.raises(GenotypeError):
        read_arch_logits(str(target))
    assert os.path.exists(target)
