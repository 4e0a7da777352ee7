import json
import os

import pytest
from click.testing import CliRunner

from commands import cli
from core.errors import EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE
from models.configs import SearchConfig
from search.decoder import write_arch_logits
from search.space import init_relaxation


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args, profile='testing'):
    return runner.invoke(cli, ['--profile', profile, '--log-level', 'CRITICAL', *args])


def envelope(result):
    return json.loads(result.stdout)


@pytest.fixture
def arch_logits(tmp_path):
    alpha, beta = init_relaxation(SearchConfig(layers=3, blocks=2, filter_multiplier=2, num_classes=3), seed=11)
    return write_arch_logits(str(tmp_path / 'arch_logits.json'), alpha, beta, epoch=1)


def test_synth_data(runner, tmp_path):
    root = str(tmp_path / 'synth')
    result = invoke(runner, 'synth-data', '--out', root, '--num-train', '4', '--num-val', '2', '--size', '32',
                    '--json')
    assert result.exit_code == 0, result.output
    body = envelope(result)
    assert body['code'] == 0
    assert body['command'] == 'synth-data'
    assert body['data']['splits'] == {'Train': 4, 'Val': 2}
    assert len(body['data']['census']) == 3
    assert len(os.listdir(os.path.join(root, 'Val', 'images_png'))) == 2


def test_decode_with_verification(runner, tmp_path, arch_logits):
    out = str(tmp_path / 'genotype')
    result = invoke(runner, 'decode', arch_logits, '--out', out, '--verify', '--json')
    assert result.exit_code == 0, result.output
    data = envelope(result)['data']
    assert data['verified'] is True
    assert data['epoch'] == 1
    assert len(data['path']) == 3 and len(data['cell']) == 2
    for name in ('genotype.json', 'cell.dot', 'trellis.dot'):
        assert os.path.exists(os.path.join(out, name))


def test_decode_human_output(runner, tmp_path, arch_logits):
    result = invoke(runner, 'decode', arch_logits, '--out', str(tmp_path / 'g'))
    assert result.exit_code == 0
    assert result.stdout.startswith('path: ')
    assert 'block 2:' in result.stdout


def test_decode_missing_file_is_a_data_error(runner, tmp_path):
    result = invoke(runner, 'decode', str(tmp_path / 'absent.json'), '--json')
    assert result.exit_code == EXIT_DATA
    body = envelope(result)
    assert body['code'] == EXIT_DATA
    assert body['error_details']['code'] == 'FILE_NOT_FOUND'


def test_decode_malformed_logits(runner, tmp_path):
    target = tmp_path / 'arch.json'
    target.write_text(json.dumps({'alpha': [[0.0] * 8], 'beta': [], 'config': {'L': 1, 'B': 1, 'F': 2,
                                                                                'num_classes': 3}}))
    result = invoke(runner, 'decode', str(target))
    assert result.exit_code == EXIT_DATA


def test_cost_from_genotype(runner, tmp_path, arch_logits):
    out = str(tmp_path / 'genotype')
    assert invoke(runner, 'decode', arch_logits, '--out', out).exit_code == 0
    report_file = str(tmp_path / 'cost.json')
    result = invoke(runner, 'cost', '--genotype', os.path.join(out, 'genotype.json'), '--input-size', '64', '64',
                    '--out', report_file, '--json')
    assert result.exit_code == 0, result.output
    data = envelope(result)['data']
    assert data['params'] > 0 and data['flops'] > 0
    assert data['input_hw'] == [64, 64]
    with open(report_file, encoding='utf-8') as f:
        assert json.load(f)['flops'] == data['flops']


def test_cost_per_layer_table(runner, tmp_path, arch_logits):
    out = str(tmp_path / 'genotype')
    invoke(runner, 'decode', arch_logits, '--out', out)
    result = invoke(runner, 'cost', '--genotype', os.path.join(out, 'genotype.json'), '--input-size', '32', '32',
                    '--per-layer')
    assert result.exit_code == 0
    assert 'Params (M)' in result.stdout
    assert 'encoder.stem' in result.stdout


def test_gradcheck_single_case(runner):
    result = invoke(runner, 'gradcheck', '--case', 'op:skip_connect', '--json')
    assert result.exit_code == 0, result.output
    data = envelope(result)['data']
    assert data['failed'] == []
    assert [r['name'] for r in data['results']] == ['op:skip_connect']


def test_gradcheck_failure_is_numerical(runner):
    result = invoke(runner, 'gradcheck', '--case', 'op:skip_connect', '--tolerance', '0')
    assert result.exit_code == EXIT_NUMERICAL


def test_usage_errors(runner, tmp_path):
    assert invoke(runner, 'decode').exit_code == EXIT_USAGE
    assert invoke(runner, 'no-such-command').exit_code == EXIT_USAGE

    run_file = tmp_path / 'run.env'
    run_file.write_text('LAYERS=3\nNOT_A_KEY=1\n')
    result = invoke(runner, 'cost', '--config', str(run_file), '--genotype', str(tmp_path / 'g.json'))
    assert result.exit_code == EXIT_USAGE


def test_train_and_eval(runner, tmp_path, synth_root, arch_logits):
    genotype_dir = str(tmp_path / 'genotype')
    assert invoke(runner, 'decode', arch_logits, '--out', genotype_dir).exit_code == 0
    model_dir = str(tmp_path / 'train')
    result = invoke(runner, 'train', '--genotype', os.path.join(genotype_dir, 'genotype.json'),
                    '--dataset-root', synth_root, '--out', model_dir, '--iters', '2', '--json')
    assert result.exit_code == 0, result.output
    data = envelope(result)['data']
    assert 0.0 <= data['miou'] <= 1.0
    assert os.path.exists(data['metrics'])

    result = invoke(runner, 'eval', '--model', model_dir, '--dataset-root', synth_root, '--json')
    assert result.exit_code == 0, result.output
    body = envelope(result)['data']
    assert len(body['per_class']) == 3
    assert body['miou'] == pytest.approx(data['miou'])
