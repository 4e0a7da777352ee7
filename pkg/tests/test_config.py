import pytest

from core.config import KEY_MAP, load_run_config, read_run_file
from core.errors import ConfigError


def test_testing_profile():
    run = load_run_config(profile='testing')
    assert run.profile == 'testing'
    assert run.search.layers == 3
    assert run.search.resolutions == (4, 8, 16)
    assert run.train.total_iters == 4
    assert run.network.dim == 8
    assert run.dataset.num_classes == run.search.num_classes == 3


def test_default_profile_is_the_published_setup(monkeypatch):
    monkeypatch.delenv('AUTOLC_PROFILE', raising=False)
    run = load_run_config()
    assert run.profile == 'default'
    assert (run.search.layers, run.search.blocks, run.search.filter_multiplier) == (10, 5, 8)
    assert run.train.crop == 521
    assert run.search_run.arch_start_epoch == 30


def test_run_file_overrides_profile(tmp_path):
    run_file = tmp_path / 'run.env'
    run_file.write_text('EPOCHS=5\nseed=17\n# comment\nRESOLUTIONS=4,8\n')
    run = load_run_config(str(run_file), 'testing')
    assert run.search_run.epochs == 5
    assert run.search_run.seed == run.train.seed == 17
    assert run.search.resolutions == (4, 8)
    assert run.source_file == str(run_file)


def test_overrides_beat_run_file(tmp_path):
    run_file = tmp_path / 'run.env'
    run_file.write_text('EPOCHS=5\nDIM=16\n')
    run = load_run_config(str(run_file), 'testing', {'EPOCHS': 7, 'dim': None})
    assert run.search_run.epochs == 7
    assert run.network.dim == 16


def test_read_run_file_normalizes_keys(tmp_path):
    run_file = tmp_path / 'run.env'
    run_file.write_text('layers=4\n')
    assert read_run_file(str(run_file)) == {'LAYERS': '4'}
    assert set(read_run_file(str(run_file))) <= set(KEY_MAP)


def test_unknown_keys(tmp_path):
    run_file = tmp_path / 'run.env'
    run_file.write_text('LAYERS=3\nLEARNING_RATE=1\n')
    with pytest.raises(ConfigError):
        load_run_config(str(run_file), 'testing')
    with pytest.raises(ConfigError):
        load_run_config(profile='testing', overrides={'BOGUS': 1})


def test_missing_run_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / 'absent.env'), 'testing')


@pytest.mark.parametrize('key, value', [
    ('DIM', 0),
    ('AGGREGATION', 'max'),
    ('RESOLUTIONS', '4,16'),
    ('ARCH_START_EPOCH', 2),
])
def test_invalid_values(key, value):
    with pytest.raises(ConfigError):
        load_run_config(profile='testing', overrides={key: value})


def test_unknown_profile():
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(profile='cluster')
    assert excinfo.value.exit_code == 1


def test_run_config_to_dict():
    document = load_run_config(profile='testing').to_dict()
    assert set(document) == {'profile', 'source_file', 'search', 'search_run', 'train', 'dataset', 'network'}
    assert document['network']['aggregation'] == 'concat'
