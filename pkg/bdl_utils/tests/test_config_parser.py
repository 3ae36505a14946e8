"""
Unit tests for the config_parser module.
"""
import pytest

from bdl_utils.data import preset_names, preset_path
from bdl_utils.inference.optimizer import LRSchedule
from bdl_utils.model.priors import GaussianPrior
from bdl_utils.utils.config_parser import ConfigError, KeyValueFile, ParseError, RunConfig


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_read_key_value_file(tmp_path):
    text = '; header\nwidths = 1 20 1\n\nlr = 0.01 ; inline\nprior = gaussian(0,1)\nn=3\n'
    path = _write(tmp_path / 'run.cfg', text)
    kv = KeyValueFile(path)
    assert list(kv.keys()) == ['C0001', 'widths', 'B0001', 'lr', 'prior', 'n']
    assert kv['C0001'] == 'header'
    assert kv['widths'] == [1, 20, 1]
    assert kv['lr'] == 0.01
    assert kv['prior'] == 'gaussian(0,1)'
    assert kv['n'] == 3
    assert list(kv.parameters()) == ['widths', 'lr', 'prior', 'n']


def test_comment_markers_inside_values(tmp_path):
    path = _write(tmp_path / 'run.cfg', 'data = runs/a;b#1.csv  # moved\nout = m.bdl\t; tab\n')
    kv = KeyValueFile(path)
    assert kv['data'] == 'runs/a;b#1.csv'
    assert kv['out'] == 'm.bdl'
    assert RunConfig.from_file(path).data == 'runs/a;b#1.csv'
    path = _write(tmp_path / 'levels.cfg', 'levels = 0.9;0.95\n')
    with pytest.raises(ConfigError, match='Invalid value'):
        RunConfig.from_file(path)


def test_key_value_file_round_trip_is_byte_stable(tmp_path):
    first = tmp_path / 'first.cfg'
    KeyValueFile(preset_path('membrane-style')).write(str(first))
    second = tmp_path / 'second.cfg'
    kv = KeyValueFile(str(first))
    kv.write(str(second))
    assert first.read_bytes() == second.read_bytes()
    assert kv['levels'] == [0.95, 0.97]
    assert kv['tau_refresh'] == 'yes'


def test_key_value_file_unknown_line(tmp_path):
    path = _write(tmp_path / 'bad.cfg', 'epochs = 10\nthis line has no separator\n')
    with pytest.raises(ParseError, match='unknown line'):
        KeyValueFile(path)


def test_defaults_are_valid():
    cfg = RunConfig().validate()
    assert cfg.network_spec().widths == (1, 20, 1)
    assert cfg.prior_spec() == GaussianPrior(0.0, 1.0)
    assert not cfg.deterministic
    assert cfg.train_config().schedule == LRSchedule(0.001, 1.0, 0)


@pytest.mark.parametrize('name', preset_names())
def test_presets_resolve(name):
    cfg = RunConfig.resolve(preset=name)
    assert cfg.network_spec().n_inputs == cfg.widths[0]
    assert cfg.train_config().validate(n_total=1).epochs == cfg.epochs


def test_xsinx_preset_values():
    cfg = RunConfig.resolve(preset='xsinx-paper')
    assert list(cfg.widths) == [1, 20, 1]
    assert cfg.prior == 'gaussian(0,0.1)'
    assert cfg.epochs == 3000
    assert cfg.standardize
    assert cfg.tau_eps == 1000.0
    train = cfg.train_config()
    assert train.schedule == LRSchedule(0.02, 0.6, 500)
    assert (train.warm_start, train.sigma_init) == (3000, 0.01)


def test_resolve_precedence(tmp_path):
    path = _write(tmp_path / 'run.cfg', 'epochs = 10\nbatch_size = 7\n')
    cfg = RunConfig.resolve('xsinx-paper', path, {'epochs': 5, 'seed': None})
    assert cfg.epochs == 5
    assert cfg.batch_size == 7
    assert cfg.prior == 'gaussian(0,0.1)'
    assert cfg.seed == 0


def test_resolve_errors(tmp_path):
    with pytest.raises(ValueError, match='Unknown preset'):
        RunConfig.resolve(preset='nope')
    with pytest.raises(ConfigError, match='not found'):
        RunConfig.resolve(config=str(tmp_path / 'missing.cfg'))
    path = _write(tmp_path / 'typo.cfg', 'epoch = 10\n')
    with pytest.raises(ConfigError, match="Unknown key.*epoch"):
        RunConfig.resolve(config=path)
    path = _write(tmp_path / 'value.cfg', 'epochs = many\n')
    with pytest.raises(ConfigError, match='Invalid value'):
        RunConfig.resolve(config=path)


@pytest.mark.parametrize('overrides, match', [
    ({'task': 'ranking'}, 'Unknown task'),
    ({'task': 'classification'}, 'two outputs'),
    ({'prior': 'student(1,1)'}, 'Invalid prior'),
    ({'batch_size': 0}, 'batch_size'),
    ({'train_fraction': 0.0}, 'train_fraction'),
    ({'k': 0}, 'k must be'),
    ({'levels': [0.5, 1.0]}, 'Credible levels'),
    ({'epochs': 2.5}, 'Invalid value'),
    ({'tau_refresh': 'maybe'}, 'Invalid value'),
])
def test_validation_errors(overrides, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.resolve(overrides=overrides)


def test_coercion():
    cfg = RunConfig().merge({'widths': 3, 'levels': 0.9, 'tau_refresh': 'on', 'epochs': 4.0, 'data': 'none'})
    assert cfg.widths == [3]
    assert cfg.levels == [0.9]
    assert cfg.tau_refresh is True
    assert cfg.epochs == 4 and isinstance(cfg.epochs, int)
    assert cfg.data is None


def test_deterministic_prior():
    cfg = RunConfig.resolve(overrides={'prior': 'none'})
    assert cfg.deterministic
    assert cfg.prior_spec() is None


def test_to_keyvalue_round_trip(tmp_path):
    cfg = RunConfig.resolve('moons-paper', overrides={'out': 'model.bdl'})
    kv = cfg.to_keyvalue()
    assert 'data' not in kv and kv['out'] == 'model.bdl'
    path = tmp_path / 'saved.cfg'
    kv.write(str(path))
    assert RunConfig.from_file(str(path)) == cfg
