import pytest

from hypothesis import given, strategies as st

from pyrpix.config import FIELDS, RunConfig, SampleConfig, TrainConfig, format_value, parse_values, run_options
from pyrpix.core import ConfigError

from . import tiny_config


def test_defaults():
    config = RunConfig()

    assert config.model == 'grayscale-aux'
    assert (config.size, config.blocks, config.filters, config.mixtures, config.levels) == (8, 2, 16, 10, 2)
    assert config.embed_down == []
    assert config.embed_up == []
    assert config.cache is True
    assert config.crop_margins is None


def test_unknown_attribute():
    with pytest.raises(AttributeError):
        RunConfig().foo  # pylint: disable=expression-not-assigned


def test_from_mapping():
    config = RunConfig.from_mapping({
        'model': 'pyramid',
        'size': '16',
        'levels': '3',
        'embed-up': '1',
        'embed_blocks': '2',
        'flip': 'yes',
        'lr': '0.01',
        'seed': None
    })

    assert config.model == 'pyramid'
    assert config.size == 16
    assert config.levels == 3
    assert config.embed_up == [1]
    assert config.flip is True
    assert config.lr == 0.01
    assert config.seed == 0
    assert config.pyramid_spec.resolutions == [(16, 16), (8, 8), (4, 4)]


@pytest.mark.parametrize('mapping, match', [
    ({'colour': 'red'}, r"Unknown configuration key 'colour'"),
    ({'size': 'big'}, r"Key 'size' expects an integer, got 'big'"),
    ({'lr': 'fast'}, r"Key 'lr' expects a number, got 'fast'"),
    ({'model': 'glow'}, r"Key 'model' must be one of grayscale-aux, pyramid, flat, got 'glow'"),
    ({'mode': 'greedy'}, r"Key 'mode' must be one of ancestral, reduced, map"),
    ({'embed_up': '1,x'}, r"Option 'embed_up' expects comma-separated integers")
])
def test_parse_errors(mapping, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_mapping(mapping)


@pytest.mark.parametrize('values, match', [
    ({'size': 0}, r'Image size must be positive'),
    ({'blocks': -1}, r'Block counts cannot be negative'),
    ({'filters': 0}, r'Filters and mixture components must be positive'),
    ({'mixtures': 0}, r'Filters and mixture components must be positive'),
    ({'kernel': 2}, r'Kernel size must be odd and positive, got 2'),
    ({'crop': [1, 2]}, r'Crop expects four non-negative margins'),
    ({'embed_up': [3], 'embed_blocks': 2}, r'Embedding resampling after block 3 is out of range for 2 blocks'),
    ({'embed_up': [1, 2], 'embed_down': [1]}, r'both downsampling and upsampling'),
    ({'embed_up': [1]}, r'Grayscale auxiliary embedding must keep the resolution, it scales by 2\^1'),
    ({'model': 'pyramid', 'levels': 0}, r'Pyramid needs at least one level'),
    ({'model': 'pyramid', 'levels': 2}, r'Pyramid embedding must upsample exactly x2, it scales by 2\^0'),
    ({'model': 'pyramid', 'levels': 5, 'embed_up': [1]}, r'Resolution 8x8 cannot be halved 4 times'),
    ({'model': 'pyramid', 'levels': 3, 'size': 8, 'embed_blocks': 4, 'embed_down': [1, 2], 'embed_up': [3, 4, 1]},
     r'both downsampling and upsampling'),
    ({'model': 'pyramid', 'levels': 3, 'size': 8, 'embed_blocks': 5, 'embed_down': [1, 2], 'embed_up': [3, 4, 5]},
     r'Coarsest resolution 2x2 cannot be downsampled 2 times by the embedding'),
    ({'size': 6, 'embed_blocks': 3, 'embed_down': [1, 2], 'embed_up': [3]},
     r'Grayscale auxiliary embedding must keep the resolution'),
    ({'size': 6, 'embed_blocks': 4, 'embed_down': [1, 2], 'embed_up': [3, 4]},
     r'Resolution 6 cannot be downsampled 2 times by the embedding'),
    ({'lr': -0.1}, r'Learning rate cannot be negative'),
    ({'lr_decay': 0.0}, r'Learning rate decay must be in \(0, 1\]'),
    ({'dropout': 1.0}, r'Dropout rate must be in \[0, 1\)'),
    ({'batch_size': 0}, r'Batch size must be positive'),
    ({'steps': -1}, r'Steps and epochs cannot be negative'),
    ({'adam_beta1': 1.0}, r'Adam betas must be in \[0, 1\)'),
    ({'adam_eps': 0.0}, r'Adam epsilon must be positive'),
    ({'lam': -1.0}, r'Variance reduction cannot be negative'),
    ({'seed': -3}, r'Seed cannot be negative')
])
def test_validation(values, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig(**values)


def test_unknown_keys():
    with pytest.raises(ConfigError, match=r'Unknown configuration keys: bar, foo'):
        RunConfig(foo=1, bar=2)


def test_flat_allows_any_embedding_knobs():
    # flat models have no embedding net, its knobs are not checked against the model
    config = RunConfig(model='flat', embed_up=[1])

    assert config.embed_up == [1]


def test_text_round_trip():
    config = tiny_config(model='pyramid', crop=[1, 2, 3, 4], flip=True, lam=0.5, mode='reduced')

    text = config.to_text()
    lines = text.splitlines()

    assert text.endswith('\n')
    assert lines == sorted(lines)
    assert 'crop=1,2,3,4' in lines
    assert 'flip=yes' in lines
    assert 'lam=0.5' in lines
    assert 'embed_up=1' in lines
    assert 'embed_down=' in lines

    again = RunConfig.from_text(text)

    assert again == config
    assert again.to_text() == text
    assert again.config_hash == config.config_hash
    assert again.crop_margins == (1, 2, 3, 4)


def test_from_text_comments():
    config = RunConfig.from_text('# toy run\n\nmodel = flat\n  size=4  \n')

    assert config.model == 'flat'
    assert config.size == 4


def test_from_text_error():
    with pytest.raises(ConfigError, match=r"Line 2 is not a key=value pair: 'size 4'"):
        RunConfig.from_text('model=flat\nsize 4\n')


def test_hash_differs():
    assert RunConfig().config_hash != RunConfig(seed=1).config_hash
    assert len(RunConfig().config_hash) == 64
    assert RunConfig() != RunConfig(seed=1)
    assert len({RunConfig(), RunConfig()}) == 1


def test_replace():
    config = tiny_config()
    other = config.replace(seed=7)

    assert other.seed == 7
    assert config.seed == 0
    assert other.blocks == config.blocks

    with pytest.raises(ConfigError):
        config.replace(size=0)


def test_nested_configs():
    config = RunConfig(lr=0.01, steps=3, mode='reduced', lam=0.4, seed=5, cache=False)

    assert isinstance(config.train, TrainConfig)
    assert (config.train.lr, config.train.steps, config.train.seed) == (0.01, 3, 5)

    assert isinstance(config.sample, SampleConfig)
    assert (config.sample.mode, config.sample.lam, config.sample.seed, config.sample.use_cache) == \
        ('reduced', 0.4, 5, False)


@given(lam=st.floats(min_value=0.0, max_value=10.0), mode=st.sampled_from(['ancestral', 'map']))
def test_lam_only_for_reduced(lam, mode):
    assert SampleConfig(mode=mode, lam=lam).lam == 0.0
    assert SampleConfig(mode='reduced', lam=lam).lam == lam


def test_sample_config_replace():
    config = SampleConfig(mode='reduced', lam=0.3, seed=2)

    other = config.replace(mode='map')

    assert (other.mode, other.lam, other.seed) == ('map', 0.0, 2)
    assert config.lam == 0.3
    assert repr(other) == 'SampleConfig(mode=map, lam=0.0, seed=2, use_cache=True)'


def test_sample_config_mode():
    with pytest.raises(ConfigError, match=r"Sampling mode must be one of ancestral, reduced, map, got 'beam'"):
        SampleConfig(mode='beam')


@pytest.mark.parametrize('value, expected', [
    (True, 'yes'),
    (False, 'no'),
    (0.1, '0.1'),
    (1e-8, '1e-08'),
    ([9, 12], '9,12'),
    ([], ''),
    (16, '16'),
    ('toy', 'toy')
])
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_parse_values():
    assert parse_values({'embed-up': '9, 12', 'size': 32, 'crop': None}) == {'embed_up': [9, 12], 'size': 32}


def test_run_options():
    options = run_options(['size', 'embed_up'])

    assert sorted(options) == ['embed-up', 'size']
    assert options['size']['metavar'] == 'SIZE'
    assert options['size']['help'].endswith('(default: 16)') is False
    assert options['size']['help'].endswith('(default: 8)')
    assert options['embed-up']['help'].endswith('(default: none)')

    assert len(run_options()) == len(FIELDS)
