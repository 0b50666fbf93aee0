import numpy as np
import pytest

from pyrpix import tensor as T
from pyrpix.auxiliary import quantize_grayscale
from pyrpix.core import CheckpointError, ConfigError
from pyrpix.models import AuxModelPair, FlatModel, PyramidModel, build_model, factor_rng, factor_seed

from . import gradcheck, tiny_config, toy_images


@pytest.fixture(name='batch')
def fixture_batch():
    return toy_images(count=2)


@pytest.mark.parametrize('kind, klass, names', [
    ('grayscale-aux', AuxModelPair, ['aux', 'cond']),
    ('pyramid', PyramidModel, ['level1', 'level0']),
    ('flat', FlatModel, ['flat'])
])
def test_factor_order(kind, klass, names):
    model = build_model(tiny_config(model=kind))

    assert isinstance(model, klass)
    assert list(model.factors) == names
    assert model.initialized


def test_unknown_kind():
    config = tiny_config()
    config._values['model'] = 'glow'  # pylint: disable=protected-access

    with pytest.raises(ConfigError, match=r"Unknown model kind 'glow'"):
        build_model(config)


def test_aux_pair_structure():
    model = build_model(tiny_config())

    aux, cond = model.factors['aux'], model.factors['cond']

    assert not aux.conditional
    assert cond.conditional
    assert model.aux_model is aux.net
    assert model.cond_model is cond.net
    assert model.embed_net is cond.embed_net
    assert model.embed_net.in_channels == 1
    assert aux.head.levels == 16
    assert cond.head.levels == 256
    assert repr(cond) == '<Factor cond (conditional)>'
    assert repr(model) == '<AuxModelPair aux, cond>'


def test_aux_pair_views(batch):
    model = build_model(tiny_config())

    target, aux = model.factors['aux'].views(batch)

    np.testing.assert_array_equal(target, quantize_grayscale(batch))
    assert aux is None

    target, aux = model.factors['cond'].views(batch)

    np.testing.assert_array_equal(target, batch)
    np.testing.assert_array_equal(aux, quantize_grayscale(batch))


def test_pyramid_views(batch):
    model = build_model(tiny_config(model='pyramid'))

    assert model.levels == 2
    assert not model.level(1).conditional
    assert model.level(0).conditional
    assert model.level(0).embed_net.in_channels == 3

    target, aux = model.level(1).views(batch)

    assert target.shape == (2, 3, 4, 4)
    assert aux is None

    target, aux = model.level(0).views(batch)

    assert target.shape == (2, 3, 8, 8)
    assert aux.shape == (2, 3, 4, 4)


def test_single_level_pyramid():
    model = build_model(tiny_config(model='pyramid', levels=1, embed_up=[]))

    assert list(model.factors) == ['level0']
    assert not model.level(0).conditional


def test_flat_net():
    model = build_model(tiny_config(model='flat'))

    assert model.net is model.factors['flat'].net


@pytest.mark.parametrize('kind', ['grayscale-aux', 'pyramid', 'flat'])
def test_objective_is_sum_of_factors(kind, batch):
    model = build_model(tiny_config(model=kind))

    total, per_factor = model.objective(batch)

    assert list(per_factor) == list(model.factors)
    assert total == sum(per_factor.values())

    for name, factor in model.factors.items():
        with T.no_grad():
            assert per_factor[name] == factor.nll(batch).item()

        assert per_factor[name] > 0


def test_log_prob_shapes(batch):
    model = build_model(tiny_config())

    with T.no_grad():
        assert model.factors['aux'].log_prob(batch).shape == (2, 8, 8)
        assert model.factors['cond'].log_prob(batch).shape == (2, 8, 8)


@pytest.mark.parametrize('name', ['aux', 'cond'])
def test_factor_gradients(float64, name):
    # two gated blocks, embedding included for the conditional factor
    model = build_model(tiny_config(size=4, blocks=2))
    factor = model.factors[name]

    params = list(factor.parameters().values())

    assert all(param.data.dtype == np.float64 for param in params)
    assert gradcheck(lambda: factor.nll(toy_images(size=4, count=1)), params, samples=4) < 1e-6


def test_zero_embedding_ignores_aux(batch):
    model = build_model(tiny_config())
    cond = model.factors['cond']

    for param in cond.embed_net.parameters().values():
        param.data[...] = 0

    target = batch
    other_aux = np.full_like(quantize_grayscale(batch), 15)

    with T.no_grad():
        expected = cond.forward(target, quantize_grayscale(batch)).data
        actual = cond.forward(target, other_aux).data

    np.testing.assert_array_equal(actual, expected)


def test_parameter_names():
    model = build_model(tiny_config())
    names = list(model.parameters())

    assert all(name.startswith('aux.net.') or name.startswith('cond.') for name in names)
    assert 'aux.net.input.weight' in names
    assert 'cond.embed.input.weight' in names
    assert not any(name.startswith('aux.embed.') for name in names)


def test_factor_seeds():
    assert factor_seed(0, 'aux', 'init') == factor_seed(0, 'aux', 'init')
    assert len({
        factor_seed(0, 'aux', 'init'),
        factor_seed(0, 'cond', 'init'),
        factor_seed(0, 'aux', 'train'),
        factor_seed(1, 'aux', 'init')
    }) == 4

    np.testing.assert_array_equal(factor_rng(3, 'flat', 'train').random(4), factor_rng(3, 'flat', 'train').random(4))


def test_build_is_deterministic():
    first = build_model(tiny_config(seed=4)).state_dict()
    second = build_model(tiny_config(seed=4)).state_dict()
    other = build_model(tiny_config(seed=5)).state_dict()

    assert list(first) == list(second)

    for name in first:
        np.testing.assert_array_equal(first[name], second[name])

    assert any(not np.array_equal(first[name], other[name]) for name in first)


def test_state_round_trip(batch):
    source = build_model(tiny_config(model='pyramid'))
    target = build_model(tiny_config(model='pyramid'), initialize=False)

    assert not target.initialized

    target.load_state_dict(source.state_dict())

    assert target.initialized
    assert target.objective(batch) == source.objective(batch)


def test_load_unexpected_records():
    model = build_model(tiny_config())
    state = model.state_dict()
    state['ghost.net.input.weight'] = np.zeros(1)

    with pytest.raises(CheckpointError, match=r'Unexpected parameter records: ghost.net.input.weight'):
        model.load_state_dict(state)


def test_load_missing_records():
    model = build_model(tiny_config())
    state = model.state_dict()
    del state['cond.embed.input.weight']

    with pytest.raises(CheckpointError, match=r'missing input.weight'):
        model.load_state_dict(state)


def test_load_factor_errors():
    model = build_model(tiny_config())

    with pytest.raises(CheckpointError, match=r"Model has no factor 'level0'"):
        model.load_factor_state('level0', {})

    state = {
        name[len('aux.'):]: value for name, value in model.state_dict().items() if name.startswith('aux.')
    }
    state['embed.input.weight'] = np.zeros(1)

    with pytest.raises(CheckpointError, match=r"Unconditional factor 'aux' has no embedding records"):
        model.load_factor_state('aux', state)
