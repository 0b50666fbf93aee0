import numpy as np
import pytest

from pyrpix.auxiliary import downsample2x, quantize_grayscale
from pyrpix.config import SampleConfig
from pyrpix.core import NumericError, ShapeError
from pyrpix.models import Model, build_model
from pyrpix.sampling import LAMBDA_SWEEP, gray_consistency, pixel_uniforms, round_trip_deviation, sample_conditional, \
    sample_factor, sample_model, sample_pair, sample_pyramid, sample_unconditional

from . import tiny_config, toy_images


@pytest.fixture(name='flat', scope='module')
def fixture_flat():
    return build_model(tiny_config(model='flat', seed=2))


@pytest.fixture(name='pair', scope='module')
def fixture_pair():
    return build_model(tiny_config(seed=2))


@pytest.fixture(name='pyramid', scope='module')
def fixture_pyramid():
    return build_model(tiny_config(model='pyramid', seed=2))


def test_lambda_sweep():
    assert LAMBDA_SWEEP == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def test_pixel_uniforms():
    uniforms = pixel_uniforms(0, 0, 0, 0)

    assert uniforms.shape == (4,)
    assert ((uniforms >= 0) & (uniforms < 1)).all()

    np.testing.assert_array_equal(pixel_uniforms(0, 0, 0, 0), uniforms)

    others = [pixel_uniforms(1, 0, 0, 0), pixel_uniforms(0, 1, 0, 0), pixel_uniforms(0, 0, 1, 0),
              pixel_uniforms(0, 0, 0, 1)]

    for other in others:
        assert not np.array_equal(other, uniforms)


@pytest.mark.parametrize('mode, lam', [('ancestral', 0.0), ('reduced', 0.5), ('map', 0.0)])
@pytest.mark.parametrize('seed', range(5))
def test_cache_matches_naive(flat, mode, lam, seed):
    cfg = SampleConfig(mode=mode, lam=lam, seed=seed)
    factor = flat.factors['flat']

    cached = sample_factor(factor, 8, 8, cfg)
    naive = sample_factor(factor, 8, 8, cfg.replace(use_cache=False))

    assert cached.shape == (3, 8, 8)
    assert cached.dtype == np.uint8
    np.testing.assert_array_equal(cached, naive)


@pytest.mark.slow
def test_cache_matches_naive_16(flat):
    cfg = SampleConfig(seed=7)
    factor = flat.factors['flat']

    np.testing.assert_array_equal(sample_factor(factor, 16, 16, cfg), sample_factor(factor, 16, 16,
                                                                                  cfg.replace(use_cache=False)))


def test_conditional_cache_matches_naive(pair):
    cfg = SampleConfig(seed=1)
    aux = quantize_grayscale(toy_images(count=1)[0])

    np.testing.assert_array_equal(sample_conditional(pair, aux, cfg),
                                  sample_conditional(pair, aux, cfg.replace(use_cache=False)))


def test_determinism(flat):
    cfg = SampleConfig(seed=3)
    factor = flat.factors['flat']

    first = sample_unconditional(factor, 8, 8, cfg)

    np.testing.assert_array_equal(sample_unconditional(factor, 8, 8, cfg), first)
    assert not np.array_equal(sample_unconditional(factor, 8, 8, cfg, image_index=1), first)


def test_reduced_zero_lambda_is_ancestral(flat):
    factor = flat.factors['flat']

    np.testing.assert_array_equal(
        sample_factor(factor, 8, 8, SampleConfig(mode='reduced', lam=0.0, seed=4)),
        sample_factor(factor, 8, 8, SampleConfig(mode='ancestral', seed=4))
    )


def test_single_pixel(flat):
    image = sample_unconditional(flat.factors['flat'], 1, 1, SampleConfig())

    assert image.shape == (3, 1, 1)


def test_uninitialized():
    model = build_model(tiny_config(model='flat'), initialize=False)

    with pytest.raises(NumericError, match=r"Factor 'flat' is not initialized, load a checkpoint first"):
        sample_model(model, SampleConfig())


def test_conditional_needs_aux(pair):
    with pytest.raises(ShapeError, match=r"Conditional factor 'cond' needs an auxiliary image") as excinfo:
        sample_factor(pair.factors['cond'], 8, 8, SampleConfig())

    assert excinfo.value.axis == 'aux'

    with pytest.raises(ShapeError, match=r"Factor 'cond' is conditional"):
        sample_unconditional(pair.factors['cond'], 8, 8, SampleConfig())


def test_conditional_aux_shape(pair):
    with pytest.raises(ShapeError, match=r'Auxiliary image of shape \(1, 4, 4\) does not fit a 8x8 pair'):
        sample_conditional(pair, np.zeros((1, 4, 4), dtype=np.uint8), SampleConfig())


def test_sample_pair(pair, log):
    image, aux = sample_pair(pair, SampleConfig(seed=5))

    assert image.shape == (3, 8, 8)
    assert aux.shape == (1, 8, 8)
    assert aux.max() <= 15

    assert log.match(message="action 'sample aux', child of '<no parent>', starts")
    assert log.match(message="action 'sample cond', child of '<no parent>', starts")


def test_sample_model_kinds(flat, pair, pyramid):
    cfg = SampleConfig(seed=6)

    assert sorted(sample_model(flat, cfg)) == ['image']
    assert sorted(sample_model(pair, cfg)) == ['aux', 'image']

    result = sample_model(pyramid, cfg)

    assert sorted(result) == ['image', 'levels']
    assert result['image'] is result['levels'][0]
    assert [level.shape for level in result['levels']] == [(3, 8, 8), (3, 4, 4)]


def test_sample_model_unknown():
    with pytest.raises(NumericError, match=r'Cannot sample from'):
        sample_model(Model(tiny_config(), []), SampleConfig())


def test_pyramid_from_coarse(pyramid):
    coarse = downsample2x(toy_images(count=1)[0])

    levels = sample_pyramid(pyramid, SampleConfig(seed=1), coarse=coarse)

    assert len(levels) == 2
    np.testing.assert_array_equal(levels[1], coarse)
    assert levels[0].shape == (3, 8, 8)


def test_pyramid_coarse_mismatch(pyramid):
    with pytest.raises(ShapeError, match=r'Coarsest level must be 4x4, got 8x8'):
        sample_pyramid(pyramid, SampleConfig(), coarse=toy_images(count=1)[0])


def test_single_level_pyramid():
    model = build_model(tiny_config(model='pyramid', levels=1, embed_up=[]))

    levels = sample_pyramid(model, SampleConfig())

    assert len(levels) == 1
    assert levels[0].shape == (3, 8, 8)


def test_gray_consistency():
    image = toy_images(count=1)[0]
    aux = quantize_grayscale(image)

    assert gray_consistency(image, aux) == 1.0

    aux[0, 0, 0] = (aux[0, 0, 0] + 1) % 16

    assert gray_consistency(image, aux) == pytest.approx(63.0 / 64.0)


def test_round_trip_deviation():
    image = toy_images(count=1)[0]
    coarse = downsample2x(image)

    assert round_trip_deviation([image, coarse], coarse) == 0.0

    shifted = coarse.copy()
    shifted[0, 0, 0] = 255 if shifted[0, 0, 0] < 128 else 0

    assert round_trip_deviation([image, coarse], shifted) == pytest.approx(
        abs(int(shifted[0, 0, 0]) - int(coarse[0, 0, 0])) / 48.0
    )
