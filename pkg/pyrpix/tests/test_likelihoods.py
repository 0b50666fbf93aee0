import numpy as np
import pytest

from hypothesis import given, strategies as st

from pyrpix import tensor as T
from pyrpix.core import DataError, NumericError
from pyrpix.likelihoods import BIN_HALF_WIDTH, LOG_SCALE_FLOOR, Categorical16Head, DmolHead, categorical16_log_prob, \
    categorical16_nll, categorical16_sample, channel_log_probs, discretize, dmol_log_prob, dmol_nll, dmol_sample, \
    draw_index, logistic_bin_probs, make_head, split_mixture, unpack_mixture

from . import gradcheck


def _pixel_vector(rng, mixtures, log_scales=(-3.5, -1.0)):
    """
    Random parameters of one pixel, log-scales kept well above the floor.
    """

    return np.concatenate([
        rng.normal(size=mixtures),
        rng.uniform(-0.8, 0.8, size=3 * mixtures),
        rng.uniform(log_scales[0], log_scales[1], size=3 * mixtures),
        rng.normal(size=3 * mixtures)
    ])


def _tile(vector, n, h=1, w=1):
    return T.constant(np.tile(vector.reshape(1, -1, 1, 1), (n, 1, h, w)))


def _oracle_log_prob(vector, pixel):
    """
    Log-probability of one RGB pixel computed from per-component bin tables.
    """

    mix = unpack_mixture(vector)

    r, g = pixel[0] / 127.5 - 1.0, pixel[1] / 127.5 - 1.0
    weights = np.exp(mix.logits - np.max(mix.logits))
    weights /= weights.sum()

    total = 0.0

    for k in range(len(mix.logits)):
        means = [
            mix.means[0, k],
            mix.means[1, k] + mix.coeffs[0, k] * r,
            mix.means[2, k] + mix.coeffs[1, k] * r + mix.coeffs[2, k] * g
        ]

        prob = weights[k]

        for c in range(3):
            prob *= logistic_bin_probs(means[c], mix.log_scales[c, k])[pixel[c]]

        total += prob

    return np.log(total)


@pytest.mark.parametrize('channel', [0, 1, 2])
def test_channel_bins_normalized(float64, channel):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(channel)

    for _ in range(100):
        vector = _pixel_vector(rng, 3)

        image = np.tile(rng.integers(0, 256, size=(1, 3, 1, 1)), (256, 1, 1, 1))
        image[:, channel, 0, 0] = np.arange(256)

        with T.no_grad():
            per_channel = channel_log_probs(_tile(vector, 256), image, 3).data

        totals = np.exp(per_channel[:, channel, :, 0, 0]).sum(axis=0)

        np.testing.assert_allclose(totals, np.ones(3), atol=1e-5)


def test_dmol_matches_bin_tables(float64):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(11)

    pixels = np.array([[0, 0, 0], [255, 255, 255], [12, 200, 97], [128, 127, 255]])

    # wide logistics keep every bin far above the probability floor
    for _ in range(10):
        vector = _pixel_vector(rng, 4, log_scales=(-1.5, -0.5))

        with T.no_grad():
            log_prob = dmol_log_prob(_tile(vector, len(pixels)), pixels.reshape(-1, 3, 1, 1), 4).data

        expected = [_oracle_log_prob(vector, pixel) for pixel in pixels]

        np.testing.assert_allclose(log_prob[:, 0, 0], expected, rtol=0, atol=1e-6)


@pytest.mark.parametrize('value', [1, 100, 200])
def test_dmol_peaked_component(float64, value):
    # pylint: disable=unused-argument
    """
    A single component centered on the pixel, log-scale at the floor: every channel gets
    ``2 * sigmoid(exp(7) / 255) - 1`` of the mass.
    """

    center = value / 127.5 - 1.0

    vector = np.concatenate([[0.0], [center] * 3, [-20.0] * 3, [0.0] * 3])

    nll = dmol_nll(_tile(vector, 1), np.full((1, 3, 1, 1), value), 1).item()

    bin_edge = BIN_HALF_WIDTH * np.exp(-LOG_SCALE_FLOOR)
    expected = -3 * np.log(2.0 / (1.0 + np.exp(-bin_edge)) - 1.0)

    assert nll == pytest.approx(expected, rel=1e-9)
    assert 0.07 < nll < 0.09


def test_dmol_identical_components(float64):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(5)

    single = _pixel_vector(rng, 1)

    doubled = np.concatenate([
        [0.3, -1.2],
        np.repeat(single[1:4], 2),
        np.repeat(single[4:7], 2),
        np.repeat(single[7:10], 2)
    ])

    image = rng.integers(0, 256, size=(2, 3, 3, 3))

    with T.no_grad():
        one = dmol_log_prob(_tile(single, 2, 3, 3), image, 1).data
        two = dmol_log_prob(_tile(doubled, 2, 3, 3), image, 2).data

    np.testing.assert_allclose(two, one, rtol=1e-12)


def test_dmol_gradients(float64):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(3)

    # bins stay wide enough for finite differences of their log-probabilities to be stable
    params = T.parameter(np.concatenate([
        rng.normal(size=(1, 2, 3, 3)),
        rng.uniform(-0.5, 0.5, size=(1, 6, 3, 3)),
        rng.uniform(-0.7, -0.2, size=(1, 6, 3, 3)),
        rng.normal(scale=0.3, size=(1, 6, 3, 3))
    ], axis=1))

    image = rng.integers(0, 256, size=(1, 3, 3, 3))
    image[0, :, 0, 0] = 0
    image[0, :, 1, 1] = 255

    assert gradcheck(lambda: dmol_nll(params, image, 2), [params]) < 1e-6


def _tail_nll(vector, value):
    params = T.parameter(vector.reshape(1, -1, 1, 1))

    with T.Tape():
        nll = dmol_nll(params, np.full((1, 3, 1, 1), value), 1)
        T.backward(nll)

    return nll.item(), params.grad[0, 1:4, 0, 0]


def test_dmol_tail_bin_float32():
    """
    Pixel about 19 scales above its only component: the bin mass is tiny but real, in ``float32`` too.
    """

    vector = np.concatenate([[0.0], [-0.05] * 3, [-3.0] * 3, [0.0] * 3])

    nll, grad = _tail_nll(vector, 240)

    with T.precision(np.float64):
        expected_nll, expected_grad = _tail_nll(vector, 240)

    assert nll == pytest.approx(expected_nll, rel=1e-4)
    assert np.all(grad < 0)
    np.testing.assert_allclose(grad, expected_grad, rtol=1e-3)


@pytest.mark.parametrize('dtype', [np.float32, np.float64])
def test_dmol_far_tail_uses_density(dtype):
    """
    Bins too far out for their mass to be represented fall back to the density at the bin center.
    """

    vector = np.concatenate([[0.0], [-0.9] * 3, [-7.0] * 3, [0.0] * 3])

    with T.precision(dtype):
        nll, grad = _tail_nll(vector, 250)

    mid = (250 / 127.5 - 1.0 + 0.9) * np.exp(7.0)
    expected = -3 * (mid + 7.0 - 2 * np.logaddexp(0, mid) + np.log(2.0 / 255.0))

    assert np.isfinite(nll)
    assert nll == pytest.approx(expected, rel=1e-5)
    assert np.all(grad < 0)


def test_dmol_nll_is_float64():
    params = T.constant(np.zeros((1, 10, 2, 2), dtype=np.float32))

    assert dmol_nll(params, np.zeros((1, 3, 2, 2), dtype=np.uint8), 1).dtype == np.float64


def test_dmol_errors():
    params = T.constant(np.zeros((1, 10, 1, 1)))

    with pytest.raises(DataError, match=r'Pixel values must lie in 0..255, got range 0..256'):
        dmol_log_prob(params, np.array([0, 0, 256]).reshape(1, 3, 1, 1), 1)

    with pytest.raises(DataError, match=r'Expected \(N, 3, H, W\) pixel values'):
        dmol_log_prob(params, np.zeros((1, 1, 1, 1)), 1)

    with pytest.raises(NumericError, match=r'needs 20 channels, got 10'):
        dmol_log_prob(params, np.zeros((1, 3, 1, 1)), 2)

    broken = np.zeros((1, 10, 1, 1))
    broken[0, 3] = np.nan

    with pytest.raises(NumericError, match=r'1 non-finite values'):
        dmol_log_prob(T.constant(broken), np.zeros((1, 3, 1, 1)), 1)


def test_split_mixture_clamps_and_squashes():
    raw = np.zeros((1, 10, 1, 1))
    raw[0, 4:7] = -50.0
    raw[0, 7:10] = 100.0

    mix = split_mixture(T.constant(raw), 1)

    assert mix.means.shape == (1, 3, 1, 1, 1)
    np.testing.assert_array_equal(mix.log_scales.data, LOG_SCALE_FLOOR)
    np.testing.assert_allclose(mix.coeffs.data, 1.0)


def test_categorical_normalized(float64):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(0)

    for _ in range(100):
        logits = rng.normal(scale=3.0, size=16)

        with T.no_grad():
            log_prob = categorical16_log_prob(_tile(logits, 16), np.arange(16).reshape(16, 1, 1, 1)).data

        assert np.exp(log_prob).sum() == pytest.approx(1.0, abs=1e-9)


def test_categorical_softmax_oracle(float64):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(1)

    logits = rng.normal(size=(2, 16, 3, 4))
    gray = rng.integers(0, 16, size=(2, 1, 3, 4))

    log_prob = categorical16_log_prob(T.constant(logits), gray).data

    probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
    expected = np.log(np.take_along_axis(probs, gray, axis=1))[:, 0]

    np.testing.assert_allclose(log_prob, expected, rtol=1e-12)


def test_categorical_confident(float64):
    # pylint: disable=unused-argument
    logits = np.zeros(16)
    logits[9] = 30.0

    assert categorical16_nll(_tile(logits, 1), np.full((1, 1, 1, 1), 9)).item() < 1e-9


def test_categorical_uniform(float64):
    # pylint: disable=unused-argument
    nll = categorical16_nll(T.constant(np.zeros((1, 16, 2, 2))), np.zeros((1, 1, 2, 2), dtype=np.uint8)).item()

    assert nll == pytest.approx(4 * np.log(16), rel=1e-12)


def test_categorical_gradients(float64):
    # pylint: disable=unused-argument
    rng = np.random.default_rng(2)

    params = T.parameter(rng.normal(size=(2, 16, 2, 3)))
    gray = rng.integers(0, 16, size=(2, 1, 2, 3))

    assert gradcheck(lambda: categorical16_nll(params, gray), [params]) < 1e-6


def test_categorical_errors():
    with pytest.raises(DataError, match=r'Pixel values must lie in 0..15'):
        categorical16_log_prob(T.constant(np.zeros((1, 16, 1, 1))), np.full((1, 1, 1, 1), 16))

    with pytest.raises(NumericError, match=r'Categorical head needs 16 channels'):
        categorical16_log_prob(T.constant(np.zeros((1, 10, 1, 1))), np.zeros((1, 1, 1, 1)))


@pytest.mark.parametrize('mean, log_scale', [(0.0, 0.0), (0.3, -4.0), (-0.99, -2.0), (0.5, -30.0)])
def test_logistic_bin_probs(mean, log_scale):
    probs = logistic_bin_probs(mean, log_scale)

    assert probs.shape == (256,)
    assert np.all(probs >= 0)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    if log_scale <= -4.0:
        assert int(np.argmax(probs)) == discretize(mean)


@pytest.mark.parametrize('value, levels, expected', [
    (0.0, 256, 128),
    (0.0, 16, 8),
    (-1.0, 256, 0),
    (1.0, 256, 255),
    (-5.0, 256, 0),
    (5.0, 16, 15)
])
def test_discretize(value, levels, expected):
    assert discretize(value, levels=levels) == expected


@given(value=st.integers(min_value=0, max_value=255))
def test_discretize_grid(value):
    assert discretize(value / 127.5 - 1.0) == value


@pytest.mark.parametrize('uniform, expected', [
    (0.0, 0),
    (0.49, 0),
    (0.5, 1),
    (0.999999, 1)
])
def test_draw_index(uniform, expected):
    assert draw_index(np.zeros(2), uniform) == expected


def test_draw_index_follows_weights():
    logits = np.log([0.1, 0.6, 0.3])

    assert draw_index(logits, 0.05) == 0
    assert draw_index(logits, 0.65) == 1
    assert draw_index(logits, 0.75) == 2


def test_reduced_with_large_lambda_is_map():
    rng = np.random.default_rng(21)

    for _ in range(200):
        vector = _pixel_vector(rng, 3)
        uniforms = rng.random(4)

        np.testing.assert_array_equal(
            dmol_sample(vector, 'reduced', uniforms, lam=20.0),
            dmol_sample(vector, 'map', uniforms)
        )


def test_reduced_zero_lambda_is_ancestral():
    rng = np.random.default_rng(22)

    for _ in range(50):
        vector = _pixel_vector(rng, 2)
        uniforms = rng.random(4)

        np.testing.assert_array_equal(
            dmol_sample(vector, 'reduced', uniforms, lam=0.0),
            dmol_sample(vector, 'ancestral', uniforms)
        )


def test_map_follows_discretized_channels():
    coeff = 0.5

    vector = np.concatenate([[0.0], [0.5, -0.2, 0.11], [-3.0] * 3, [np.arctanh(coeff), 0.0, np.arctanh(coeff)]])

    pixel = dmol_sample(vector, 'map', [0.5, 0.5, 0.5, 0.5])

    red = int(np.floor(1.5 * 127.5 + 0.5))
    green = int(np.floor((-0.2 + coeff * (red / 127.5 - 1.0) + 1.0) * 127.5 + 0.5))
    blue = int(np.floor((0.11 + coeff * (green / 127.5 - 1.0) + 1.0) * 127.5 + 0.5))

    assert pixel.dtype == np.uint8
    assert pixel.tolist() == [red, green, blue]


def test_ancestral_matches_bin_probs():
    vector = np.concatenate([[0.0], [0.1, 0.0, 0.0], [np.log(0.03)] * 3, [0.0] * 3])

    rng = np.random.default_rng(8)

    counts = np.zeros(256)

    for _ in range(20000):
        counts[dmol_sample(vector, 'ancestral', rng.random(4))[0]] += 1

    np.testing.assert_allclose(counts / counts.sum(), logistic_bin_probs(0.1, np.log(0.03)), atol=0.015)


def test_dmol_sample_errors():
    vector = np.zeros(10)

    with pytest.raises(NumericError, match=r"Unknown sampling mode 'greedy'"):
        dmol_sample(vector, 'greedy', [0.5] * 4)

    with pytest.raises(NumericError, match=r'Variance reduction must be non-negative'):
        dmol_sample(vector, 'reduced', [0.5] * 4, lam=-1.0)

    vector[0] = np.inf

    with pytest.raises(NumericError, match=r'non-finite'):
        dmol_sample(vector, 'map', [0.5] * 4)

    with pytest.raises(NumericError, match=r'vector of 10K values'):
        dmol_sample(np.zeros(12), 'map', [0.5] * 4)


def test_categorical_sample():
    logits = np.zeros(16)
    logits[5] = 30.0

    for uniform in (0.0, 0.3, 0.99):
        assert categorical16_sample(logits, [uniform]).tolist() == [5]

    assert categorical16_sample(np.zeros(16), [0.5]).tolist() == [8]

    with pytest.raises(NumericError, match=r'16 finite logits'):
        categorical16_sample(np.zeros(15), [0.5])


def test_make_head():
    dmol = make_head('dmol', mixtures=4)

    assert isinstance(dmol, DmolHead)
    assert (dmol.mixtures, dmol.channels, dmol.levels) == (4, 3, 256)

    categorical = make_head('categorical16')

    assert isinstance(categorical, Categorical16Head)
    assert (categorical.channels, categorical.levels) == (1, 16)

    # every mode reduces to a categorical draw
    assert categorical.sample(np.zeros(16), 'map', [0.0]).tolist() == [0]

    with pytest.raises(NumericError, match=r"Unknown likelihood head 'gaussian'"):
        make_head('gaussian')


def test_head_nll_sums_log_prob(float64):
    # pylint: disable=unused-argument
    head = make_head('dmol', mixtures=1)

    params = T.constant(np.random.default_rng(0).normal(size=(1, 10, 2, 2)))
    image = np.random.default_rng(1).integers(0, 256, size=(1, 3, 2, 2))

    assert head.nll(params, image).item() == pytest.approx(-head.log_prob(params, image).data.sum(), rel=1e-12)


@pytest.mark.parametrize('value', [0, 37, 128, 255])
@pytest.mark.parametrize('log_scale', [-7.0, 0.0, 2.0])
def test_map_returns_grid_mean(value, log_scale):
    center = value / 127.5 - 1.0

    vector = np.concatenate([[0.0], [center] * 3, [log_scale] * 3, [0.0] * 3])

    assert dmol_sample(vector, 'map', [0.3, 0.9, 0.1, 0.5]).tolist() == [value] * 3
