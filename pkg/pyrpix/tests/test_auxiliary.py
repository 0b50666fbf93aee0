import numpy as np
import pytest

from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from pyrpix.auxiliary import PyramidSpec, build_pyramid, downsample2x, gray4_to_rgb, quantize_gray8, \
    quantize_grayscale
from pyrpix.core import ConfigError, DataError


def _pixel(r, g, b):
    return np.array([r, g, b], dtype=np.uint8).reshape(3, 1, 1)


def _images(channels=3, max_side=6, even=False):
    def _shape(sides):
        height, width = sides
        return (channels, height * 2, width * 2) if even else (channels, height, width)

    return st.tuples(
        st.integers(min_value=1, max_value=max_side),
        st.integers(min_value=1, max_value=max_side)
    ).map(_shape).flatmap(lambda shape: hnp.arrays(np.uint8, shape))


@pytest.mark.parametrize('rgb, expected', [
    ((0, 0, 0), 0),
    ((255, 255, 255), 15),
    ((255, 0, 0), 4),
    ((0, 255, 0), 9),
    ((0, 0, 255), 1),
    ((16, 16, 16), 1),
    ((15, 15, 15), 0)
])
def test_quantize_grayscale(rgb, expected):
    gray = quantize_grayscale(_pixel(*rgb))

    assert gray.shape == (1, 1, 1)
    assert gray.dtype == np.uint8
    assert gray[0, 0, 0] == expected


@given(image=_images())
def test_quantize_grayscale_range(image):
    gray = quantize_grayscale(image)

    assert gray.shape == (1,) + image.shape[1:]
    assert gray.max() <= 15


@given(value=st.integers(min_value=0, max_value=255))
def test_gray_pixels(value):
    # a gray RGB pixel quantizes like the 8-bit gray value itself
    assert quantize_grayscale(_pixel(value, value, value))[0, 0, 0] == value // 16
    assert quantize_gray8(np.full((1, 1, 1), value, dtype=np.uint8))[0, 0, 0] == value // 16


def test_quantize_grayscale_batch():
    batch = np.zeros((2, 3, 2, 2), dtype=np.uint8)
    batch[1] = 255

    gray = quantize_grayscale(batch)

    assert gray.shape == (2, 1, 2, 2)
    assert gray[0].max() == 0
    assert gray[1].min() == 15


@pytest.mark.parametrize('image, match', [
    (np.zeros((1, 4, 4)), r'Expected RGB image of shape'),
    (np.zeros((3, 0, 4)), r'Image extents must be at least 1, got 0x4'),
    (np.full((3, 1, 1), 300), r'RGB values must lie in 0..255, got range 300..300'),
    (np.full((3, 1, 1), -1), r'RGB values must lie in 0..255')
])
def test_quantize_grayscale_errors(image, match):
    with pytest.raises(DataError, match=match):
        quantize_grayscale(image)


def test_gray4_to_rgb():
    gray = np.array([0, 1, 15], dtype=np.uint8).reshape(1, 1, 3)

    rgb = gray4_to_rgb(gray)

    assert rgb.shape == (3, 1, 3)
    assert rgb[0].tolist() == [[0, 17, 255]]
    np.testing.assert_array_equal(rgb[0], rgb[2])

    # viewing and quantizing again gives the levels back
    np.testing.assert_array_equal(quantize_grayscale(rgb), gray)


def test_gray4_to_rgb_range():
    with pytest.raises(DataError, match=r'Grayscale levels must lie in 0..15, got range 0..16'):
        gray4_to_rgb(np.array([0, 16]).reshape(1, 1, 2))


def test_downsample_constant():
    image = np.full((3, 4, 6), 77, dtype=np.uint8)

    small = downsample2x(image)

    assert small.shape == (3, 2, 3)
    assert np.all(small == 77)


def test_downsample_block_mean():
    image = np.array([[10, 20], [30, 40]], dtype=np.uint8)[None].repeat(3, axis=0)

    assert downsample2x(image)[:, 0, 0].tolist() == [25, 25, 25]


def test_downsample_rounds_half_up():
    checkerboard = np.array([[0, 255], [255, 0]], dtype=np.uint8)[None].repeat(3, axis=0)

    assert downsample2x(checkerboard)[:, 0, 0].tolist() == [128, 128, 128]

    # 1 + 1 + 1 + 2 = 5, mean 1.25
    image = np.array([[1, 1], [1, 2]], dtype=np.uint8)[None].repeat(3, axis=0)

    assert downsample2x(image)[0, 0, 0] == 1


@given(image=_images(even=True))
def test_downsample_bounds(image):
    small = downsample2x(image)

    blocks = image.astype(np.int64).reshape(3, image.shape[1] // 2, 2, image.shape[2] // 2, 2)

    assert small.shape == (3, image.shape[1] // 2, image.shape[2] // 2)
    assert np.all(small >= blocks.min(axis=(2, 4)))
    assert np.all(small <= blocks.max(axis=(2, 4)))
    assert np.all(np.abs(small - blocks.mean(axis=(2, 4))) <= 0.5)


def test_downsample_odd():
    with pytest.raises(DataError, match=r'Cannot downsample image with odd extent 3x4'):
        downsample2x(np.zeros((3, 3, 4), dtype=np.uint8))


def test_pyramid_resolutions():
    image = np.random.default_rng(0).integers(0, 256, size=(3, 128, 128), dtype=np.uint8)

    pyramid = build_pyramid(image, 5)

    assert [level.shape[-1] for level in pyramid] == [128, 64, 32, 16, 8]
    np.testing.assert_array_equal(pyramid[0], image)


def test_pyramid_single_level():
    image = np.zeros((3, 5, 7), dtype=np.uint8)

    pyramid = build_pyramid(image, 1)

    assert len(pyramid) == 1
    np.testing.assert_array_equal(pyramid[0], image)


def test_pyramid_constant():
    pyramid = build_pyramid(np.full((3, 8, 8), 200, dtype=np.uint8), 2)

    assert [level.shape for level in pyramid] == [(3, 8, 8), (3, 4, 4)]
    assert all(np.all(level == 200) for level in pyramid)


@given(image=_images(max_side=3, even=True).map(lambda image: np.tile(image, (1, 2, 2))))
def test_pyramid_suffix_consistency(image):
    """
    Every coarser level is the downsampling of the next finer one.
    """

    pyramid = build_pyramid(image, 3)

    for finer, coarser in zip(pyramid, pyramid[1:]):
        np.testing.assert_array_equal(downsample2x(finer), coarser)

    np.testing.assert_array_equal(build_pyramid(pyramid[1], 2)[1], pyramid[2])


def test_pyramid_errors():
    with pytest.raises(ConfigError, match=r'Pyramid needs at least one level, got 0'):
        build_pyramid(np.zeros((3, 8, 8), dtype=np.uint8), 0)

    with pytest.raises(DataError, match=r'Resolution 12x12 is not divisible by 8 as 4 pyramid levels require'):
        build_pyramid(np.zeros((3, 12, 12), dtype=np.uint8), 4)


def test_pyramid_batch():
    batch = np.zeros((2, 3, 8, 8), dtype=np.uint8)

    assert [level.shape for level in build_pyramid(batch, 3)] == [(2, 3, 8, 8), (2, 3, 4, 4), (2, 3, 2, 2)]


def test_pyramid_spec():
    spec = PyramidSpec(5, (128, 128))

    assert spec.resolutions == [(128, 128), (64, 64), (32, 32), (16, 16), (8, 8)]
    assert spec.base == (8, 8)
    assert repr(spec) == 'PyramidSpec(128x128 > 64x64 > 32x32 > 16x16 > 8x8)'

    assert PyramidSpec(1, (5, 3)).resolutions == [(5, 3)]


@pytest.mark.parametrize('levels, size, match', [
    (0, (8, 8), r'at least one level'),
    (3, (12, 6), r'Resolution 12x6 cannot be halved 2 times'),
    (5, (8, 8), r'Resolution 8x8 cannot be halved 4 times')
])
def test_pyramid_spec_errors(levels, size, match):
    with pytest.raises(ConfigError, match=match):
        PyramidSpec(levels, size)
