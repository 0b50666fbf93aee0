"""
Deterministic auxiliary views of an image: the 4-bit grayscale quantization and the x2 downsampling,
plus the recursive pyramid of downsampled views.

Images are ``uint8`` numpy arrays in channel-first layout - ``(3, H, W)`` for RGB, ``(1, H, W)`` for
4-bit grayscale - optionally with a leading batch axis. All arithmetic is done on integers, so results
are exact.
"""

import numpy as np

from .core import ConfigError, DataError

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import List, Tuple  # noqa


#: Luma weights of red, green and blue, in thousandths (ITU-R BT.601).
LUMA_WEIGHTS = (299, 587, 114)

GRAY_LEVELS = 16


def check_rgb(image):
    # type: (np.ndarray) -> np.ndarray
    """
    Validate an RGB image or batch of images, return it as ``uint8``.

    :raises DataError: when the channel axis is not 3 wide, an extent is zero, or values fall outside ``0..255``.
    """

    image = np.asarray(image)

    if image.ndim not in (3, 4) or image.shape[-3] != 3:
        raise DataError('Expected RGB image of shape ([N,] 3, H, W), got {}'.format(image.shape))

    if image.shape[-1] < 1 or image.shape[-2] < 1:
        raise DataError('Image extents must be at least 1, got {}x{}'.format(image.shape[-2], image.shape[-1]))

    if image.dtype != np.uint8:
        if image.size and (image.min() < 0 or image.max() > 255):
            raise DataError('RGB values must lie in 0..255, got range {}..{}'.format(image.min(), image.max()))

        image = image.astype(np.uint8)

    return image


def check_gray4(gray):
    # type: (np.ndarray) -> np.ndarray

    gray = np.asarray(gray)

    if gray.ndim not in (3, 4) or gray.shape[-3] != 1:
        raise DataError('Expected grayscale image of shape ([N,] 1, H, W), got {}'.format(gray.shape))

    if gray.size and (gray.min() < 0 or gray.max() > GRAY_LEVELS - 1):
        raise DataError('Grayscale levels must lie in 0..15, got range {}..{}'.format(gray.min(), gray.max()))

    return gray.astype(np.uint8)


def quantize_grayscale(image):
    # type: (np.ndarray) -> np.ndarray
    """
    4-bit grayscale view: ``floor(Y / 16)`` of the luma ``Y = 0.299 R + 0.587 G + 0.114 B``, at most 15.

    :param numpy.ndarray image: ``([N,] 3, H, W)`` RGB image.
    :returns: ``([N,] 1, H, W)`` levels ``0..15``.
    """

    image = check_rgb(image).astype(np.int64)

    luma = sum(
        weight * image[..., c:c + 1, :, :]
        for c, weight in enumerate(LUMA_WEIGHTS)
    )

    return np.minimum(luma // (16 * 1000), GRAY_LEVELS - 1).astype(np.uint8)


def gray4_to_rgb(gray):
    # type: (np.ndarray) -> np.ndarray
    """
    Expand 4-bit levels to 8-bit RGB, for viewing: level ``g`` becomes ``17 * g`` in every channel.
    """

    gray = check_gray4(gray).astype(np.int64)

    return np.repeat(gray * 17, 3, axis=-3).astype(np.uint8)


def quantize_gray8(gray):
    # type: (np.ndarray) -> np.ndarray
    """
    4-bit levels of an 8-bit grayscale image, ``([N,] 1, H, W)``. Same as :py:func:`quantize_grayscale` of
    the image with the gray value copied into all three channels.
    """

    gray = np.asarray(gray)

    if gray.ndim not in (3, 4) or gray.shape[-3] != 1:
        raise DataError('Expected grayscale image of shape ([N,] 1, H, W), got {}'.format(gray.shape))

    return (gray.astype(np.int64) // 16).astype(np.uint8)


def downsample2x(image):
    # type: (np.ndarray) -> np.ndarray
    """
    Halve resolution: every output value is the mean of its 2x2 block, ties rounding up.

    :raises DataError: when height or width is odd.
    """

    image = check_rgb(image)

    height, width = image.shape[-2:]

    if height % 2 or width % 2:
        raise DataError('Cannot downsample image with odd extent {}x{}'.format(height, width))

    blocks = image.astype(np.int64).reshape(image.shape[:-2] + (height // 2, 2, width // 2, 2))
    total = blocks.sum(axis=(-3, -1))

    return ((total + 2) // 4).astype(np.uint8)


def build_pyramid(image, levels):
    # type: (np.ndarray, int) -> List[np.ndarray]
    """
    ``levels`` views of the image, finest first; every level is the x2 downsampling of the previous one.

    :raises ConfigError: when ``levels < 1``.
    :raises DataError: when the resolution is not divisible by ``2 ** (levels - 1)``.
    """

    if levels < 1:
        raise ConfigError('Pyramid needs at least one level, got {}'.format(levels))

    image = check_rgb(image)

    height, width = image.shape[-2:]
    factor = 2 ** (levels - 1)

    if height % factor or width % factor:
        raise DataError('Resolution {}x{} is not divisible by {} as {} pyramid levels require'.format(
            height, width, factor, levels
        ))

    pyramid = [image]

    for _ in range(levels - 1):
        pyramid.append(downsample2x(pyramid[-1]))

    return pyramid


class PyramidSpec(object):
    """
    Resolutions of an image pyramid.

    :param int levels: number of levels, at least 1.
    :param tuple size: ``(height, width)`` of the finest level.
    :raises ConfigError: when the finest resolution cannot be halved ``levels - 1`` times.
    """

    def __init__(self, levels, size):
        # type: (int, Tuple[int, int]) -> None

        if levels < 1:
            raise ConfigError('Pyramid needs at least one level, got {}'.format(levels))

        factor = 2 ** (levels - 1)

        if size[0] % factor or size[1] % factor or min(size) < factor:
            raise ConfigError('Resolution {}x{} cannot be halved {} times'.format(size[0], size[1], levels - 1))

        self.levels = levels
        self.size = tuple(size)

    def __repr__(self):
        # type: () -> str

        return 'PyramidSpec({})'.format(' > '.join('{}x{}'.format(h, w) for h, w in self.resolutions))

    @property
    def resolutions(self):
        # type: () -> List[Tuple[int, int]]
        """
        ``(height, width)`` of every level, finest first.
        """

        return [
            (self.size[0] // 2 ** level, self.size[1] // 2 ** level)
            for level in range(self.levels)
        ]

    @property
    def base(self):
        # type: () -> Tuple[int, int]
        """
        Resolution of the coarsest level.
        """

        return self.resolutions[-1]
