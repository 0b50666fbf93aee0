"""
Sampling: raster-order generation of every factor of a model.

Randomness comes from counter-based streams, one per pixel, keyed by ``(seed, image index, level, position)``.
A pixel consumes the same four uniforms whichever route computed its head parameters, and whichever thread
generated it - cached and naive sampling, and different sampling modes with the same seed, are coupled
by construction.
"""

import numpy as np

from .action import Action
from .auxiliary import check_gray4, check_rgb, downsample2x, quantize_grayscale
from .config import SampleConfig
from .core import NumericError, ShapeError
from .inference import InferenceNet
from .log import Logging, LevelAdapter
from .models import AuxModelPair, Factor, FlatModel, Model, PyramidModel

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, List, Optional, Tuple  # noqa
from .log import ContextAdapter  # noqa


#: Log-scale reductions of a variance sweep.
LAMBDA_SWEEP = tuple(round(0.1 * i, 1) for i in range(11))

#: Uniforms consumed by every pixel: component or category, then one per color channel.
UNIFORMS_PER_PIXEL = 4

#: Stream level of the grayscale auxiliary factor; the color factor uses level 0.
AUX_STREAM_LEVEL = 1


def pixel_uniforms(seed, image_index, level, position):
    # type: (int, int, int, int) -> np.ndarray
    """
    The four uniforms of one pixel, from its own Philox stream.
    """

    sequence = np.random.SeedSequence(seed, spawn_key=(image_index, level, position))

    return np.random.Generator(np.random.Philox(sequence)).random(UNIFORMS_PER_PIXEL)


def sample_factor(factor, height, width, cfg, aux=None, image_index=0, level=0, logger=None):
    # type: (Factor, int, int, SampleConfig, Optional[np.ndarray], int, int, Optional[ContextAdapter]) -> np.ndarray
    """
    Generate one image from a factor, pixel by pixel in raster order.

    :param numpy.ndarray aux: ``(C, h, w)`` auxiliary image of a conditional factor.
    :param int level: stream level, decorrelating factors of one model.
    :returns: ``(channels, height, width)`` ``uint8`` image.
    :raises NumericError: when the factor was never initialized nor loaded.
    """

    if not factor.net.initialized:
        raise NumericError("Factor '{}' is not initialized, load a checkpoint first".format(factor.name))

    if factor.conditional and aux is None:
        raise ShapeError("Conditional factor '{}' needs an auxiliary image".format(factor.name), axis='aux')

    logger = LevelAdapter(logger or Logging.get_logger(), level)

    head = factor.head
    inet = InferenceNet.from_factor(factor, aux=aux)

    values = np.zeros((height, width, head.channels), dtype=np.uint8)

    def _draw(position, params):
        # type: (int, np.ndarray) -> np.ndarray

        uniforms = pixel_uniforms(cfg.seed, image_index, level, position)

        return head.sample(params, cfg.mode, uniforms, lam=cfg.lam)

    with Action('sample {}'.format(factor.name), logger=logger, tags={'height': height, 'width': width}) as action:
        if cfg.use_cache:
            cache = inet.cache(height, width)
            params = cache.start()  # type: Optional[np.ndarray]

            for position in range(height * width):
                pixel = _draw(position, cast(np.ndarray, params))
                values[divmod(position, width)] = pixel

                params = cache.step(position, pixel)

        else:
            for position in range(height * width):
                row, column = divmod(position, width)

                values[row, column] = _draw(position, inet.full(values)[row, column])

    logger.verbose('sampled {}x{} pixels in {:.3f} seconds'.format(height, width, action.duration))

    return np.ascontiguousarray(values.transpose(2, 0, 1))


def sample_unconditional(factor, height, width, cfg, image_index=0, level=0, logger=None):
    # type: (Factor, int, int, SampleConfig, int, int, Optional[ContextAdapter]) -> np.ndarray

    if factor.conditional:
        raise ShapeError("Factor '{}' is conditional".format(factor.name), axis='aux')

    return sample_factor(factor, height, width, cfg, image_index=image_index, level=level, logger=logger)


def sample_conditional(pair, aux, cfg, image_index=0, logger=None):
    # type: (AuxModelPair, np.ndarray, SampleConfig, int, Optional[ContextAdapter]) -> np.ndarray
    """
    Sample a color image given its 4-bit grayscale view, e.g. to colorize a grayscale image.

    :param numpy.ndarray aux: ``(1, H, W)`` levels ``0..15`` at the pair's resolution.
    :raises ShapeError: when ``aux`` does not fit the pair.
    """

    aux = check_gray4(aux)
    size = pair.config.size

    if aux.ndim != 3 or aux.shape[1:] != (size, size):
        raise ShapeError('Auxiliary image of shape {} does not fit a {}x{} pair'.format(aux.shape, size, size),
                         axis='height')

    return sample_factor(pair.factors['cond'], size, size, cfg, aux=aux, image_index=image_index, level=0,
                         logger=logger)


def sample_pair(pair, cfg, image_index=0, logger=None):
    # type: (AuxModelPair, SampleConfig, int, Optional[ContextAdapter]) -> Tuple[np.ndarray, np.ndarray]
    """
    Sample the grayscale view first, then the color image conditioned on it.

    :returns: ``(image, aux)`` pair.
    """

    size = pair.config.size

    aux = sample_unconditional(pair.factors['aux'], size, size, cfg, image_index=image_index,
                               level=AUX_STREAM_LEVEL, logger=logger)

    return sample_conditional(pair, aux, cfg, image_index=image_index, logger=logger), aux


def sample_pyramid(model, cfg, coarse=None, image_index=0, logger=None):
    # type: (PyramidModel, SampleConfig, Optional[np.ndarray], int, Optional[ContextAdapter]) -> List[np.ndarray]
    """
    Sample the coarsest level, then every finer level conditioned on the previous one.

    :param numpy.ndarray coarse: when set, ``(3, h, w)`` image used as the coarsest level instead of sampling it.
    :returns: all levels, finest first.
    :raises ShapeError: when ``coarse`` does not match the coarsest resolution.
    """

    spec = model.config.pyramid_spec
    resolutions = spec.resolutions
    top = model.levels - 1

    if coarse is not None:
        coarse = check_rgb(coarse)

        if coarse.shape[1:] != resolutions[top]:
            raise ShapeError('Coarsest level must be {}x{}, got {}x{}'.format(
                resolutions[top][0], resolutions[top][1], coarse.shape[1], coarse.shape[2]
            ), axis='height')

        current = coarse

    else:
        current = sample_unconditional(model.level(top), resolutions[top][0], resolutions[top][1], cfg,
                                       image_index=image_index, level=top, logger=logger)

    levels = [current]

    for level in reversed(range(top)):
        height, width = resolutions[level]

        current = sample_factor(model.level(level), height, width, cfg, aux=current, image_index=image_index,
                                level=level, logger=logger)

        levels.append(current)

    return list(reversed(levels))


def sample_model(model, cfg, image_index=0, logger=None):
    # type: (Model, SampleConfig, int, Optional[ContextAdapter]) -> Dict[str, Any]
    """
    Sample one image from any model kind.

    :returns: dictionary with ``image`` and, depending on the model, ``aux`` or ``levels``.
    """

    if isinstance(model, AuxModelPair):
        image, aux = sample_pair(model, cfg, image_index=image_index, logger=logger)

        return {'image': image, 'aux': aux}

    if isinstance(model, PyramidModel):
        levels = sample_pyramid(model, cfg, image_index=image_index, logger=logger)

        return {'image': levels[0], 'levels': levels}

    if isinstance(model, FlatModel):
        size = model.config.size

        return {'image': sample_unconditional(model.factors['flat'], size, size, cfg, image_index=image_index,
                                              logger=logger)}

    raise NumericError('Cannot sample from {}'.format(model))


def gray_consistency(image, aux):
    # type: (np.ndarray, np.ndarray) -> float
    """
    Fraction of pixels of a color image whose 4-bit grayscale view equals ``aux``.
    """

    return float(np.mean(quantize_grayscale(image) == check_gray4(aux)))


def round_trip_deviation(levels, coarse):
    # type: (List[np.ndarray], np.ndarray) -> float
    """
    Mean absolute deviation between ``coarse`` and the finest level downsampled back to its resolution.
    """

    current = levels[0]

    while current.shape[1:] != coarse.shape[1:]:
        current = downsample2x(current)

    return float(np.mean(np.abs(current.astype(np.int64) - check_rgb(coarse).astype(np.int64))))
