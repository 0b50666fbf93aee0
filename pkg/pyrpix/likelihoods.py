"""
Likelihood heads.

* :py:class:`DmolHead` - discretized mixture of logistics over 8-bit RGB pixels. ``K`` components, each a
  3-channel logistic whose green and blue means shift linearly with the earlier channels of the pixel.
  Parameters of one pixel occupy ``10 * K`` channels laid out as
  ``[logits K | means 3K | log-scales 3K | coefficients 3K]``, channel-major within the last three groups.
* :py:class:`Categorical16Head` - 16-way softmax over 4-bit grayscale values.

Heads compute log-probabilities on the tape for training, and sample single pixels with plain numpy
for generation.
"""

import collections

import numpy as np

from . import tensor as T
from .core import DataError, NumericError
from .tensor import Tensor

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Optional, Sequence, Tuple  # noqa


#: Floor of log-scales.
LOG_SCALE_FLOOR = -7.0

#: Half-width of a bin on the ``[-1, 1]`` grid of 256 values.
BIN_HALF_WIDTH = 1.0 / 255.0

#: Interior bins with less mass take it from the logistic density at their center instead. Far above
#: ``float32`` underflow of the tail difference.
BIN_PROB_FLOOR = 1e-30

#: ``log`` of the bin width on the ``[-1, 1]`` grid.
LOG_BIN_WIDTH = float(np.log(2.0 / 255.0))

#: Uniforms are kept away from 0 and 1 before the logistic inverse CDF.
UNIFORM_CLIP = 1e-5

MODE_ANCESTRAL = 'ancestral'
MODE_REDUCED = 'reduced'
MODE_MAP = 'map'

SAMPLE_MODES = (MODE_ANCESTRAL, MODE_REDUCED, MODE_MAP)


MixtureParams = collections.namedtuple('MixtureParams', ['logits', 'means', 'log_scales', 'coeffs'])
MixtureParams.__doc__ = """
Unpacked DMOL parameters. Either tensors of shape ``(N, K, H, W)`` / ``(N, 3, K, H, W)`` on the training
path, or arrays of shape ``(K,)`` / ``(3, K)`` for a single pixel. Log-scales are already clamped,
coefficients already squashed by ``tanh``.
"""

Categorical16Params = collections.namedtuple('Categorical16Params', ['logits'])


def _check_finite(params):
    # type: (Tensor) -> None

    if not np.all(np.isfinite(params.data)):
        raise NumericError('Likelihood parameters contain {} non-finite values'.format(
            int(np.sum(~np.isfinite(params.data)))
        ))


def _check_values(values, levels, channels):
    # type: (np.ndarray, int, int) -> np.ndarray

    values = np.asarray(values)

    if values.ndim != 4 or values.shape[1] != channels:
        raise DataError('Expected (N, {}, H, W) pixel values, got shape {}'.format(channels, values.shape))

    if values.size and (values.min() < 0 or values.max() > levels - 1):
        raise DataError('Pixel values must lie in 0..{}, got range {}..{}'.format(
            levels - 1, values.min(), values.max()
        ))

    return values


def split_mixture(params, mixtures):
    # type: (Tensor, int) -> MixtureParams
    """
    Unpack ``(N, 10K, H, W)`` head output into a :py:class:`MixtureParams` of tensors.
    """

    n, channels, h, w = params.shape
    k = mixtures

    if channels != 10 * k:
        raise NumericError('DMOL head with {} components needs {} channels, got {}'.format(k, 10 * k, channels))

    def _group(start):
        # type: (int) -> Tensor

        return T.reshape(T.slice_axis(params, 1, start, start + 3 * k), (n, 3, k, h, w))

    return MixtureParams(
        logits=T.slice_axis(params, 1, 0, k),
        means=_group(k),
        log_scales=T.clamp_min(_group(4 * k), LOG_SCALE_FLOOR),
        coeffs=T.tanh(_group(7 * k))
    )


def unpack_mixture(vector):
    # type: (np.ndarray) -> MixtureParams
    """
    Unpack the ``10K`` parameters of a single pixel.
    """

    vector = np.asarray(vector, dtype=np.float64)

    if vector.ndim != 1 or vector.shape[0] % 10:
        raise NumericError('DMOL pixel parameters must be a vector of 10K values, got shape {}'.format(vector.shape))

    k = vector.shape[0] // 10

    return MixtureParams(
        logits=vector[:k],
        means=vector[k:4 * k].reshape(3, k),
        log_scales=np.maximum(vector[4 * k:7 * k].reshape(3, k), LOG_SCALE_FLOOR),
        coeffs=np.tanh(vector[7 * k:].reshape(3, k))
    )


def _interior_log_probs(plus, minus, mid, log_scales, above):
    # type: (Tensor, Tensor, Tensor, Tensor, np.ndarray) -> Tensor
    """
    Log-mass of interior bins.

    Above the mean, the mass is taken as a difference of upper tails, ``sigmoid(-minus) - sigmoid(-plus)``,
    so that bins far in either tail keep their mass, and their gradient, in ``float32``. Bins lighter than
    :py:data:`BIN_PROB_FLOOR` use ``log(pdf(center) * width)``.
    """

    upper = T.where(above, T.neg(minus), plus)
    lower = T.where(above, T.neg(plus), minus)

    mass = T.sub(T.sigmoid(upper), T.sigmoid(lower))
    log_mass = T.log(T.clamp_min(mass, BIN_PROB_FLOOR))

    # log of the logistic density: mid - log_scale - 2 * softplus(mid)
    log_density = T.sub(T.sub(mid, log_scales), T.mul(T.softplus(mid), 2.0))

    return T.where(mass.data > BIN_PROB_FLOOR, log_mass, T.add(log_density, LOG_BIN_WIDTH))


def channel_log_probs(params, image, mixtures):
    # type: (Tensor, np.ndarray, int) -> Tensor
    """
    Bin log-probabilities of every channel under every component, ``(N, 3, K, H, W)``.

    Each channel is conditioned on the observed values of the earlier channels of its pixel. Bins have
    half-width ``1/255``; the bins of values 0 and 255 extend to minus and plus infinity.
    """

    mix = split_mixture(params, mixtures)
    n, _, k, h, w = mix.means.shape

    x = np.repeat(
        (np.asarray(image, dtype=params.dtype) / params.dtype.type(127.5) - params.dtype.type(1))[:, :, None],
        k,
        axis=2
    )

    def _channel(tensor, c):
        # type: (Tensor, int) -> Tensor

        return T.slice_axis(tensor, 1, c, c + 1)

    def _observed(c):
        # type: (int) -> Tensor

        return T.constant(np.ascontiguousarray(x[:, c:c + 1]))

    means = T.concat([
        _channel(mix.means, 0),
        T.add(_channel(mix.means, 1), T.mul(_channel(mix.coeffs, 0), _observed(0))),
        T.add(
            T.add(_channel(mix.means, 2), T.mul(_channel(mix.coeffs, 1), _observed(0))),
            T.mul(_channel(mix.coeffs, 2), _observed(1))
        )
    ], axis=1)

    centered = T.sub(T.constant(x), means)
    inv_scale = T.exp(T.neg(mix.log_scales))

    plus = T.mul(inv_scale, T.add(centered, BIN_HALF_WIDTH))
    minus = T.mul(inv_scale, T.sub(centered, BIN_HALF_WIDTH))

    interior = _interior_log_probs(plus, minus, T.mul(inv_scale, centered), mix.log_scales, centered.data > 0)
    lowest = T.sub(plus, T.softplus(plus))
    highest = T.neg(T.softplus(minus))

    values = np.repeat(np.asarray(image)[:, :, None], k, axis=2)

    return T.where(values == 0, lowest, T.where(values == 255, highest, interior))


def dmol_log_prob(params, image, mixtures):
    # type: (Tensor, np.ndarray, int) -> Tensor
    """
    Log-probability of every pixel, ``(N, H, W)``.

    :param Tensor params: ``(N, 10K, H, W)`` head output.
    :param numpy.ndarray image: ``(N, 3, H, W)`` values in ``0..255``.
    :raises NumericError: on non-finite parameters.
    :raises DataError: on values out of range.
    """

    _check_finite(params)
    image = _check_values(image, 256, 3)

    per_channel = channel_log_probs(params, image, mixtures)
    mix_logits = T.log_softmax(split_mixture(params, mixtures).logits, 1)

    return T.logsumexp(T.add(mix_logits, T.sum_axis(per_channel, 1)), 1)


def dmol_nll(params, image, mixtures):
    # type: (Tensor, np.ndarray, int) -> Tensor
    """
    Negative log-likelihood of the image batch in nats, summed over pixels and accumulated in ``float64``.
    """

    return T.neg(T.sum_all(dmol_log_prob(params, image, mixtures)))


def categorical16_log_prob(params, gray):
    # type: (Tensor, np.ndarray) -> Tensor
    """
    Log-probability of every pixel, ``(N, H, W)``.

    :param Tensor params: ``(N, 16, H, W)`` logits.
    :param numpy.ndarray gray: ``(N, 1, H, W)`` values in ``0..15``.
    """

    _check_finite(params)
    gray = _check_values(gray, 16, 1)

    if params.ndim != 4 or params.shape[1] != 16:
        raise NumericError('Categorical head needs 16 channels, got shape {}'.format(params.shape))

    one_hot = (gray == np.arange(16).reshape(1, 16, 1, 1)).astype(params.dtype)

    return T.sum_axis(T.mul(T.log_softmax(params, 1), T.constant(one_hot)), 1)


def categorical16_nll(params, gray):
    # type: (Tensor, np.ndarray) -> Tensor

    return T.neg(T.sum_all(categorical16_log_prob(params, gray)))


def logistic_bin_probs(mean, log_scale):
    # type: (float, float) -> np.ndarray
    """
    Probabilities of all 256 values under a single discretized logistic, in ``float64``.
    """

    grid = np.arange(256, dtype=np.float64) / 127.5 - 1.0
    inv_scale = np.exp(-max(log_scale, LOG_SCALE_FLOOR))

    cdf_plus = T.np_sigmoid(inv_scale * (grid + BIN_HALF_WIDTH - mean))
    cdf_minus = T.np_sigmoid(inv_scale * (grid - BIN_HALF_WIDTH - mean))

    cdf_plus[-1] = 1.0
    cdf_minus[0] = 0.0

    return cast(np.ndarray, cdf_plus - cdf_minus)


def draw_index(logits, uniform):
    # type: (np.ndarray, float) -> int
    """
    Inverse-CDF draw from ``softmax(logits)`` using a single uniform.
    """

    probs = np.exp(logits - np.max(logits))
    cdf = np.cumsum(probs)

    return int(min(np.searchsorted(cdf, uniform * cdf[-1], side='right'), len(cdf) - 1))


def discretize(value, levels=256):
    # type: (float, int) -> int
    """
    Nearest of ``levels`` grid points of ``[-1, 1]``, ties rounding up.
    """

    half = (levels - 1) / 2.0

    return int(np.clip(np.floor((value + 1.0) * half + 0.5), 0, levels - 1))


def dmol_sample(vector, mode, uniforms, lam=0.0):
    # type: (np.ndarray, str, Sequence[float], float) -> np.ndarray
    """
    Sample one RGB pixel.

    The component is drawn with ``uniforms[0]``. Every channel then either draws from its logistic with
    ``uniforms[1 + c]`` (``ancestral``, or ``reduced`` with log-scales lowered by ``lam``), or takes its mean
    (``map``). Green and blue means follow the already discretized earlier channels.

    :param numpy.ndarray vector: ``10K`` parameters of the pixel.
    :param str mode: ``ancestral``, ``reduced`` or ``map``.
    :param list uniforms: four numbers from ``[0, 1)``.
    :param float lam: variance reduction, used by ``reduced`` only.
    :returns: array of three ``uint8`` values.
    """

    if mode not in SAMPLE_MODES:
        raise NumericError("Unknown sampling mode '{}'".format(mode))

    if lam < 0:
        raise NumericError('Variance reduction must be non-negative, got {}'.format(lam))

    if not np.all(np.isfinite(vector)):
        raise NumericError('Pixel parameters contain non-finite values')

    mix = unpack_mixture(vector)
    k = draw_index(mix.logits, uniforms[0])

    pixel = np.zeros(3, dtype=np.uint8)
    observed = [0.0, 0.0]

    for c in range(3):
        mean = mix.means[c, k]

        if c == 1:
            mean += mix.coeffs[0, k] * observed[0]

        elif c == 2:
            mean += mix.coeffs[1, k] * observed[0] + mix.coeffs[2, k] * observed[1]

        if mode == MODE_MAP:
            value = mean

        else:
            log_scale = mix.log_scales[c, k] - (lam if mode == MODE_REDUCED else 0.0)
            u = float(np.clip(uniforms[1 + c], UNIFORM_CLIP, 1.0 - UNIFORM_CLIP))

            value = mean + np.exp(log_scale) * (np.log(u) - np.log(1.0 - u))

        pixel[c] = discretize(value)

        if c < 2:
            observed[c] = pixel[c] / 127.5 - 1.0

    return pixel


def categorical16_sample(vector, uniforms):
    # type: (np.ndarray, Sequence[float]) -> np.ndarray
    """
    Sample one 4-bit grayscale pixel by inverse CDF. Every sampling mode reduces to this.
    """

    vector = np.asarray(vector, dtype=np.float64)

    if vector.shape != (16,) or not np.all(np.isfinite(vector)):
        raise NumericError('Categorical pixel parameters must be 16 finite logits')

    return np.array([draw_index(vector, uniforms[0])], dtype=np.uint8)


class Head(object):
    """
    Likelihood head interface.

    :cvar str name: head name as used by :py:class:`pyrpix.nn.AutoregressiveNet`.
    :cvar int channels: channels of the modeled image.
    :cvar int levels: discrete values per channel.
    """

    name = None  # type: Optional[str]
    channels = 0
    levels = 0

    def log_prob(self, params, values):
        # type: (Tensor, np.ndarray) -> Tensor

        raise NotImplementedError()

    def nll(self, params, values):
        # type: (Tensor, np.ndarray) -> Tensor

        return T.neg(T.sum_all(self.log_prob(params, values)))

    def sample(self, vector, mode, uniforms, lam=0.0):
        # type: (np.ndarray, str, Sequence[float], float) -> np.ndarray

        raise NotImplementedError()


class DmolHead(Head):
    name = 'dmol'
    channels = 3
    levels = 256

    def __init__(self, mixtures=10):
        # type: (int) -> None

        self.mixtures = mixtures

    def log_prob(self, params, values):
        # type: (Tensor, np.ndarray) -> Tensor

        return dmol_log_prob(params, values, self.mixtures)

    def sample(self, vector, mode, uniforms, lam=0.0):
        # type: (np.ndarray, str, Sequence[float], float) -> np.ndarray

        return dmol_sample(vector, mode, uniforms, lam=lam)


class Categorical16Head(Head):
    name = 'categorical16'
    channels = 1
    levels = 16

    def log_prob(self, params, values):
        # type: (Tensor, np.ndarray) -> Tensor

        return categorical16_log_prob(params, values)

    def sample(self, vector, mode, uniforms, lam=0.0):
        # type: (np.ndarray, str, Sequence[float], float) -> np.ndarray

        return categorical16_sample(vector, uniforms)


def make_head(name, mixtures=10):
    # type: (str, int) -> Head

    if name == DmolHead.name:
        return DmolHead(mixtures)

    if name == Categorical16Head.name:
        return Categorical16Head()

    raise NumericError("Unknown likelihood head '{}'".format(name))
