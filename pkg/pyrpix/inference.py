"""
Inference path used for sampling.

Sampling needs the head parameters of one position at a time. They can be obtained by evaluating the whole
net on the partially generated image, or incrementally through an :py:class:`ActivationCache` which keeps,
for every layer, the few most recent rows of its input and computes just one new position per layer and step.

Both routes use the same convolution kernel, :py:meth:`ExactConv.compute`: every output element is accumulated
tap by tap and input channel by input channel, with separate multiply and add steps, and the bias is added
last. The value of an element does not depend on how many positions are computed together, so the two routes
give bit-identical parameters.

Arrays are channels-last here, ``(H, W, C)`` images and ``(positions, C)`` activations.
"""

import numpy as np

from . import tensor as T
from .core import CacheDesyncError, ShapeError
from .nn import normalize_input, AutoregressiveNet, Conv2d, MaskedConv2d

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, List, Optional, Sequence, Tuple  # noqa
from .models import Factor  # noqa


class ExactConv(object):
    """
    Channels-last view of a stride-1 convolution keeping only the taps its mask leaves active.

    :ivar list offsets: ``(row, column)`` offsets of active taps relative to the output position, raster order.
    :ivar numpy.ndarray weights: ``(taps, in_channels, out_channels)`` effective weights.
    :ivar int reach: how many rows above, and columns on each side, the taps may reach.
    """

    def __init__(self, conv):
        # type: (Conv2d) -> None

        if conv.stride != 1:
            raise ShapeError('Inference path supports stride 1 only, got {}'.format(conv.stride), axis='stride')

        with T.no_grad():
            weight = conv.effective_weight().data

        kernel = conv.kernel
        center = kernel // 2

        if isinstance(conv, MaskedConv2d):
            active = conv.mask[0, 0] != 0

        else:
            active = np.ones((kernel, kernel), dtype=bool)

        self.in_channels = conv.in_channels
        self.out_channels = conv.out_channels
        self.reach = center
        self.offsets = [
            (row - center, column - center)
            for row in range(kernel)
            for column in range(kernel)
            if active[row, column]
        ]

        self.weights = np.ascontiguousarray(
            np.stack([weight[:, :, row + center, column + center].T for row, column in self.offsets])
            if self.offsets else np.zeros((0, conv.in_channels, conv.out_channels), dtype=weight.dtype)
        )

        self.bias = conv.bias.data.copy() if conv.bias is not None else None
        self.dtype = weight.dtype

    def compute(self, patches):
        # type: (Sequence[np.ndarray]) -> np.ndarray
        """
        Outputs for a set of positions.

        :param list patches: one ``(positions, in_channels)`` array per active tap, in the order of ``offsets``.
        :returns: ``(positions, out_channels)`` array.
        """

        positions = patches[0].shape[0] if patches else 1
        out = np.zeros((positions, self.out_channels), dtype=self.dtype)

        for tap, patch in enumerate(patches):
            for channel in range(self.in_channels):
                out += patch[:, channel:channel + 1] * self.weights[tap, channel]

        if self.bias is not None:
            out += self.bias

        return out

    def full(self, x):
        # type: (np.ndarray) -> np.ndarray
        """
        Outputs at every position of a ``(H, W, in_channels)`` input, zero padded; ``(H * W, out_channels)``.
        """

        height, width = x.shape[:2]
        pad = self.reach

        padded = np.zeros((height + 2 * pad, width + 2 * pad, x.shape[2]), dtype=x.dtype)
        padded[pad:pad + height, pad:pad + width] = x

        patches = [
            np.ascontiguousarray(
                padded[pad + dr:pad + dr + height, pad + dc:pad + dc + width]
            ).reshape(height * width, x.shape[2])
            for dr, dc in self.offsets
        ]

        if not patches:
            out = self.compute([])

            return np.ascontiguousarray(np.repeat(out, height * width, axis=0))

        return self.compute(patches)

    def at(self, rows, row, column):
        # type: (RowBuffer, int, int) -> np.ndarray
        """
        Output at a single position, reading the input from a row buffer; ``(1, out_channels)``.
        """

        return self.compute([
            rows.get(row + dr, column + dc).reshape(1, self.in_channels)
            for dr, dc in self.offsets
        ])


class RowBuffer(object):
    """
    Rolling buffer of the most recent rows of a ``(H, W, C)`` activation, zero padded on the sides.
    Rows outside the image, or not written yet, read as zeros.
    """

    def __init__(self, rows, width, channels, pad, dtype):
        # type: (int, int, int, int, Any) -> None

        self.rows = max(rows, 1)
        self.pad = pad
        self.width = width
        self.data = np.zeros((self.rows, width + 2 * pad, channels), dtype=dtype)
        self.row_index = [-1] * self.rows

    def reset(self):
        # type: () -> None

        self.data[...] = 0
        self.row_index = [-1] * self.rows

    def begin_row(self, row):
        # type: (int) -> None

        slot = row % self.rows

        self.data[slot] = 0
        self.row_index[slot] = row

    def get(self, row, column):
        # type: (int, int) -> np.ndarray

        slot = row % self.rows

        if row < 0 or self.row_index[slot] != row:
            return np.zeros(self.data.shape[2], dtype=self.data.dtype)

        return self.data[slot, column + self.pad]

    def put(self, row, column, value):
        # type: (int, int, np.ndarray) -> None

        self.data[row % self.rows, column + self.pad] = value.reshape(-1)


def _gate(a, channels):
    # type: (np.ndarray, int) -> np.ndarray

    return cast(
        np.ndarray,
        np.tanh(np.ascontiguousarray(a[:, :channels])) * T.np_sigmoid(np.ascontiguousarray(a[:, channels:]))
    )


class InferenceNet(object):
    """
    Frozen copy of an autoregressive net, optionally with the per-block embedding biases of one auxiliary
    image already computed.

    :param AutoregressiveNet net: net to copy.
    :param int levels: discrete values per channel of the modeled image.
    :param numpy.ndarray embedding: ``(H, W, cond_channels)`` embedding, conditional nets only.
    """

    def __init__(self, net, levels, embedding=None):
        # type: (AutoregressiveNet, int, Optional[np.ndarray]) -> None

        self.levels = levels
        self.in_channels = net.in_channels
        self.filters = net.filters
        self.out_channels = net.out_channels

        self.input = ExactConv(net.input_conv)
        self.blocks = [(ExactConv(block.conv1), ExactConv(block.conv2)) for block in net.blocks]
        self.output = ExactConv(net.output_conv)

        self.biases = [None] * len(net.blocks)  # type: List[Optional[np.ndarray]]

        if embedding is not None:
            for i, block in enumerate(net.blocks):
                if block.proj is not None:
                    self.biases[i] = ExactConv(block.proj).full(embedding)

    @classmethod
    def from_factor(cls, factor, aux=None):
        # type: (Factor, Optional[np.ndarray]) -> InferenceNet
        """
        :param numpy.ndarray aux: ``(C, h, w)`` auxiliary image, conditional factors only.
        """

        embedding = None

        if factor.conditional and aux is not None:
            with T.no_grad():
                tensor = cast(T.Tensor, factor.embed(aux[None]))

            embedding = np.ascontiguousarray(tensor.data[0].transpose(1, 2, 0))

        return cls(factor.net, factor.head.levels, embedding=embedding)

    def _check_bias_extent(self, height, width):
        # type: (int, int) -> None

        for bias in self.biases:
            if bias is not None and bias.shape[0] != height * width:
                raise ShapeError('Embedding covers {} positions, image has {}x{}'.format(
                    bias.shape[0], height, width
                ), axis='height')

    def full(self, values):
        # type: (np.ndarray) -> np.ndarray
        """
        Head parameters of every position of a ``(H, W, C)`` image; ``(H, W, out_channels)``.
        """

        height, width = values.shape[:2]
        self._check_bias_extent(height, width)

        x = normalize_input(values, self.levels).astype(self.input.dtype)

        h = self.input.full(x)

        for (conv1, conv2), bias in zip(self.blocks, self.biases):
            a = conv1.full(h.reshape(height, width, -1))

            if bias is not None:
                a = a + bias

            gate = _gate(a, self.filters)

            h = h + conv2.full(gate.reshape(height, width, -1))

        params = self.output.full(np.tanh(h).reshape(height, width, -1))

        return params.reshape(height, width, -1)

    def cache(self, height, width):
        # type: (int, int) -> ActivationCache

        self._check_bias_extent(height, width)

        return ActivationCache(self, height, width)


class ActivationCache(object):
    """
    Incremental evaluation of an :py:class:`InferenceNet` in raster order.

    .. code-block:: python

       cache = inet.cache(height, width)
       params = cache.start()

       for position in range(height * width):
           pixel = draw(params)
           params = cache.step(position, pixel)

    Every layer input keeps ``kernel // 2 + 1`` rows. A step stores the pixel just generated and computes the
    next position through all layers - everything that position depends on is already known.
    """

    def __init__(self, inet, height, width):
        # type: (InferenceNet, int, int) -> None

        self.inet = inet
        self.height = height
        self.width = width

        dtype = inet.input.dtype

        def _buffer(conv, channels):
            # type: (ExactConv, int) -> RowBuffer

            return RowBuffer(conv.reach + 1, width, channels, conv.reach, dtype)

        self.x = _buffer(inet.input, inet.in_channels)

        # input of conv1 (the residual stream) and of conv2 (the gate) of every block
        self.h = [_buffer(conv1, inet.filters) for conv1, _ in inet.blocks]
        self.g = [_buffer(conv2, inet.filters) for _, conv2 in inet.blocks]

        self.position = -1

    def reset(self):
        # type: () -> None

        for buffer in [self.x] + self.h + self.g:
            buffer.reset()

        self.position = -1

    def _begin_row(self, row):
        # type: (int) -> None

        for buffer in [self.x] + self.h + self.g:
            buffer.begin_row(row)

    def _compute(self, position):
        # type: (int) -> np.ndarray

        row, column = divmod(position, self.width)
        inet = self.inet

        if column == 0:
            self._begin_row(row)

        h = inet.input.at(self.x, row, column)

        for i, ((conv1, conv2), bias) in enumerate(zip(inet.blocks, inet.biases)):
            self.h[i].put(row, column, h)

            a = conv1.at(self.h[i], row, column)

            if bias is not None:
                a = a + bias[position:position + 1]

            self.g[i].put(row, column, _gate(a, inet.filters))

            h = h + conv2.at(self.g[i], row, column)

        params = inet.output.compute([np.tanh(h)])

        self.position = position

        return params.reshape(-1)

    def start(self):
        # type: () -> np.ndarray
        """
        Reset, and return head parameters of the first position.
        """

        self.reset()

        return self._compute(0)

    def step(self, position, pixel):
        # type: (int, np.ndarray) -> Optional[np.ndarray]
        """
        Record the pixel generated at ``position`` and return head parameters of the next position,
        or ``None`` after the last one.

        :raises CacheDesyncError: when ``position`` is not the position the cache computed last.
        """

        if position != self.position:
            raise CacheDesyncError('Cache expects pixel of position {}, got position {}'.format(
                self.position, position
            ))

        row, column = divmod(position, self.width)

        self.x.put(row, column, normalize_input(np.asarray(pixel), self.inet.levels).astype(self.x.data.dtype))

        if position + 1 == self.height * self.width:
            self.position = self.height * self.width

            return None

        return self._compute(position + 1)


def incremental_forward(cache, position, pixel):
    # type: (ActivationCache, int, np.ndarray) -> Optional[np.ndarray]
    """
    Feed the pixel generated at ``position`` into ``cache``, return head parameters at the next position.
    """

    return cache.step(position, pixel)
