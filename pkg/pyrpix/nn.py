"""
Convolutional networks of the models: masked autoregressive nets producing per-pixel likelihood
parameters, and the unmasked embedding net which turns an auxiliary image into a feature map biasing
every residual block of a conditional net.

All networks work on NCHW tensors with values normalized to ``[-1, 1]``, see :py:func:`normalize_input`.
"""

import collections

import numpy as np

from . import tensor as T
from .core import CheckpointError, ConfigError, ShapeError, TensorError
from .tensor import Tensor

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, Iterator, List, Optional, Sequence, Tuple  # noqa


#: Standard deviation of the Gaussian weight initialization. Biases start at zero.
INIT_STD = 0.05

#: Supported likelihood heads, and the number of output channels per mixture component or per pixel.
HEAD_DMOL = 'dmol'
HEAD_CATEGORICAL16 = 'categorical16'

MASK_A = 'A'
MASK_B = 'B'


def normalize_input(values, levels):
    # type: (np.ndarray, int) -> np.ndarray
    """
    Map discrete values ``0 .. levels - 1`` onto ``[-1, 1]``: ``x / 127.5 - 1`` for 8-bit channels,
    ``g / 7.5 - 1`` for 4-bit grayscale.
    """

    dtype = T.default_dtype()

    return np.asarray(values, dtype=dtype) / dtype.type((levels - 1) / 2.0) - dtype.type(1)


def head_channels(head, mixtures):
    # type: (str, int) -> int

    if head == HEAD_DMOL:
        return 10 * mixtures

    if head == HEAD_CATEGORICAL16:
        return 16

    raise ConfigError("Unknown likelihood head '{}'".format(head))


def make_mask(kind, out_channels, in_channels, kernel):
    # type: (str, int, int, int) -> np.ndarray
    """
    Binary OIKK mask of a raster-order masked convolution.

    Mask ``A`` keeps only taps strictly before the center, mask ``B`` keeps the center as well.
    Masking is spatial - all channels of a pixel share its fate.
    """

    if kind not in (MASK_A, MASK_B):
        raise ConfigError("Unknown mask kind '{}'".format(kind))

    center = kernel // 2

    spatial = np.zeros((kernel, kernel), dtype=T.default_dtype())
    spatial[:center, :] = 1
    spatial[center, :center] = 1

    if kind == MASK_B:
        spatial[center, center] = 1

    return np.ascontiguousarray(np.broadcast_to(spatial, (out_channels, in_channels, kernel, kernel)))


class Layer(object):
    """
    Something owning named parameters. Children are registered in ``_children`` and their parameters
    appear under ``<child name>.<parameter name>``.
    """

    def __init__(self):
        # type: () -> None

        self._own = collections.OrderedDict()  # type: collections.OrderedDict[str, Tensor]
        self._children = collections.OrderedDict()  # type: collections.OrderedDict[str, Layer]

    def add_parameter(self, name, data):
        # type: (str, np.ndarray) -> Tensor

        param = T.parameter(data, name=name)
        self._own[name] = param

        return param

    def add_child(self, name, child):
        # type: (str, Layer) -> Layer

        self._children[name] = child

        return child

    def parameters(self):
        # type: () -> collections.OrderedDict[str, Tensor]
        """
        All parameters, recursively, in registration order.
        """

        params = collections.OrderedDict(self._own)  # type: collections.OrderedDict[str, Tensor]

        for child_name, child in self._children.items():
            for name, param in child.parameters().items():
                params['{}.{}'.format(child_name, name)] = param

        return params

    def zero_grad(self):
        # type: () -> None

        for param in self.parameters().values():
            param.zero_grad()

    def state_dict(self):
        # type: () -> collections.OrderedDict[str, np.ndarray]

        return collections.OrderedDict(
            (name, param.data) for name, param in self.parameters().items()
        )

    def load_state_dict(self, state):
        # type: (Dict[str, np.ndarray]) -> None
        """
        Replace parameter values. Names and shapes must match exactly.

        :raises CheckpointError: on missing, unexpected or misshapen records.
        """

        params = self.parameters()

        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))

        if missing or unexpected:
            raise CheckpointError('Parameter records do not match the architecture: missing {}, unexpected {}'.format(
                ', '.join(missing) or 'none', ', '.join(unexpected) or 'none'
            ))

        for name, param in params.items():
            value = np.asarray(state[name])

            if value.shape != param.shape:
                raise CheckpointError("Parameter '{}' has shape {}, architecture expects {}".format(
                    name, value.shape, param.shape
                ))

            param.data = np.ascontiguousarray(value, dtype=param.dtype)


class Conv2d(Layer):
    """
    Plain convolution with ``same`` padding (for odd kernels) unless told otherwise.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, in_channels, out_channels, kernel, rng=None, stride=1, pad=None, bias=True):
        # type: (int, int, int, Optional[np.random.Generator], int, Optional[int], bool) -> None

        super(Conv2d, self).__init__()

        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.pad = kernel // 2 if pad is None else pad

        shape = (out_channels, in_channels, kernel, kernel)

        self.weight = self.add_parameter(
            'weight',
            rng.normal(0.0, INIT_STD, size=shape) if rng is not None else np.zeros(shape)
        )

        self.bias = self.add_parameter('bias', np.zeros(out_channels)) if bias else None

    def effective_weight(self):
        # type: () -> Tensor

        return self.weight

    def forward(self, x):
        # type: (Tensor) -> Tensor

        return T.conv2d(x, self.effective_weight(), self.bias, stride=self.stride, pad=self.pad)


class MaskedConv2d(Conv2d):
    """
    Convolution whose weight is multiplied by a raster-order mask at every forward call, so the mask
    holds no matter what an optimizer did to the raw weight.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, in_channels, out_channels, kernel, mask_kind, rng=None, bias=True):
        # type: (int, int, int, str, Optional[np.random.Generator], bool) -> None

        super(MaskedConv2d, self).__init__(in_channels, out_channels, kernel, rng=rng, bias=bias)

        self.mask_kind = mask_kind
        self.mask = make_mask(mask_kind, out_channels, in_channels, kernel)

    def effective_weight(self):
        # type: () -> Tensor

        return T.mul(self.weight, T.constant(self.mask))


class GatedResidualBlock(Layer):
    """
    ``h + conv2(dropout(tanh(a1) * sigmoid(a2)))`` where ``(a1, a2)`` are the halves of ``conv1(h)``,
    optionally biased by a 1x1 projection of the embedding before the gate.

    :param bool masked: use mask-B convolutions (autoregressive nets) or plain ones (embedding net).
    :param int cond_channels: channels of the embedding, 0 when the block is not conditioned.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, channels, kernel, masked, cond_channels=0, dropout=0.0, rng=None):
        # type: (int, int, bool, int, float, Optional[np.random.Generator]) -> None

        super(GatedResidualBlock, self).__init__()

        self.channels = channels
        self.dropout = dropout

        if masked:
            self.conv1 = self.add_child(
                'conv1', MaskedConv2d(channels, 2 * channels, kernel, MASK_B, rng=rng)
            )  # type: Conv2d
            self.conv2 = self.add_child(
                'conv2', MaskedConv2d(channels, channels, kernel, MASK_B, rng=rng)
            )  # type: Conv2d

        else:
            self.conv1 = cast(Conv2d, self.add_child('conv1', Conv2d(channels, 2 * channels, kernel, rng=rng)))
            self.conv2 = cast(Conv2d, self.add_child('conv2', Conv2d(channels, channels, kernel, rng=rng)))

        self.proj = None  # type: Optional[Conv2d]

        if cond_channels:
            self.proj = cast(Conv2d, self.add_child('proj', Conv2d(cond_channels, 2 * channels, 1, rng=rng, bias=False)))

    def forward(self, h, embedding=None, train=False, rng=None):
        # type: (Tensor, Optional[Tensor], bool, Optional[np.random.Generator]) -> Tensor

        a = self.conv1.forward(h)

        if self.proj is not None and embedding is not None:
            a = T.add(a, self.proj.forward(embedding))

        gate = T.mul(
            T.tanh(T.slice_axis(a, 1, 0, self.channels)),
            T.sigmoid(T.slice_axis(a, 1, self.channels, 2 * self.channels))
        )

        gate = T.dropout(gate, self.dropout, train, rng=rng)

        return T.add(h, self.conv2.forward(gate))


class AutoregressiveNet(Layer):
    """
    Masked-convolution network: mask-A input convolution, a stack of mask-B gated residual blocks,
    and a 1x1 head producing likelihood parameters for every pixel. Parameters at a raster position
    depend only on pixels strictly before it, and on the embedding, if any.

    :param int in_channels: 3 for RGB, 1 for grayscale.
    :param str head: ``dmol`` or ``categorical16``.
    :param int cond_channels: channels of the conditioning embedding, 0 for an unconditional net.
    :param numpy.random.Generator rng: initializes weights. When not set, the net is built with zero weights
        and flagged as not initialized, waiting for :py:meth:`load_state_dict`.
    """

    # pylint: disable=too-many-arguments,too-many-instance-attributes
    def __init__(self, in_channels, blocks, filters, head, mixtures=10, kernel=3, cond_channels=0, dropout=0.0,
                 rng=None):
        # type: (int, int, int, str, int, int, int, float, Optional[np.random.Generator]) -> None

        super(AutoregressiveNet, self).__init__()

        if kernel < 1 or kernel % 2 == 0:
            raise ConfigError('Kernel size must be odd and positive, got {}'.format(kernel))

        if blocks < 0 or filters < 1:
            raise ConfigError('Need non-negative block count and positive filter count, got {} and {}'.format(
                blocks, filters
            ))

        self.in_channels = in_channels
        self.n_blocks = blocks
        self.filters = filters
        self.head = head
        self.mixtures = mixtures
        self.kernel = kernel
        self.cond_channels = cond_channels
        self.dropout = dropout
        self.out_channels = head_channels(head, mixtures)

        self.input_conv = cast(MaskedConv2d, self.add_child(
            'input', MaskedConv2d(in_channels, filters, kernel, MASK_A, rng=rng)
        ))

        self.blocks = [
            cast(GatedResidualBlock, self.add_child(
                'block{}'.format(i),
                GatedResidualBlock(filters, kernel, True, cond_channels=cond_channels, dropout=dropout, rng=rng)
            ))
            for i in range(blocks)
        ]

        self.output_conv = cast(Conv2d, self.add_child('output', Conv2d(filters, self.out_channels, 1, rng=rng)))

        self.initialized = rng is not None

    def load_state_dict(self, state):
        # type: (Dict[str, np.ndarray]) -> None

        super(AutoregressiveNet, self).load_state_dict(state)

        self.initialized = True

    def forward(self, image, embedding=None, train=False, rng=None):
        # type: (Tensor, Optional[Tensor], bool, Optional[np.random.Generator]) -> Tensor
        """
        Compute likelihood parameters of every pixel.

        :param Tensor image: ``(N, in_channels, H, W)`` normalized image.
        :param Tensor embedding: ``(N, cond_channels, H, W)`` feature map of the auxiliary view, or ``None``.
            A conditional net run without embedding behaves exactly like a zero embedding.
        :returns: ``(N, out_channels, H, W)`` parameter tensor.
        :raises ShapeError: when the image or the embedding does not fit the net.
        """

        if image.ndim != 4 or image.shape[1] != self.in_channels:
            raise ShapeError('Net expects {} input channels, got image of shape {}'.format(
                self.in_channels, image.shape
            ), axis='channels')

        if embedding is not None:
            if not self.cond_channels:
                raise TensorError('Unconditional net cannot take an embedding')

            if embedding.ndim != 4 or embedding.shape[1] != self.cond_channels:
                raise ShapeError('Net expects {} embedding channels, got {}'.format(
                    self.cond_channels, embedding.shape
                ), axis='channels')

            for axis, name in ((2, 'height'), (3, 'width')):
                if embedding.shape[axis] != image.shape[axis]:
                    raise ShapeError('Embedding {} {} does not match image {} {}'.format(
                        name, embedding.shape[axis], name, image.shape[axis]
                    ), axis=name)

        h = self.input_conv.forward(image)

        for block in self.blocks:
            h = block.forward(h, embedding=embedding, train=train, rng=rng)

        return self.output_conv.forward(T.tanh(h))


class EmbeddingNet(Layer):
    """
    Unmasked network ``f(aux)`` computing the conditioning feature map.

    A stride-2 convolution follows every block listed in ``down``, a nearest-neighbor x2 upsampling followed
    by a convolution follows every block listed in ``up``. Block indices are 1-based, the first block is 1.

    .. code-block:: python

       # 64x64 auxiliary image -> 128x128 embedding
       net = EmbeddingNet(3, blocks=15, filters=100, down=[3], up=[9, 12], rng=rng)
    """

    # pylint: disable=too-many-arguments
    def __init__(self, in_channels, blocks, filters, down=None, up=None, kernel=3, rng=None):
        # type: (int, int, int, Optional[Sequence[int]], Optional[Sequence[int]], int, Optional[np.random.Generator]) -> None

        super(EmbeddingNet, self).__init__()

        self.in_channels = in_channels
        self.n_blocks = blocks
        self.filters = filters
        self.down = sorted(down or [])
        self.up = sorted(up or [])

        for index in self.down + self.up:
            if not 1 <= index <= blocks:
                raise ConfigError('Resampling after block {} is out of range for {} embedding blocks'.format(
                    index, blocks
                ))

        if set(self.down) & set(self.up):
            raise ConfigError('Block cannot be followed by both downsampling and upsampling: {}'.format(
                ', '.join(str(index) for index in sorted(set(self.down) & set(self.up)))
            ))

        self.input_conv = cast(Conv2d, self.add_child('input', Conv2d(in_channels, filters, kernel, rng=rng)))

        self.blocks = []  # type: List[GatedResidualBlock]
        self.resample = {}  # type: Dict[int, Conv2d]

        for i in range(1, blocks + 1):
            self.blocks.append(cast(GatedResidualBlock, self.add_child(
                'block{}'.format(i - 1), GatedResidualBlock(filters, kernel, False, rng=rng)
            )))

            if i in self.down:
                self.resample[i] = cast(Conv2d, self.add_child(
                    'down{}'.format(i), Conv2d(filters, filters, kernel, rng=rng, stride=2)
                ))

            elif i in self.up:
                self.resample[i] = cast(Conv2d, self.add_child('up{}'.format(i), Conv2d(filters, filters, kernel, rng=rng)))

        self.output_conv = cast(Conv2d, self.add_child('output', Conv2d(filters, filters, 1, rng=rng)))

    @property
    def scale(self):
        # type: () -> float
        """
        Ratio of embedding extent to auxiliary extent.
        """

        return float(2 ** (len(self.up) - len(self.down)))

    def output_extent(self, height, width):
        # type: (int, int) -> Tuple[int, int]
        """
        Spatial extent of the embedding of an auxiliary image of the given extent.

        :raises ShapeError: when a downsampling step meets an odd extent.
        """

        for i in range(1, self.n_blocks + 1):
            if i in self.down:
                for extent, name in ((height, 'height'), (width, 'width')):
                    if extent % 2:
                        raise ShapeError('Cannot downsample odd {} {} after embedding block {}'.format(
                            name, extent, i
                        ), axis=name)

                height, width = height // 2, width // 2

            elif i in self.up:
                height, width = height * 2, width * 2

        return height, width

    def embed(self, aux):
        # type: (Tensor) -> Tensor
        """
        Compute the embedding of a normalized auxiliary image.

        :param Tensor aux: ``(N, in_channels, h, w)`` tensor.
        :returns: ``(N, filters, H, W)`` feature map, ``(H, W)`` as given by :py:meth:`output_extent`.
        """

        if aux.ndim != 4 or aux.shape[1] != self.in_channels:
            raise ShapeError('Embedding net expects {} input channels, got {}'.format(
                self.in_channels, aux.shape
            ), axis='channels')

        self.output_extent(aux.shape[2], aux.shape[3])

        h = self.input_conv.forward(aux)

        for i, block in enumerate(self.blocks, 1):
            h = block.forward(h)

            if i in self.down:
                h = self.resample[i].forward(h)

            elif i in self.up:
                h = self.resample[i].forward(T.nearest_upsample2x(h))

        return self.output_conv.forward(h)
