"""
Composite models built from a :py:class:`pyrpix.config.RunConfig`.

Every model is a sequence of independent *factors*. A factor is one autoregressive net together with its
likelihood head and, when conditional, the embedding net of its auxiliary view. The likelihood of an image
is the product of the factor likelihoods, so each factor can be trained on its own.

* ``grayscale-aux`` - :py:class:`AuxModelPair`: factor ``aux`` models the 4-bit grayscale view, factor
  ``cond`` models the color image conditioned on it.
* ``pyramid`` - :py:class:`PyramidModel`: factor ``level{L-1}`` models the coarsest view unconditionally,
  every finer ``level{l}`` models its view conditioned on the x2 downsampled one.
* ``flat`` - :py:class:`FlatModel`: a single unconditional factor ``flat``.
"""

import collections
import functools
import hashlib

import numpy as np

from . import tensor as T
from .auxiliary import downsample2x, quantize_grayscale, GRAY_LEVELS
from .config import RunConfig, MODEL_FLAT, MODEL_GRAYSCALE_AUX, MODEL_PYRAMID
from .core import CheckpointError, ConfigError
from .likelihoods import make_head, Head
from .nn import normalize_input, AutoregressiveNet, EmbeddingNet, HEAD_CATEGORICAL16, HEAD_DMOL
from .tensor import Tensor

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Callable, Dict, List, Optional, Tuple  # noqa


ViewType = Callable[[np.ndarray], np.ndarray]


def factor_seed(seed, factor, purpose):
    # type: (int, str, str) -> int
    """
    Seed of a factor's own random stream, derived from the run seed, the factor name and the purpose
    (``init``, ``train``). Factors never share streams, whatever order or thread they run in.
    """

    digest = hashlib.sha256('{}:{}:{}'.format(seed, factor, purpose).encode('utf-8')).digest()

    return int.from_bytes(digest[:8], 'little')


def factor_rng(seed, factor, purpose):
    # type: (int, str, str) -> np.random.Generator

    return np.random.default_rng(factor_seed(seed, factor, purpose))


def identity_view(batch):
    # type: (np.ndarray) -> np.ndarray

    return batch


def downsampled_view(times, batch):
    # type: (int, np.ndarray) -> np.ndarray
    """
    ``batch`` downsampled ``times`` times.
    """

    for _ in range(times):
        batch = downsample2x(batch)

    return batch


class Factor(object):
    """
    One independently trained piece of a model.

    :param str name: factor name, e.g. ``aux``, ``cond`` or ``level0``.
    :param AutoregressiveNet net: the autoregressive net.
    :param Head head: likelihood head matching ``net``.
    :param callable target_view: maps an RGB batch to the values this factor models.
    :param EmbeddingNet embed_net: embedding net of the auxiliary view, conditional factors only.
    :param callable aux_view: maps an RGB batch to the auxiliary view, conditional factors only.
    :param int aux_levels: discrete values per channel of the auxiliary view.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, name, net, head, target_view, embed_net=None, aux_view=None, aux_levels=256):
        # type: (str, AutoregressiveNet, Head, ViewType, Optional[EmbeddingNet], Optional[ViewType], int) -> None

        self.name = name
        self.net = net
        self.head = head
        self.target_view = target_view
        self.embed_net = embed_net
        self.aux_view = aux_view
        self.aux_levels = aux_levels

    def __repr__(self):
        # type: () -> str

        return '<Factor {}{}>'.format(self.name, ' (conditional)' if self.conditional else '')

    @property
    def conditional(self):
        # type: () -> bool

        return self.embed_net is not None

    def parameters(self):
        # type: () -> collections.OrderedDict[str, Tensor]

        params = collections.OrderedDict(
            ('net.{}'.format(name), param) for name, param in self.net.parameters().items()
        )  # type: collections.OrderedDict[str, Tensor]

        if self.embed_net is not None:
            params.update(
                ('embed.{}'.format(name), param) for name, param in self.embed_net.parameters().items()
            )

        return params

    def views(self, batch):
        # type: (np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]
        """
        Split an RGB batch into the modeled view and the auxiliary view (``None`` for unconditional factors).
        """

        target = self.target_view(batch)

        if self.aux_view is None:
            return target, None

        return target, self.aux_view(batch)

    def embed(self, aux):
        # type: (Optional[np.ndarray]) -> Optional[Tensor]

        if self.embed_net is None or aux is None:
            return None

        return self.embed_net.embed(T.constant(normalize_input(aux, self.aux_levels)))

    def forward(self, target, aux=None, train=False, rng=None):
        # type: (np.ndarray, Optional[np.ndarray], bool, Optional[np.random.Generator]) -> Tensor
        """
        Head parameters of every pixel of ``target``.
        """

        return self.net.forward(
            T.constant(normalize_input(target, self.head.levels)),
            embedding=self.embed(aux),
            train=train,
            rng=rng
        )

    def log_prob(self, batch, train=False, rng=None):
        # type: (np.ndarray, bool, Optional[np.random.Generator]) -> Tensor
        """
        Per-pixel log-probabilities of this factor's view of an RGB batch, ``(N, h, w)``.
        """

        target, aux = self.views(batch)

        return self.head.log_prob(self.forward(target, aux, train=train, rng=rng), target)

    def nll(self, batch, train=False, rng=None):
        # type: (np.ndarray, bool, Optional[np.random.Generator]) -> Tensor
        """
        Negative log-likelihood of an RGB batch under this factor, in nats, ``float64`` scalar.
        """

        return T.neg(T.sum_all(self.log_prob(batch, train=train, rng=rng)))


class Model(object):
    """
    Base of composite models.

    :ivar RunConfig config: configuration the model was built from.
    :ivar collections.OrderedDict factors: factors by name, in sampling order.
    """

    kind = None  # type: Optional[str]

    def __init__(self, config, factors):
        # type: (RunConfig, List[Factor]) -> None

        self.config = config
        self.factors = collections.OrderedDict((factor.name, factor) for factor in factors)

    def __repr__(self):
        # type: () -> str

        return '<{} {}>'.format(self.__class__.__name__, ', '.join(self.factors))

    @property
    def initialized(self):
        # type: () -> bool

        return all(factor.net.initialized for factor in self.factors.values())

    def parameters(self):
        # type: () -> collections.OrderedDict[str, Tensor]

        return collections.OrderedDict(
            ('{}.{}'.format(factor.name, name), param)
            for factor in self.factors.values()
            for name, param in factor.parameters().items()
        )

    def state_dict(self):
        # type: () -> collections.OrderedDict[str, np.ndarray]

        return collections.OrderedDict((name, param.data) for name, param in self.parameters().items())

    def load_state_dict(self, state):
        # type: (Dict[str, np.ndarray]) -> None
        """
        Load parameters of all factors.

        :raises CheckpointError: when records do not match the architecture.
        """

        for factor in self.factors.values():
            prefix = '{}.'.format(factor.name)
            own = {name[len(prefix):]: value for name, value in state.items() if name.startswith(prefix)}

            self.load_factor_state(factor.name, own)

        known = set(self.parameters())
        unexpected = sorted(name for name in state if name not in known)

        if unexpected:
            raise CheckpointError('Unexpected parameter records: {}'.format(', '.join(unexpected)))

    def load_factor_state(self, name, state):
        # type: (str, Dict[str, np.ndarray]) -> None
        """
        Load parameters of one factor; names are relative to the factor, e.g. ``net.input.weight``.
        """

        if name not in self.factors:
            raise CheckpointError("Model has no factor '{}'".format(name))

        factor = self.factors[name]

        factor.net.load_state_dict({
            key[4:]: value for key, value in state.items() if key.startswith('net.')
        })

        if factor.embed_net is not None:
            factor.embed_net.load_state_dict({
                key[6:]: value for key, value in state.items() if key.startswith('embed.')
            })

        elif any(key.startswith('embed.') for key in state):
            raise CheckpointError("Unconditional factor '{}' has no embedding records".format(name))

    def objective(self, batch):
        # type: (np.ndarray) -> Tuple[float, collections.OrderedDict[str, float]]
        """
        Negative log-likelihood of an RGB batch, total and per factor, in nats. The total is the sum of
        the factor values in factor order.
        """

        with T.no_grad():
            per_factor = collections.OrderedDict(
                (name, factor.nll(batch).item()) for name, factor in self.factors.items()
            )  # type: collections.OrderedDict[str, float]

        total = 0.0

        for value in per_factor.values():
            total += value

        return total, per_factor


class AuxModelPair(Model):
    """
    4-bit grayscale auxiliary model plus the color model conditioned on it.
    """

    kind = MODEL_GRAYSCALE_AUX

    @property
    def aux_model(self):
        # type: () -> AutoregressiveNet

        return self.factors['aux'].net

    @property
    def cond_model(self):
        # type: () -> AutoregressiveNet

        return self.factors['cond'].net

    @property
    def embed_net(self):
        # type: () -> EmbeddingNet

        return cast(EmbeddingNet, self.factors['cond'].embed_net)


class PyramidModel(Model):
    """
    Multi-resolution model; factors are ordered coarsest first.
    """

    kind = MODEL_PYRAMID

    @property
    def levels(self):
        # type: () -> int

        return len(self.factors)

    def level(self, index):
        # type: (int) -> Factor
        """
        Factor of the given level, 0 being the finest.
        """

        return self.factors['level{}'.format(index)]


class FlatModel(Model):
    kind = MODEL_FLAT

    @property
    def net(self):
        # type: () -> AutoregressiveNet

        return self.factors['flat'].net


def _rgb_net(config, cond_channels, rng, blocks=None):
    # type: (RunConfig, int, Optional[np.random.Generator], Optional[int]) -> AutoregressiveNet

    return AutoregressiveNet(
        3, config.blocks if blocks is None else blocks, config.filters, HEAD_DMOL,
        mixtures=config.mixtures, kernel=config.kernel, cond_channels=cond_channels, dropout=config.dropout, rng=rng
    )


def _embed_net(config, in_channels, rng):
    # type: (RunConfig, int, Optional[np.random.Generator]) -> EmbeddingNet

    return EmbeddingNet(
        in_channels, config.embed_blocks, config.embed_filters, down=config.embed_down, up=config.embed_up,
        kernel=config.kernel, rng=rng
    )


def build_model(config, initialize=True):
    # type: (RunConfig, bool) -> Model
    """
    Build the model described by ``config``.

    :param bool initialize: draw initial weights from per-factor streams. When not set, all weights are zero
        and the model reports itself as not initialized until parameters are loaded.
    """

    def _rng(name):
        # type: (str) -> Optional[np.random.Generator]

        return factor_rng(config.seed, name, 'init') if initialize else None

    if config.model == MODEL_GRAYSCALE_AUX:
        rng = _rng('aux')
        aux = Factor(
            'aux',
            AutoregressiveNet(1, config.blocks, config.filters, HEAD_CATEGORICAL16, kernel=config.kernel,
                              dropout=config.dropout, rng=rng),
            make_head(HEAD_CATEGORICAL16),
            quantize_grayscale
        )

        rng = _rng('cond')
        cond = Factor(
            'cond',
            _rgb_net(config, config.embed_filters, rng),
            make_head(HEAD_DMOL, config.mixtures),
            identity_view,
            embed_net=_embed_net(config, 1, rng),
            aux_view=quantize_grayscale,
            aux_levels=GRAY_LEVELS
        )

        return AuxModelPair(config, [aux, cond])

    if config.model == MODEL_PYRAMID:
        levels = config.levels
        factors = []

        for level in reversed(range(levels)):
            name = 'level{}'.format(level)
            rng = _rng(name)

            if level == levels - 1:
                factors.append(Factor(
                    name, _rgb_net(config, 0, rng), make_head(HEAD_DMOL, config.mixtures),
                    functools.partial(downsampled_view, level)
                ))

                continue

            factors.append(Factor(
                name,
                _rgb_net(config, config.embed_filters, rng),
                make_head(HEAD_DMOL, config.mixtures),
                functools.partial(downsampled_view, level),
                embed_net=_embed_net(config, 3, rng),
                aux_view=functools.partial(downsampled_view, level + 1)
            ))

        return PyramidModel(config, factors)

    if config.model == MODEL_FLAT:
        return FlatModel(config, [
            Factor('flat', _rgb_net(config, 0, _rng('flat')), make_head(HEAD_DMOL, config.mixtures), identity_view)
        ])

    raise ConfigError("Unknown model kind '{}'".format(config.model))
