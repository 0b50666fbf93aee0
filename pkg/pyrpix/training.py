"""
Decomposed maximum-likelihood training.

The negative log-likelihood of a model is the sum of the negative log-likelihoods of its factors, and the
factors share no parameters - each one is trained on its own, by :py:func:`train_factor`, with its own random
stream. Factors may therefore run one after another or side by side on worker threads, with identical results.
"""

import contextlib
import math
import os

import numpy as np

from . import tensor as T
from .action import Action
from .checkpoint import save_checkpoint
from .config import RunConfig, TrainConfig
from .core import DataError
from .log import Logging, FactorAdapter, log_table
from .models import factor_rng, AuxModelPair, Factor, Model, PyramidModel
from .optim import Adam
from .utils import run_workers

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, Iterator, List, Optional, Tuple  # noqa
from .log import ContextAdapter  # noqa


LOSS_CSV_HEADER = 'step,nll_nats,bpd'


class LossRecord(object):
    # pylint: disable=too-few-public-methods
    """
    Training loss of one step: per-image negative log-likelihood of the batch, in nats and in bits per dimension.
    """

    def __init__(self, step, nll_nats, bpd):
        # type: (int, float, float) -> None

        self.step = step
        self.nll_nats = nll_nats
        self.bpd = bpd

    def __repr__(self):
        # type: () -> str

        return 'LossRecord(step={}, nll_nats={!r}, bpd={!r})'.format(self.step, self.nll_nats, self.bpd)


class TrainResult(object):
    # pylint: disable=too-few-public-methods
    """
    Outcome of training one factor.

    :ivar str factor: factor name.
    :ivar list losses: :py:class:`LossRecord` of every step.
    :ivar list validation: per-image validation NLL in nats after every epoch, when validation images were given.
    :ivar float best_validation: lowest of ``validation``, or ``None``.
    :ivar float lr: learning rate the next step would use.
    """

    def __init__(self, factor):
        # type: (str) -> None

        self.factor = factor
        self.losses = []  # type: List[LossRecord]
        self.validation = []  # type: List[float]
        self.best_validation = None  # type: Optional[float]
        self.lr = 0.0

    @property
    def initial(self):
        # type: () -> Optional[float]

        return self.losses[0].nll_nats if self.losses else None

    @property
    def final(self):
        # type: () -> Optional[float]

        return self.losses[-1].nll_nats if self.losses else None


def factor_dims(factor, batch):
    # type: (Factor, np.ndarray) -> int
    """
    Color dimensions of one image as modeled by ``factor``: ``3 * h * w`` at the factor's resolution.
    """

    target = factor.target_view(batch[:1])

    return 3 * int(target.shape[-2]) * int(target.shape[-1])


def format_loss_csv(losses):
    # type: (List[LossRecord]) -> str

    return LOSS_CSV_HEADER + '\n' + ''.join(
        '{},{!r},{!r}\n'.format(record.step, record.nll_nats, record.bpd) for record in losses
    )


def _flip(batch, rng):
    # type: (np.ndarray, np.random.Generator) -> np.ndarray

    flips = rng.random(batch.shape[0]) < 0.5

    if not np.any(flips):
        return batch

    batch = batch.copy()
    batch[flips] = batch[flips][..., ::-1]

    return batch


def _factor_state(factor):
    # type: (Factor) -> Dict[str, np.ndarray]

    return {
        '{}.{}'.format(factor.name, name): param.data
        for name, param in factor.parameters().items()
    }


def evaluate_factor(factor, images, batch_size=16):
    # type: (Factor, np.ndarray, int) -> float
    """
    Total negative log-likelihood of ``images`` under ``factor``, in nats, summed in ``float64``.
    """

    total = 0.0

    with T.no_grad():
        for start in range(0, images.shape[0], batch_size):
            total += factor.nll(images[start:start + batch_size]).item()

    return total


# pylint: disable=too-many-arguments,too-many-locals
@contextlib.contextmanager
def _detached(params):
    # type: (List[T.Tensor]) -> Iterator[None]
    """
    Within the block, ``params`` take no gradient. Gradients they held before are dropped.
    """

    for param in params:
        param.requires_grad = False
        param.zero_grad()

    try:
        yield

    finally:
        for param in params:
            param.requires_grad = True


def train_factor(factor, images, cfg, val_images=None, run_config=None, checkpoint_dir=None, frozen=None, logger=None):
    # type: (Factor, np.ndarray, TrainConfig, Optional[np.ndarray], Optional[RunConfig], Optional[str], Optional[List[str]], Optional[ContextAdapter]) -> TrainResult
    """
    Minimize the negative log-likelihood of ``images`` under ``factor`` with Adam.

    Runs ``cfg.epochs`` passes over the images, or ``cfg.steps`` steps when ``epochs`` is 0. An epoch is one
    shuffled pass; at its end the factor is evaluated on ``val_images`` and checkpointed, when asked to.

    :param numpy.ndarray images: ``(N, 3, H, W)`` RGB training images.
    :param list frozen: parameter name prefixes, relative to the factor (e.g. ``embed.``), excluded from
        optimization.
    :param str checkpoint_dir: where to write ``<factor>.last.ckpt`` every epoch and ``<factor>.best.ckpt``
        whenever validation improves. Needs ``run_config``.
    :raises DataError: when there are no training images.
    """

    logger = FactorAdapter(logger or Logging.get_logger(), factor.name)

    if images.shape[0] == 0:
        raise DataError("No training images for factor '{}'".format(factor.name))

    rng = factor_rng(cfg.seed, factor.name, 'train')

    frozen = frozen or []
    params = factor.parameters()

    trainable = {
        name: param for name, param in params.items()
        if not any(name.startswith(prefix) for prefix in frozen)
    }

    optimizer = Adam(trainable, lr=cfg.lr, lr_decay=cfg.lr_decay, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2,
                     eps=cfg.adam_eps)

    count = images.shape[0]
    steps_per_epoch = int(math.ceil(count / float(cfg.batch_size)))
    total_steps = cfg.epochs * steps_per_epoch if cfg.epochs else cfg.steps

    dims = factor_dims(factor, images)
    result = TrainResult(factor.name)

    logger.info('training {} parameters ({} frozen) for {} steps on {} images'.format(
        sum(param.size for param in trainable.values()), len(params) - len(trainable), total_steps, count
    ))

    order = np.arange(0)
    step = 0

    held = [param for name, param in params.items() if name not in trainable]

    with _detached(held), Action('train {}'.format(factor.name), logger=logger) as action:
        while step < total_steps:
            position = step % steps_per_epoch

            if position == 0:
                order = rng.permutation(count)

            batch = images[order[position * cfg.batch_size:(position + 1) * cfg.batch_size]]

            if cfg.flip:
                batch = _flip(batch, rng)

            optimizer.zero_grad()

            with T.Tape():
                loss = factor.nll(batch, train=True, rng=rng)
                T.backward(T.mul(loss, 1.0 / batch.shape[0]))

            optimizer.step()

            nll = loss.item() / batch.shape[0]
            result.losses.append(LossRecord(step, nll, nll / (dims * math.log(2))))

            logger.verbose('step {}: nll {:.6f} nats'.format(step, nll))

            step += 1

            if step % steps_per_epoch == 0 or step == total_steps:
                _end_epoch(factor, result, step // steps_per_epoch, val_images, cfg, run_config, checkpoint_dir,
                           logger)

    result.lr = optimizer.lr

    logger.info('trained in {:.1f} seconds, nll {} -> {} nats per image'.format(
        action.duration,
        '{:.4f}'.format(result.initial) if result.initial is not None else 'n/a',
        '{:.4f}'.format(result.final) if result.final is not None else 'n/a'
    ))

    return result


def _end_epoch(factor, result, epoch, val_images, cfg, run_config, checkpoint_dir, logger):
    # type: (Factor, TrainResult, int, Optional[np.ndarray], TrainConfig, Optional[RunConfig], Optional[str], ContextAdapter) -> None

    # pylint: disable=too-many-arguments
    improved = False

    if val_images is not None and val_images.shape[0]:
        value = evaluate_factor(factor, val_images, cfg.batch_size) / val_images.shape[0]
        result.validation.append(value)

        if result.best_validation is None or value < result.best_validation:
            result.best_validation = value
            improved = True

        logger.info('epoch {}: validation nll {:.4f} nats per image{}'.format(
            epoch, value, ' (best)' if improved else ''
        ))

    if checkpoint_dir is None or run_config is None:
        return

    state = _factor_state(factor)

    save_checkpoint(os.path.join(checkpoint_dir, '{}.last.ckpt'.format(factor.name)), run_config, state,
                    logger=logger)

    if improved:
        save_checkpoint(os.path.join(checkpoint_dir, '{}.best.ckpt'.format(factor.name)), run_config, state,
                        logger=logger)


def train_aux(pair, images, cfg, **kwargs):
    # type: (AuxModelPair, np.ndarray, TrainConfig, **Any) -> TrainResult
    """
    Train the grayscale factor of a pair on the grayscale views of ``images``.
    """

    return train_factor(pair.factors['aux'], images, cfg, **kwargs)


def train_cond(pair, images, cfg, **kwargs):
    # type: (AuxModelPair, np.ndarray, TrainConfig, **Any) -> TrainResult
    """
    Train the color factor and its embedding net on ``images`` conditioned on their grayscale views.
    """

    return train_factor(pair.factors['cond'], images, cfg, **kwargs)


def train_pyramid(model, images, cfg, parallel=False, **kwargs):
    # type: (PyramidModel, np.ndarray, TrainConfig, bool, **Any) -> Dict[str, TrainResult]
    """
    Train every level of a pyramid: the coarsest unconditionally, every finer one conditioned on its
    downsampled view.
    """

    return train_model(model, images, cfg, parallel=parallel, **kwargs)


def train_model(model, images, cfg, parallel=False, logger=None, **kwargs):
    # type: (Model, np.ndarray, TrainConfig, bool, Optional[ContextAdapter], **Any) -> Dict[str, TrainResult]
    """
    Train all factors of a model, sequentially or each on its own worker thread.

    :returns: results by factor name, in factor order.
    """

    logger = logger or Logging.get_logger()

    if parallel and len(model.factors) > 1:
        results = run_workers(logger, [
            (name, _train_factor_job(factor, images, cfg, logger, kwargs), ()) for name, factor in model.factors.items()
        ])

    else:
        results = [
            train_factor(factor, images, cfg, logger=logger, **kwargs) for factor in model.factors.values()
        ]

    by_factor = {result.factor: result for result in results}

    log_table(logger.info, 'training summary', [
        [
            name,
            len(by_factor[name].losses),
            by_factor[name].initial,
            by_factor[name].final,
            by_factor[name].best_validation
        ]
        for name in model.factors
    ], headers=['factor', 'steps', 'initial nll', 'final nll', 'best validation'])

    return {name: by_factor[name] for name in model.factors}


def _train_factor_job(factor, images, cfg, logger, kwargs):
    # type: (Factor, np.ndarray, TrainConfig, ContextAdapter, Dict[str, Any]) -> Any

    def _job():
        # type: () -> TrainResult

        return train_factor(factor, images, cfg, logger=logger, **kwargs)

    return _job
