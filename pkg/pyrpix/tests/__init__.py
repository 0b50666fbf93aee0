# pylint: disable=blacklisted-name

import numpy as np

from PIL import Image

from pyrpix import tensor as T
from pyrpix.config import RunConfig
from pyrpix.dataset import toy_dataset


__all__ = ['Bunch', 'CaplogWrapper', 'gradcheck', 'tiny_config', 'toy_images', 'write_png_file']


class Bunch(object):
    # pylint: disable=too-few-public-methods

    """
    Object-like access to a dictionary - useful for many mock objects.
    """

    def __init__(self, **kwargs):
        self.__dict__.update(kwargs)


class CaplogWrapper(object):
    """
    Thin wrapper around pytest's caplog plugin.
    """

    def __init__(self, caplog):
        self._caplog = caplog

    @property
    def records(self):
        return self._caplog.records

    def __repr__(self):
        return '\n'.join(["<Record: msg='{}'>".format(record.message) for record in self.records])

    def clear(self):
        """
        Clear list of captured records.
        """

        self._caplog.handler.records = []

    def match(self, matcher=any, **kwargs):
        def _cmp(record):
            return all(getattr(record, field) == value for field, value in kwargs.items())

        return matcher(_cmp(record) for record in self.records)


#: Small architecture shared by most tests - a handful of filters, one block everywhere.
TINY = {
    'size': 8,
    'blocks': 1,
    'filters': 4,
    'mixtures': 2,
    'embed_blocks': 1,
    'embed_filters': 4
}


def tiny_config(**values):
    """
    :py:class:`RunConfig` of a tiny model; ``values`` override the defaults. Pyramids get the single upsampling
    their embedding needs unless told otherwise.
    """

    merged = dict(TINY)

    if values.get('model') == 'pyramid':
        merged['embed_up'] = [1]

    merged.update(values)

    return RunConfig(**merged)


def toy_images(size=8, count=16, split=None):
    dataset = toy_dataset(size, count=count, seed=0)

    if split is not None:
        dataset = dataset.split(split)

    return dataset.images


def write_png_file(tmpdir, name, array, mode=None):
    """
    Write ``(H, W)`` or ``(H, W, C)`` array as an image file, return its path.
    """

    path = str(tmpdir.join(name))

    image = Image.fromarray(np.ascontiguousarray(array))

    if mode is not None:
        image = image.convert(mode)

    image.save(path, format='PNG')

    return path


def gradcheck(loss_fn, params, eps=1e-5, samples=None, seed=0):
    """
    Compare gradients computed by the tape with central finite differences.

    :param callable loss_fn: builds the scalar loss from ``params``.
    :param list params: tensors requiring gradient.
    :param int samples: check at most this many randomly chosen elements of every tensor.
    :returns: norm-wise relative error over all checked elements.
    """

    rng = np.random.default_rng(seed)

    for param in params:
        param.zero_grad()

    with T.Tape():
        T.backward(loss_fn())

    analytic, numeric = [], []

    for param in params:
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)

        if samples is None or param.size <= samples:
            indices = range(param.size)

        else:
            indices = rng.choice(param.size, samples, replace=False)

        for index in indices:
            position = np.unravel_index(int(index), param.shape)
            original = param.data[position]

            with T.no_grad():
                param.data[position] = original + eps
                plus = loss_fn().item()

                param.data[position] = original - eps
                minus = loss_fn().item()

            param.data[position] = original

            analytic.append(grad[position])
            numeric.append((plus - minus) / (2 * eps))

    analytic, numeric = np.asarray(analytic), np.asarray(numeric)

    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)

    return float(np.linalg.norm(analytic - numeric) / scale)
