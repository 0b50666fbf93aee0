"""
Checkpoint files.

Layout, all integers little-endian:

.. code-block:: none

   magic        8 bytes  "PYRPIX01"
   config       u32 length, UTF-8 canonical run configuration
   records      u32 count, then per record:
                  u16 length, UTF-8 name
                  u8  dtype tag (1 = float32, 2 = float64)
                  u8  rank
                  u32 extent, rank times
                  payload, little-endian, row-major
   crc          u32 CRC-32 of everything above

Records keep their order, so loading and saving again reproduces the file byte for byte.
"""

import collections
import io
import struct
import zlib

import numpy as np

from .config import RunConfig, ARCHITECTURE_KEYS
from .core import CheckpointError, ConfigError
from .log import Logging
from .models import build_model, Model
from .utils import write_atomically

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, List, Mapping, Optional, Tuple  # noqa
from .log import ContextAdapter  # noqa


MAGIC = b'PYRPIX01'

DTYPE_TAGS = collections.OrderedDict([
    (1, np.dtype('<f4')),
    (2, np.dtype('<f8'))
])


class Checkpoint(object):
    # pylint: disable=too-few-public-methods
    """
    Decoded checkpoint.

    :ivar str config_text: canonical run configuration the parameters were trained with.
    :ivar collections.OrderedDict params: arrays by parameter name, in file order.
    """

    def __init__(self, config_text, params):
        # type: (str, collections.OrderedDict[str, np.ndarray]) -> None

        self.config_text = config_text
        self.params = params

    @property
    def config(self):
        # type: () -> RunConfig

        return RunConfig.from_text(self.config_text)


def _dtype_tag(name, array):
    # type: (str, np.ndarray) -> int

    for tag, dtype in DTYPE_TAGS.items():
        if array.dtype == dtype or array.dtype == dtype.newbyteorder('='):
            return tag

    raise CheckpointError("Parameter '{}' has unsupported dtype {}".format(name, array.dtype))


def encode_checkpoint(config_text, params):
    # type: (str, Mapping[str, np.ndarray]) -> bytes

    stream = io.BytesIO()

    config_blob = config_text.encode('utf-8')

    stream.write(MAGIC)
    stream.write(struct.pack('<I', len(config_blob)))
    stream.write(config_blob)
    stream.write(struct.pack('<I', len(params)))

    for name, array in params.items():
        array = np.asarray(array)
        tag = _dtype_tag(name, array)

        name_blob = name.encode('utf-8')

        stream.write(struct.pack('<H', len(name_blob)))
        stream.write(name_blob)
        stream.write(struct.pack('<BB', tag, array.ndim))
        stream.write(struct.pack('<{}I'.format(array.ndim), *array.shape))
        stream.write(np.ascontiguousarray(array, dtype=DTYPE_TAGS[tag]).tobytes())

    payload = stream.getvalue()

    return payload + struct.pack('<I', zlib.crc32(payload) & 0xffffffff)


def decode_checkpoint(blob):
    # type: (bytes) -> Checkpoint
    """
    :raises CheckpointError: on bad magic, CRC mismatch, truncation or unknown dtype tags.
    """

    if len(blob) < len(MAGIC) + 12 or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError('Not a pyrpix checkpoint: bad magic')

    payload, crc = blob[:-4], struct.unpack('<I', blob[-4:])[0]

    if zlib.crc32(payload) & 0xffffffff != crc:
        raise CheckpointError('Checkpoint CRC mismatch, file is corrupted')

    offset = len(MAGIC)

    def _take(size):
        # type: (int) -> bytes

        nonlocal offset

        if offset + size > len(payload):
            raise CheckpointError('Checkpoint is truncated')

        chunk = payload[offset:offset + size]
        offset += size

        return chunk

    def _unpack(fmt):
        # type: (str) -> Tuple[Any, ...]

        return struct.unpack(fmt, _take(struct.calcsize(fmt)))

    config_length, = _unpack('<I')
    config_text = _take(config_length).decode('utf-8')

    count, = _unpack('<I')

    params = collections.OrderedDict()  # type: collections.OrderedDict[str, np.ndarray]

    for _ in range(count):
        name_length, = _unpack('<H')
        name = _take(name_length).decode('utf-8')

        tag, rank = _unpack('<BB')

        if tag not in DTYPE_TAGS:
            raise CheckpointError("Record '{}' has unknown dtype tag {}".format(name, tag))

        shape = _unpack('<{}I'.format(rank))
        dtype = DTYPE_TAGS[tag]

        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize

        params[name] = np.frombuffer(_take(size), dtype=dtype).reshape(shape).astype(dtype.newbyteorder('='))

    if offset != len(payload):
        raise CheckpointError('Checkpoint has {} trailing bytes'.format(len(payload) - offset))

    return Checkpoint(config_text, params)


def save_checkpoint(path, config, params, logger=None):
    # type: (str, RunConfig, Mapping[str, np.ndarray], Optional[ContextAdapter]) -> None

    logger = logger or Logging.get_logger()

    write_atomically(path, encode_checkpoint(config.to_text(), params))

    logger.debug("saved {} parameter records to '{}'".format(len(params), path))


def load_checkpoint(path):
    # type: (str) -> Checkpoint

    try:
        with open(path, 'rb') as f:
            blob = f.read()

    except (IOError, OSError) as exc:
        raise CheckpointError("Cannot read checkpoint '{}': {}".format(path, exc))

    try:
        return decode_checkpoint(blob)

    except CheckpointError as exc:
        raise CheckpointError("Checkpoint '{}': {}".format(path, exc.message))


def check_config_echo(checkpoint, config):
    # type: (Checkpoint, RunConfig) -> None
    """
    Make sure ``config`` describes the architecture the checkpoint was trained as. Training, sampling and dataset
    keys may differ.

    :raises CheckpointError: listing the keys whose values differ.
    """

    stored = checkpoint.config.as_dict()
    wanted = config.as_dict()

    stale = sorted(
        key for key in ARCHITECTURE_KEYS
        if stored[key] != wanted[key]
    )

    if stale:
        raise CheckpointError('Checkpoint was trained with a different configuration: {}'.format(', '.join(
            '{} ({} != {})'.format(key, stored[key], wanted[key]) for key in stale
        )))


def load_model(path, config=None, overrides=None):
    # type: (str, Optional[RunConfig], Optional[Dict[str, Any]]) -> Model
    """
    Rebuild a model from a checkpoint.

    :param RunConfig config: when set, must match the stored architecture, and it replaces the stored
        configuration.
    :param dict overrides: keys to change, e.g. ``{'mode': 'map'}``. Architecture keys cannot change.
    """

    checkpoint = load_checkpoint(path)

    if config is not None:
        check_config_echo(checkpoint, config)

    else:
        config = checkpoint.config

    if overrides:
        unknown = sorted(set(overrides) & set(ARCHITECTURE_KEYS))

        if unknown:
            raise ConfigError('Architecture of a trained model cannot be overridden: {}'.format(', '.join(unknown)))

        config = config.replace(**overrides)

    model = build_model(config, initialize=False)
    model.load_state_dict(checkpoint.params)

    return model


def load_factor(model, path):
    # type: (Model, str) -> None
    """
    Load the records of a single-factor checkpoint, e.g. ``aux.best.ckpt``, into ``model``.
    """

    checkpoint = load_checkpoint(path)
    check_config_echo(checkpoint, model.config)

    names = sorted(set(name.split('.', 1)[0] for name in checkpoint.params))

    for name in names:
        prefix = '{}.'.format(name)

        model.load_factor_state(name, {
            key[len(prefix):]: value for key, value in checkpoint.params.items() if key.startswith(prefix)
        })
