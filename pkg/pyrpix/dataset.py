"""
Images in and out: PNG decoding, dataset manifests, the procedural toy dataset, and PNG grids and panels.

A manifest lists one image per line, ``path<TAB>split``, ``split`` being ``train``, ``val`` or ``test``.
Relative paths are resolved against the directory of the manifest.
"""

import collections
import io
import os

import numpy as np

from PIL import Image

from .auxiliary import quantize_gray8, quantize_grayscale
from .core import ConfigError, DataError
from .log import Logging
from .utils import write_atomically

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, List, Optional, Sequence, Tuple  # noqa
from .log import ContextAdapter  # noqa


SPLITS = ('train', 'val', 'test')

MANIFEST_NAME = 'manifest.tsv'

PNG_SIGNATURE = b'\x89PNG\r\n\x1a\n'

#: Images of the toy dataset, and how they split.
TOY_COUNT = 16
TOY_SPLITS = (('train', 12), ('val', 2), ('test', 2))

# offset of the bit depth byte: signature, chunk length, b'IHDR', width, height
_IHDR_DEPTH_OFFSET = 8 + 4 + 4 + 4 + 4


class Dataset(object):
    """
    Images of uniform resolution, each tagged by its split.

    :ivar numpy.ndarray images: ``(N, C, H, W)`` ``uint8`` images.
    :ivar list splits: split of every image.
    :ivar list paths: source file of every image, if loaded from files.
    """

    def __init__(self, images, splits, paths=None):
        # type: (np.ndarray, List[str], Optional[List[str]]) -> None

        self.images = images
        self.splits = list(splits)
        self.paths = list(paths) if paths is not None else [None] * len(self.splits)

    def __len__(self):
        # type: () -> int

        return len(self.splits)

    def __repr__(self):
        # type: () -> str

        return '<Dataset {} images, {}>'.format(
            len(self), ', '.join('{}={}'.format(split, self.splits.count(split)) for split in SPLITS)
        )

    @property
    def resolution(self):
        # type: () -> Tuple[int, int]

        return int(self.images.shape[2]), int(self.images.shape[3])

    def split(self, name):
        # type: (str) -> Dataset

        indices = [i for i, split in enumerate(self.splits) if split == name]

        return Dataset(
            self.images[indices],
            [name] * len(indices),
            paths=[self.paths[i] for i in indices]
        )


def read_manifest(path):
    # type: (str) -> List[Tuple[str, str]]
    """
    :returns: ``(image path, split)`` pairs, in manifest order.
    :raises DataError: when the manifest cannot be read or a line is malformed.
    """

    try:
        with open(path, 'r') as f:
            lines = f.read().splitlines()

    except (IOError, OSError) as exc:
        raise DataError("Cannot read manifest '{}': {}".format(path, exc))

    base = os.path.dirname(os.path.abspath(path))
    entries = []

    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith('#'):
            continue

        fields = line.split('\t')

        if len(fields) != 2 or not fields[0]:
            raise DataError("Manifest '{}', line {}: expected 'path<TAB>split'".format(path, lineno))

        image_path, split = fields[0], fields[1].strip()

        if split not in SPLITS:
            raise DataError("Manifest '{}', line {}: unknown split '{}'".format(path, lineno, split))

        entries.append((os.path.join(base, image_path), split))

    return entries


def _check_depth(path, blob):
    # type: (str, bytes) -> None

    if not blob.startswith(PNG_SIGNATURE) or len(blob) <= _IHDR_DEPTH_OFFSET:
        return

    depth = blob[_IHDR_DEPTH_OFFSET]

    if depth > 8:
        raise DataError("Image '{}' has {}-bit depth, only 8-bit images are supported".format(path, depth))


def decode_image(path, channels=3):
    # type: (str, Optional[int]) -> np.ndarray
    """
    Decode an 8-bit image file into a ``(C, H, W)`` ``uint8`` array.

    :param int channels: 3 expands grayscale to RGB, 1 converts to grayscale, ``None`` keeps grayscale images
        single-channel and everything else RGB.
    :raises DataError: naming the file, when it cannot be read or decoded, or it has more than 8 bits per sample.
    """

    try:
        with open(path, 'rb') as f:
            blob = f.read()

    except (IOError, OSError) as exc:
        raise DataError("Cannot read image '{}': {}".format(path, exc))

    _check_depth(path, blob)

    try:
        image = Image.open(io.BytesIO(blob))
        image.load()

    except Exception as exc:  # pylint: disable=broad-except
        raise DataError("Cannot decode image '{}': {}".format(path, exc))

    if image.mode in ('I', 'I;16', 'I;16B', 'I;16L', 'F'):
        raise DataError("Image '{}' has mode {}, only 8-bit images are supported".format(path, image.mode))

    gray = image.mode in ('L', 'LA', '1')

    if channels == 1 or (channels is None and gray):
        return np.asarray(image.convert('L'), dtype=np.uint8)[None].copy()

    return np.ascontiguousarray(np.asarray(image.convert('RGB'), dtype=np.uint8).transpose(2, 0, 1))


def crop_image(image, margins):
    # type: (np.ndarray, Tuple[int, int, int, int]) -> np.ndarray
    """
    Cut ``left, right, top, bottom`` margins off a ``(C, H, W)`` image.

    :raises DataError: when nothing would remain.
    """

    left, right, top, bottom = margins
    height, width = image.shape[1:]

    if left + right >= width or top + bottom >= height:
        raise DataError('Crop margins {} leave nothing of a {}x{} image'.format(margins, height, width))

    return image[:, top:height - bottom, left:width - right]


def load_images(manifest, channels=3, crop=None, logger=None):
    # type: (str, Optional[int], Optional[Tuple[int, int, int, int]], Optional[ContextAdapter]) -> Dataset
    """
    Load every image listed by a manifest. Either all images load, or none does.

    :param tuple crop: margins applied to every image before the resolution check.
    :raises DataError: naming the offending file, when an image cannot be decoded or its resolution differs
        from the first one.
    """

    logger = logger or Logging.get_logger()

    entries = read_manifest(manifest)

    if not entries:
        raise DataError("Manifest '{}' lists no images".format(manifest))

    images = []  # type: List[np.ndarray]

    for path, _ in entries:
        image = decode_image(path, channels=channels)

        if crop:
            image = crop_image(image, crop)

        if images and image.shape != images[0].shape:
            raise DataError("Image '{}' has shape {}, expected {} like '{}'".format(
                path, image.shape, images[0].shape, entries[0][0]
            ))

        images.append(image)

    dataset = Dataset(np.stack(images), [split for _, split in entries], paths=[path for path, _ in entries])

    logger.info("loaded {} images of {}x{} from '{}'".format(len(dataset), dataset.resolution[0],
                                                           dataset.resolution[1], manifest))

    return dataset


def load_aux_image(path):
    # type: (str) -> np.ndarray
    """
    Load an image as 4-bit grayscale levels, ``(1, H, W)``. Grayscale files are quantized directly, color files
    through their luma.
    """

    image = decode_image(path, channels=None)

    if image.shape[0] == 1:
        return quantize_gray8(image)

    return quantize_grayscale(image)


def _toy_image(size, rng):
    # type: (int, np.random.Generator) -> np.ndarray

    image = np.empty((3, size, size), dtype=np.uint8)
    image[...] = rng.integers(0, 256, size=3, dtype=np.uint8)[:, None, None]

    rows, columns = np.mgrid[0:size, 0:size]

    for _ in range(int(rng.integers(1, 3))):
        color = rng.integers(0, 256, size=3, dtype=np.uint8)[:, None]
        extent = int(rng.integers(max(size // 4, 1), max(size // 2, 1) + 1))
        top, left = (int(value) for value in rng.integers(0, size - extent + 1, size=2))

        if rng.random() < 0.5:
            shape = (rows >= top) & (rows < top + extent) & (columns >= left) & (columns < left + extent)

        else:
            radius = extent / 2.0
            shape = (rows + 0.5 - top - radius) ** 2 + (columns + 0.5 - left - radius) ** 2 <= radius ** 2

        image[:, shape] = color

    return image


def toy_dataset(size, count=TOY_COUNT, seed=0):
    # type: (int, int, int) -> Dataset
    """
    Procedural dataset of colored squares and discs on plain backgrounds. The first 12 of every 16 images
    are training images, then 2 validation and 2 test images.
    """

    if size < 1 or count < 1:
        raise ConfigError('Toy dataset needs positive size and count, got {} and {}'.format(size, count))

    rng = np.random.default_rng(seed)

    splits = []  # type: List[str]

    while len(splits) < count:
        for split, number in TOY_SPLITS:
            splits.extend([split] * number)

    return Dataset(np.stack([_toy_image(size, rng) for _ in range(count)]), splits[:count])


def encode_png(image):
    # type: (np.ndarray) -> bytes
    """
    Encode a ``(C, H, W)`` ``uint8`` image, ``C`` being 1 or 3.
    """

    image = np.asarray(image, dtype=np.uint8)

    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise DataError('Cannot encode image of shape {}'.format(image.shape))

    if image.shape[0] == 1:
        pil_image = Image.fromarray(np.ascontiguousarray(image[0]))

    else:
        pil_image = Image.fromarray(np.ascontiguousarray(image.transpose(1, 2, 0)))

    stream = io.BytesIO()
    pil_image.save(stream, format='PNG')

    return stream.getvalue()


def write_png(path, image):
    # type: (str, np.ndarray) -> None

    write_atomically(path, encode_png(image))


def write_toy(directory, size, count=TOY_COUNT, seed=0):
    # type: (str, int, int, int) -> str
    """
    Write the toy dataset as PNG files plus a manifest.

    :returns: path of the manifest.
    """

    dataset = toy_dataset(size, count=count, seed=seed)
    lines = []

    for index, (image, split) in enumerate(zip(dataset.images, dataset.splits)):
        name = 'toy-{:02d}.png'.format(index)

        write_png(os.path.join(directory, name), image)
        lines.append('{}\t{}\n'.format(name, split))

    manifest = os.path.join(directory, MANIFEST_NAME)
    write_atomically(manifest, ''.join(lines))

    return manifest


def parse_grid(text):
    # type: (str) -> Tuple[int, int]
    """
    Parse ``RxC`` grid shape, e.g. ``4x4``.
    """

    try:
        rows, columns = (int(value) for value in text.lower().split('x'))

    except ValueError:
        raise ConfigError("Grid must be given as ROWSxCOLUMNS, e.g. 4x4, got '{}'".format(text))

    if rows < 1 or columns < 1:
        raise ConfigError("Grid must have at least one row and one column, got '{}'".format(text))

    return rows, columns


def _as_rgb(image):
    # type: (np.ndarray) -> np.ndarray

    return np.repeat(image, 3, axis=0) if image.shape[0] == 1 else image


def make_grid(images, rows, columns, pad=1):
    # type: (Sequence[np.ndarray], int, int, int) -> np.ndarray
    """
    Tile equally sized ``(C, H, W)`` images row by row into one RGB image, separated by ``pad`` black pixels.
    Missing cells stay black.
    """

    if len(images) > rows * columns:
        raise ConfigError('{} images do not fit a {}x{} grid'.format(len(images), rows, columns))

    height, width = images[0].shape[1:]

    grid = np.zeros((3, rows * height + (rows + 1) * pad, columns * width + (columns + 1) * pad), dtype=np.uint8)

    for index, image in enumerate(images):
        row, column = divmod(index, columns)

        top = pad + row * (height + pad)
        left = pad + column * (width + pad)

        grid[:, top:top + height, left:left + width] = _as_rgb(image)

    return grid


def make_panel(levels, pad=1):
    # type: (Sequence[np.ndarray], int) -> np.ndarray
    """
    Pyramid levels, given finest first, side by side from the coarsest on, each enlarged to the finest
    resolution by pixel repetition.
    """

    height, width = levels[0].shape[1:]
    enlarged = []

    for level in reversed(levels):
        factor = height // level.shape[1]
        enlarged.append(_as_rgb(level).repeat(factor, axis=1).repeat(factor, axis=2))

    return make_grid(enlarged, 1, len(enlarged), pad=pad)


def split_counts(dataset):
    # type: (Dataset) -> Dict[str, int]

    counts = collections.OrderedDict((split, 0) for split in SPLITS)  # type: Dict[str, int]

    for split in dataset.splits:
        counts[split] += 1

    return counts
