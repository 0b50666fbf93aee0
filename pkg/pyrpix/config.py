"""
Run configuration.

A :py:class:`RunConfig` holds everything deciding what a run computes: the model kind, architecture knobs,
training and sampling settings, and the dataset. It is validated as a whole before any compute starts, and
it has a canonical text form - key-sorted ``key=value`` lines - which is embedded in checkpoints and hashed
into the reproducibility stanza of every run.

.. code-block:: python

   config = RunConfig.from_mapping({'model': 'pyramid', 'size': '16', 'levels': '2', 'embed_up': '1'})

   print(config.to_text())
   print(config.config_hash)
"""

import collections
import hashlib

from .auxiliary import PyramidSpec
from .core import ConfigError
from .likelihoods import SAMPLE_MODES, MODE_REDUCED
from .utils import normalize_bool_option, normalize_int_list_option

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Callable, Dict, List, Mapping, Optional, Tuple  # noqa


MODEL_GRAYSCALE_AUX = 'grayscale-aux'
MODEL_PYRAMID = 'pyramid'
MODEL_FLAT = 'flat'

MODELS = (MODEL_GRAYSCALE_AUX, MODEL_PYRAMID, MODEL_FLAT)

#: Crop margins of aligned face crops: left, right, top, bottom.
FACE_CROP = (25, 25, 50, 40)


def _parse_choice(choices):
    # type: (Tuple[str, ...]) -> Callable[[str, str], str]

    def _parse(key, value):
        # type: (str, str) -> str

        if value not in choices:
            raise ConfigError("Key '{}' must be one of {}, got '{}'".format(key, ', '.join(choices), value))

        return value

    return _parse


def _parse_int(key, value):
    # type: (str, str) -> int

    try:
        return int(value)

    except ValueError:
        raise ConfigError("Key '{}' expects an integer, got '{}'".format(key, value))


def _parse_float(key, value):
    # type: (str, str) -> float

    try:
        return float(value)

    except ValueError:
        raise ConfigError("Key '{}' expects a number, got '{}'".format(key, value))


def _parse_bool(key, value):
    # type: (str, str) -> bool

    # pylint: disable=unused-argument
    return normalize_bool_option(value)


def _parse_int_list(key, value):
    # type: (str, str) -> List[int]

    return normalize_int_list_option(value, key)


def _parse_str(key, value):
    # type: (str, str) -> str

    # pylint: disable=unused-argument
    return value.strip()


def format_value(value):
    # type: (Any) -> str
    """
    Canonical text of a config value.
    """

    if isinstance(value, bool):
        return 'yes' if value else 'no'

    if isinstance(value, float):
        return repr(value)

    if isinstance(value, (list, tuple)):
        return ','.join(str(item) for item in value)

    return str(value)


#: Known keys: parser, default and help.
FIELDS = collections.OrderedDict([
    ('model', (_parse_choice(MODELS), MODEL_GRAYSCALE_AUX,
               'Model kind: grayscale-aux (4-bit grayscale + conditional color), pyramid, or flat.')),
    ('dataset', (_parse_str, 'toy', 'Dataset manifest (``path<TAB>split`` lines), or ``toy`` for the bundled toy set.')),
    ('size', (_parse_int, 8, 'Image resolution (square).')),
    ('blocks', (_parse_int, 2, 'Residual blocks of every autoregressive net.')),
    ('filters', (_parse_int, 16, 'Filters of every autoregressive net.')),
    ('mixtures', (_parse_int, 10, 'Logistic mixture components of RGB heads.')),
    ('levels', (_parse_int, 2, 'Pyramid levels, finest included.')),
    ('kernel', (_parse_int, 3, 'Convolution kernel size, odd.')),
    ('embed_blocks', (_parse_int, 2, 'Residual blocks of the embedding net.')),
    ('embed_filters', (_parse_int, 16, 'Filters of the embedding net.')),
    ('embed_down', (_parse_int_list, [], 'Embedding blocks followed by a stride-2 convolution, 1-based.')),
    ('embed_up', (_parse_int_list, [], 'Embedding blocks followed by x2 upsampling, 1-based.')),
    ('dropout', (_parse_float, 0.0, 'Dropout rate of residual branches, training only.')),
    ('lr', (_parse_float, 0.001, 'Initial learning rate.')),
    ('lr_decay', (_parse_float, 0.99999, 'Learning rate multiplier applied after every step.')),
    ('batch_size', (_parse_int, 16, 'Images per step.')),
    ('steps', (_parse_int, 500, 'Optimization steps per factor, when ``epochs`` is 0.')),
    ('epochs', (_parse_int, 0, 'Passes over the training split per factor; 0 means steps-driven.')),
    ('seed', (_parse_int, 0, 'Seed of the run; per-factor and per-pixel streams derive from it.')),
    ('adam_beta1', (_parse_float, 0.9, 'Adam first moment decay.')),
    ('adam_beta2', (_parse_float, 0.999, 'Adam second moment decay.')),
    ('adam_eps', (_parse_float, 1e-8, 'Adam epsilon.')),
    ('flip', (_parse_bool, False, 'Random horizontal flipping of training images.')),
    ('crop', (_parse_int_list, [], 'Crop margins applied on loading: left,right,top,bottom.')),
    ('mode', (_parse_choice(SAMPLE_MODES), 'ancestral', 'Sampling mode: ancestral, reduced or map.')),
    ('lam', (_parse_float, 0.0, 'Log-scale reduction of the ``reduced`` sampling mode.')),
    ('cache', (_parse_bool, True, 'Sample with the activation cache instead of full re-evaluation.'))
])  # type: collections.OrderedDict[str, Tuple[Callable[[str, str], Any], Any, str]]

#: Keys deciding the shape of the trained parameters. A checkpoint only loads into a configuration agreeing on all of them.
ARCHITECTURE_KEYS = (
    'model', 'size', 'blocks', 'filters', 'mixtures', 'levels', 'kernel', 'embed_blocks', 'embed_filters',
    'embed_down', 'embed_up'
)


def parse_values(mapping):
    # type: (Mapping[str, Any]) -> Dict[str, Any]
    """
    Typed values of the keys set in ``mapping``. Text values are parsed, others are taken as they are,
    and ``None`` values are skipped.

    :raises ConfigError: on unknown keys and unparsable values.
    """

    values = {}  # type: Dict[str, Any]

    for raw_key, raw_value in mapping.items():
        if raw_value is None:
            continue

        key = raw_key.replace('-', '_')

        if key not in FIELDS:
            raise ConfigError("Unknown configuration key '{}'".format(raw_key))

        parser = FIELDS[key][0]

        values[key] = parser(key, raw_value) if isinstance(raw_value, str) else raw_value

    return values


class TrainConfig(object):
    """
    Optimization settings of every factor.

    :raises ConfigError: when a value is out of range.
    """

    # pylint: disable=too-many-instance-attributes,too-many-arguments
    def __init__(self, lr=0.001, lr_decay=0.99999, batch_size=16, steps=500, epochs=0, dropout=0.0, seed=0,
                 adam_beta1=0.9, adam_beta2=0.999, adam_eps=1e-8, flip=False):
        # type: (float, float, int, int, int, float, int, float, float, float, bool) -> None

        if lr < 0:
            raise ConfigError('Learning rate cannot be negative, got {}'.format(lr))

        if not 0.0 < lr_decay <= 1.0:
            raise ConfigError('Learning rate decay must be in (0, 1], got {}'.format(lr_decay))

        if not 0.0 <= dropout < 1.0:
            raise ConfigError('Dropout rate must be in [0, 1), got {}'.format(dropout))

        if batch_size < 1:
            raise ConfigError('Batch size must be positive, got {}'.format(batch_size))

        if steps < 0 or epochs < 0:
            raise ConfigError('Steps and epochs cannot be negative, got {} and {}'.format(steps, epochs))

        if not (0.0 <= adam_beta1 < 1.0 and 0.0 <= adam_beta2 < 1.0):
            raise ConfigError('Adam betas must be in [0, 1), got {} and {}'.format(adam_beta1, adam_beta2))

        if adam_eps <= 0:
            raise ConfigError('Adam epsilon must be positive, got {}'.format(adam_eps))

        self.lr = lr
        self.lr_decay = lr_decay
        self.batch_size = batch_size
        self.steps = steps
        self.epochs = epochs
        self.dropout = dropout
        self.seed = seed
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.flip = flip

    def __repr__(self):
        # type: () -> str

        return 'TrainConfig({})'.format(', '.join(
            '{}={}'.format(key, value) for key, value in sorted(self.__dict__.items())
        ))


class SampleConfig(object):
    """
    Sampling settings.

    :param str mode: ``ancestral``, ``reduced`` or ``map``.
    :param float lam: log-scale reduction, ``reduced`` only; the usual sweep is ``0.0, 0.1, ... 1.0``.
    :param int seed: seed of the per-pixel random streams.
    :param bool use_cache: sample through the activation cache.
    """

    def __init__(self, mode='ancestral', lam=0.0, seed=0, use_cache=True):
        # type: (str, float, int, bool) -> None

        if mode not in SAMPLE_MODES:
            raise ConfigError("Sampling mode must be one of {}, got '{}'".format(', '.join(SAMPLE_MODES), mode))

        if lam < 0:
            raise ConfigError('Variance reduction cannot be negative, got {}'.format(lam))

        if seed < 0:
            raise ConfigError('Seed cannot be negative, got {}'.format(seed))

        self.mode = mode
        self.lam = lam if mode == MODE_REDUCED else 0.0
        self.seed = seed
        self.use_cache = use_cache

    def __repr__(self):
        # type: () -> str

        return 'SampleConfig(mode={}, lam={}, seed={}, use_cache={})'.format(
            self.mode, self.lam, self.seed, self.use_cache
        )

    def replace(self, **kwargs):
        # type: (**Any) -> SampleConfig

        values = dict(mode=self.mode, lam=self.lam, seed=self.seed, use_cache=self.use_cache)
        values.update(kwargs)

        return SampleConfig(**values)


class RunConfig(object):
    """
    Validated configuration of a run. Values are read as attributes, e.g. ``config.blocks``.

    :param dict values: typed values of known keys; missing keys take their defaults.
    :raises ConfigError: on unknown keys, unparsable or out-of-range values, and incompatible knobs.
    """

    def __init__(self, **values):
        # type: (**Any) -> None

        unknown = sorted(set(values) - set(FIELDS))

        if unknown:
            raise ConfigError('Unknown configuration keys: {}'.format(', '.join(unknown)))

        self._values = collections.OrderedDict()  # type: collections.OrderedDict[str, Any]

        for key, (_, default, _) in FIELDS.items():
            value = values.get(key, default)
            self._values[key] = list(value) if isinstance(value, (list, tuple)) else value

        self.train = TrainConfig(
            lr=self.lr, lr_decay=self.lr_decay, batch_size=self.batch_size, steps=self.steps, epochs=self.epochs,
            dropout=self.dropout, seed=self.seed, adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps, flip=self.flip
        )

        self.sample = SampleConfig(mode=self.mode, lam=self.lam, seed=self.seed, use_cache=self.cache)

        self._validate_architecture()

    def __getattr__(self, name):
        # type: (str) -> Any

        values = self.__dict__.get('_values', {})

        if name in values:
            return values[name]

        raise AttributeError(name)

    def __eq__(self, other):
        # type: (Any) -> bool

        return isinstance(other, RunConfig) and self.to_text() == other.to_text()

    def __ne__(self, other):
        # type: (Any) -> bool

        return not self == other

    def __hash__(self):
        # type: () -> int

        return hash(self.to_text())

    def __repr__(self):
        # type: () -> str

        return 'RunConfig({})'.format(self.config_hash[:12])

    # pylint: disable=too-many-branches
    def _validate_architecture(self):
        # type: () -> None

        if self.size < 1:
            raise ConfigError('Image size must be positive, got {}'.format(self.size))

        if self.blocks < 0 or self.embed_blocks < 0:
            raise ConfigError('Block counts cannot be negative, got {} and {}'.format(self.blocks, self.embed_blocks))

        if self.filters < 1 or self.embed_filters < 1 or self.mixtures < 1:
            raise ConfigError('Filters and mixture components must be positive')

        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError('Kernel size must be odd and positive, got {}'.format(self.kernel))

        if self.crop and (len(self.crop) != 4 or min(self.crop) < 0):
            raise ConfigError('Crop expects four non-negative margins left,right,top,bottom, got {}'.format(
                format_value(self.crop)
            ))

        for index in self.embed_down + self.embed_up:
            if not 1 <= index <= self.embed_blocks:
                raise ConfigError('Embedding resampling after block {} is out of range for {} blocks'.format(
                    index, self.embed_blocks
                ))

        if set(self.embed_down) & set(self.embed_up):
            raise ConfigError('Embedding block cannot be followed by both downsampling and upsampling')

        scale = len(self.embed_up) - len(self.embed_down)

        if self.model == MODEL_GRAYSCALE_AUX and scale != 0:
            raise ConfigError('Grayscale auxiliary embedding must keep the resolution, it scales by 2^{}'.format(scale))

        if self.model == MODEL_PYRAMID:
            if self.levels < 1:
                raise ConfigError('Pyramid needs at least one level, got {}'.format(self.levels))

            if self.levels > 1 and scale != 1:
                raise ConfigError('Pyramid embedding must upsample exactly x2, it scales by 2^{}'.format(scale))

            spec = self.pyramid_spec

            if self.levels > 1 and spec.base[0] % 2 ** len(self.embed_down):
                raise ConfigError('Coarsest resolution {}x{} cannot be downsampled {} times by the embedding'.format(
                    spec.base[0], spec.base[1], len(self.embed_down)
                ))

        elif self.model == MODEL_GRAYSCALE_AUX and self.size % 2 ** len(self.embed_down):
            raise ConfigError('Resolution {} cannot be downsampled {} times by the embedding'.format(
                self.size, len(self.embed_down)
            ))

    @property
    def pyramid_spec(self):
        # type: () -> PyramidSpec

        return PyramidSpec(self.levels if self.model == MODEL_PYRAMID else 1, (self.size, self.size))

    @property
    def crop_margins(self):
        # type: () -> Optional[Tuple[int, int, int, int]]

        if not self.crop:
            return None

        return cast(Tuple[int, int, int, int], tuple(self.crop))

    def as_dict(self):
        # type: () -> Dict[str, Any]

        return dict(self._values)

    def replace(self, **values):
        # type: (**Any) -> RunConfig

        merged = self.as_dict()
        merged.update(values)

        return RunConfig(**merged)

    def to_text(self):
        # type: () -> str
        """
        Canonical text: ``key=value`` lines sorted by key, ``\\n``-terminated.
        """

        return ''.join(
            '{}={}\n'.format(key, format_value(self._values[key]))
            for key in sorted(self._values)
        )

    @property
    def config_hash(self):
        # type: () -> str

        return hashlib.sha256(self.to_text().encode('utf-8')).hexdigest()

    @classmethod
    def from_mapping(cls, mapping):
        # type: (Mapping[str, Any]) -> RunConfig
        """
        Build from text values, e.g. command options or parsed config files. Keys may use dashes or
        underscores; ``None`` values are skipped.
        """

        return cls(**parse_values(mapping))

    @classmethod
    def from_text(cls, text):
        # type: (str) -> RunConfig
        """
        Parse canonical text, or any ``key=value`` text. Blank lines and ``#`` comments are skipped.
        """

        mapping = collections.OrderedDict()  # type: collections.OrderedDict[str, str]

        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()

            if not line or line.startswith('#'):
                continue

            if '=' not in line:
                raise ConfigError("Line {} is not a key=value pair: '{}'".format(lineno, line))

            key, value = line.split('=', 1)
            mapping[key.strip()] = value.strip()

        return cls.from_mapping(mapping)


def run_options(keys=None):
    # type: (Optional[List[str]]) -> Dict[str, Dict[str, Any]]
    """
    Command options for the given run configuration keys, all of them by default. Values stay text
    until :py:meth:`RunConfig.from_mapping` parses them, and unset options are ``None``.
    """

    return {
        key.replace('_', '-'): {
            'help': FIELDS[key][2] + ' (default: {})'.format(format_value(FIELDS[key][1]) or 'none'),
            'metavar': key.upper()
        }
        for key in (keys or list(FIELDS.keys()))
    }
