"""
Evaluation: bits per dimension of composite models, and the sampling-speed benchmark.

Every factor is normalized by the ``3 * H * W`` color dimensions of the full-resolution image, the grayscale
factor included. Under this convention the bits per dimension of the factors add up: the reported combined
score is the negative log-likelihood of the *joint* distribution of an image and its auxiliary views, an upper
bound on the negative log-likelihood of the image alone. The marginal is intractable, so the bound is
documented in the report rather than checked.
"""

import collections
import math

import jinja2
import numpy as np

from . import tensor as T
from .action import Action
from .config import SampleConfig
from .core import ConfigError, NumericError
from .log import Logging, log_table
from .models import AuxModelPair, FlatModel, Model, PyramidModel
from .sampling import sample_model
from .utils import render_template

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Callable, Dict, List, Optional, Tuple  # noqa
from .log import ContextAdapter  # noqa


DIMS_CONVENTION = 'per-color-dim'

#: Fixed header of the machine-readable report.
REPORT_CSV_HEADER = 'model,split,n_images,dims_convention,aux_bpd,cond_bpd,combined_bpd'

PER_IMAGE_CSV_HEADER = 'index,aux_nll_nats,cond_nll_nats'

BENCH_CSV_HEADER = 'model,height,width,runs,threads,median,p10,p90'

#: Fewest timed runs a benchmark accepts.
MIN_BENCH_RUNS = 3

REPORT_TEMPLATE = """\
model={{ report.model }}
split={{ report.split }}
n_images={{ report.n_images }}
dims_convention={{ report.dims_convention }}
aux_nll_nats={{ report.aux_nll | fmt }}
cond_nll_nats={{ report.cond_nll | fmt }}
aux_bpd={{ report.aux_bpd | fmt }}
cond_bpd={{ report.cond_bpd | fmt }}
combined_bpd={{ report.combined_bpd | fmt }}
{% for level in report.levels -%}
level{{ level.index }}_resolution={{ level.height }}x{{ level.width }}
level{{ level.index }}_bpd={{ level.bpd | fmt }}
{% endfor -%}
bound=joint nll upper-bounds marginal nll
"""

BENCH_TEMPLATE = """\
{% for report in reports -%}
{{ report.model }}_resolution={{ report.height }}x{{ report.width }}
{{ report.model }}_runs={{ report.runs }}
{{ report.model }}_threads={{ report.threads }}
{{ report.model }}_median={{ report.median | fmt }}
{{ report.model }}_p10={{ report.p10 | fmt }}
{{ report.model }}_p90={{ report.p90 | fmt }}
{% endfor -%}
{% if ratio is not none -%}
ratio={{ ratio | fmt }}
{% endif -%}
"""


def _fmt(value):
    # type: (float) -> str

    return repr(float(value))


def _render(template, **kwargs):
    # type: (str, **Any) -> str

    environment = jinja2.Environment(keep_trailing_newline=True)
    environment.filters['fmt'] = _fmt

    return render_template(environment.from_string(template), **kwargs)


def bits_per_dim(total_nll_nats, n_images, height, width):
    # type: (float, int, int, int) -> float
    """
    Bits per color dimension: ``total_nll_nats / (n_images * 3 * height * width * ln 2)``.

    :raises ConfigError: when there are no dimensions to normalize by.
    :raises NumericError: when the total is not finite.
    """

    dims = n_images * 3 * height * width

    if dims <= 0:
        raise ConfigError('Cannot compute bits per dimension over {} dimensions'.format(dims))

    if not math.isfinite(total_nll_nats):
        raise NumericError('Negative log-likelihood is not finite: {}'.format(total_nll_nats))

    return float(total_nll_nats) / (dims * math.log(2))


def combine_bpd(aux_bpd, cond_bpd):
    # type: (float, float) -> float

    return aux_bpd + cond_bpd


class LevelBpd(object):
    # pylint: disable=too-few-public-methods
    """
    Bits per dimension of the joint model of one pyramid resolution.
    """

    def __init__(self, index, height, width, bpd):
        # type: (int, int, int, float) -> None

        self.index = index
        self.height = height
        self.width = width
        self.bpd = bpd


class BpdReport(object):
    # pylint: disable=too-many-instance-attributes
    """
    Bound report of a model over a set of images.

    :ivar float aux_bpd: auxiliary part - the grayscale factor, or the coarsest pyramid level. ``0.0`` for flat
        models.
    :ivar float cond_bpd: conditional part - the color factor, all finer pyramid levels, or the flat model.
    :ivar float combined_bpd: ``aux_bpd + cond_bpd``.
    :ivar numpy.ndarray per_image: ``(n_images, 2)`` auxiliary and conditional NLL of every image, in nats.
    :ivar list levels: :py:class:`LevelBpd` per pyramid level, coarsest first; empty for other models.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, model, split, per_image, height, width, levels=None):
        # type: (str, str, np.ndarray, int, int, Optional[List[LevelBpd]]) -> None

        self.model = model
        self.split = split
        self.per_image = per_image
        self.height = height
        self.width = width
        self.levels = levels or []
        self.dims_convention = DIMS_CONVENTION

        self.aux_nll = _total(per_image[:, 0])
        self.cond_nll = _total(per_image[:, 1])

        self.aux_bpd = bits_per_dim(self.aux_nll, self.n_images, height, width)
        self.cond_bpd = bits_per_dim(self.cond_nll, self.n_images, height, width)
        self.combined_bpd = combine_bpd(self.aux_bpd, self.cond_bpd)

    @property
    def n_images(self):
        # type: () -> int

        return int(self.per_image.shape[0])

    def to_text(self):
        # type: () -> str

        return _render(REPORT_TEMPLATE, report=self)

    def to_csv(self):
        # type: () -> str

        return '{}\n{},{},{},{},{!r},{!r},{!r}\n'.format(
            REPORT_CSV_HEADER, self.model, self.split, self.n_images, self.dims_convention, self.aux_bpd,
            self.cond_bpd, self.combined_bpd
        )

    def per_image_csv(self):
        # type: () -> str

        return PER_IMAGE_CSV_HEADER + '\n' + ''.join(
            '{},{!r},{!r}\n'.format(index, float(row[0]), float(row[1])) for index, row in enumerate(self.per_image)
        )


def _total(values):
    # type: (np.ndarray) -> float

    # sequential float64 sum, fixed order
    total = 0.0

    for value in values:
        total += float(value)

    return total


def per_image_nll(model, images, batch_size=16):
    # type: (Model, np.ndarray, int) -> collections.OrderedDict[str, np.ndarray]
    """
    Negative log-likelihood of every image under every factor, in nats.

    :returns: ``float64`` arrays of length ``N`` by factor name, in factor order.
    """

    result = collections.OrderedDict()  # type: collections.OrderedDict[str, np.ndarray]

    with T.no_grad():
        for name, factor in model.factors.items():
            chunks = []

            for start in range(0, images.shape[0], batch_size):
                log_prob = factor.log_prob(images[start:start + batch_size]).data.astype(np.float64)
                chunks.append(-log_prob.reshape(log_prob.shape[0], -1).sum(axis=1))

            result[name] = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.float64)

    return result


def bound_report(model, images, split='test', batch_size=16, logger=None):
    # type: (Model, np.ndarray, str, int, Optional[ContextAdapter]) -> BpdReport
    """
    Evaluate a model on ``(N, 3, H, W)`` RGB images.

    :raises ConfigError: when there are no images.
    """

    logger = logger or Logging.get_logger()

    if images.shape[0] == 0:
        raise ConfigError('No images to evaluate')

    height, width = int(images.shape[2]), int(images.shape[3])

    with Action('evaluate {}'.format(model.kind), logger=logger):
        nll = per_image_nll(model, images, batch_size=batch_size)

    names = list(nll)
    levels = []  # type: List[LevelBpd]

    if isinstance(model, AuxModelPair):
        per_image = np.stack([nll['aux'], nll['cond']], axis=1)

    elif isinstance(model, PyramidModel):
        # names are coarsest first
        conditional = np.zeros_like(nll[names[0]])

        for name in names[1:]:
            conditional = conditional + nll[name]

        per_image = np.stack([nll[names[0]], conditional], axis=1)

        running = 0.0
        resolutions = model.config.pyramid_spec.resolutions

        for name in names:
            index = int(name[len('level'):])
            running += _total(nll[name])

            levels.append(LevelBpd(index, resolutions[index][0], resolutions[index][1],
                                   bits_per_dim(running, images.shape[0], *resolutions[index])))

    elif isinstance(model, FlatModel):
        per_image = np.stack([np.zeros_like(nll['flat']), nll['flat']], axis=1)

    else:
        raise ConfigError('Cannot evaluate {}'.format(model))

    report = BpdReport(cast(str, model.kind), split, per_image, height, width, levels=levels)

    log_table(logger.info, 'bound report', [
        ['aux', report.aux_bpd],
        ['cond', report.cond_bpd],
        ['combined', report.combined_bpd]
    ] + [
        ['level{} ({}x{})'.format(level.index, level.height, level.width), level.bpd] for level in levels
    ], headers=['part', 'bpd'])

    return report


class BenchReport(object):
    # pylint: disable=too-few-public-methods,too-many-instance-attributes
    """
    Sampling time per pixel of one model, in seconds.
    """

    # pylint: disable=too-many-arguments
    def __init__(self, model, height, width, seconds_per_pixel, threads=1):
        # type: (str, int, int, List[float], int) -> None

        if len(seconds_per_pixel) < MIN_BENCH_RUNS:
            raise ConfigError('Benchmark needs at least {} runs, got {}'.format(MIN_BENCH_RUNS,
                                                                              len(seconds_per_pixel)))

        self.model = model
        self.height = height
        self.width = width
        self.threads = threads
        self.seconds_per_pixel = list(seconds_per_pixel)

        samples = np.asarray(self.seconds_per_pixel, dtype=np.float64)

        self.median = float(np.median(samples))
        self.p10 = float(np.percentile(samples, 10))
        self.p90 = float(np.percentile(samples, 90))

    @property
    def runs(self):
        # type: () -> int

        return len(self.seconds_per_pixel)

    def csv_row(self):
        # type: () -> str

        return '{},{},{},{},{},{!r},{!r},{!r}'.format(
            self.model, self.height, self.width, self.runs, self.threads, self.median, self.p10, self.p90
        )


def bench_ratio(slow, fast):
    # type: (BenchReport, BenchReport) -> float
    """
    How many times ``fast`` samples a pixel faster than ``slow``, by medians.
    """

    if fast.median <= 0:
        raise NumericError('Median sampling time of {} is not positive'.format(fast.model))

    return slow.median / fast.median


def bench_to_text(reports, ratio=None):
    # type: (List[BenchReport], Optional[float]) -> str

    return _render(BENCH_TEMPLATE, reports=reports, ratio=ratio)


def bench_to_csv(reports):
    # type: (List[BenchReport]) -> str

    return BENCH_CSV_HEADER + '\n' + ''.join(report.csv_row() + '\n' for report in reports)


# pylint: disable=too-many-arguments
def bench_sampling(model, cfg, runs=5, warmup=1, tag=None, clock=None, logger=None):
    # type: (Model, SampleConfig, int, int, Optional[str], Optional[Callable[[], float]], Optional[ContextAdapter]) -> BenchReport
    """
    Time sampling of one full-resolution image, ``warmup`` untimed runs first.

    :param callable clock: monotonic clock, passed to :py:class:`pyrpix.action.Action`.
    :raises ConfigError: when ``runs`` is below :py:data:`MIN_BENCH_RUNS`.
    """

    logger = logger or Logging.get_logger()

    if runs < MIN_BENCH_RUNS:
        raise ConfigError('Benchmark needs at least {} runs, got {}'.format(MIN_BENCH_RUNS, runs))

    size = model.config.size
    tag = tag or cast(str, model.kind)

    for index in range(warmup):
        sample_model(model, cfg, image_index=index, logger=logger)

    timings = []

    for index in range(runs):
        with Action('bench {}'.format(tag), logger=logger, clock=clock, tags={'run': index}) as action:
            sample_model(model, cfg, image_index=warmup + index, logger=logger)

        timings.append(action.duration / float(size * size))

        logger.verbose('run {}: {:.6f} seconds per pixel'.format(index, timings[-1]))

    report = BenchReport(tag, size, size, timings)

    log_table(logger.info, 'bench {}'.format(tag), [
        [report.median, report.p10, report.p90, report.runs]
    ], headers=['median s/px', 'p10 s/px', 'p90 s/px', 'runs'])

    return report
