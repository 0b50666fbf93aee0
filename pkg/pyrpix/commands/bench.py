from ..config import run_options, ARCHITECTURE_KEYS, MODEL_FLAT, MODEL_PYRAMID
from ..core import ConfigError
from ..evaluation import bench_ratio, bench_sampling, bench_to_csv, bench_to_text
from ..models import build_model
from .base import RunCommand, CHECKPOINT_OPTION, OUTPUT_OPTION, SAMPLING_KEYS

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, List, Optional  # noqa
from ..evaluation import BenchReport  # noqa
from ..models import Model  # noqa


BENCH_KEYS = list(ARCHITECTURE_KEYS) + SAMPLING_KEYS


class Bench(RunCommand):
    """
    Time sampling per pixel.

    By default times the model described by the options, or the one stored by ``--checkpoint``. With
    ``--compare``, times a flat model of ``--flat-blocks`` blocks against the pyramid described by the options
    at the same resolution, and reports how many times faster the pyramid samples a pixel. Weights do not
    change the cost of sampling, so untrained models are timed unless checkpoints are given.

    Writes ``bench.txt`` (``key=value`` lines) and ``bench.csv``.
    """

    name = 'bench'
    description = 'Benchmark sampling speed.'

    run_keys = BENCH_KEYS

    options = [
        ('Model', run_options(BENCH_KEYS)),
        ('Benchmark', {
            'runs': {
                'help': 'Timed runs, at least 3 (default: %(default)s).',
                'type': int,
                'default': 5
            },
            'warmup': {
                'help': 'Untimed runs before the timed ones (default: %(default)s).',
                'type': int,
                'default': 1
            },
            'compare': {
                'help': 'Compare a flat model with the pyramid described by the options.',
                'action': 'store_true'
            },
            'flat-blocks': {
                'help': 'Residual blocks of the flat model of ``--compare`` (default: %(default)s).',
                'type': int,
                'default': 24
            },
            'flat-checkpoint': {
                'help': 'Checkpoint of the flat model of ``--compare``.',
                'metavar': 'FILE'
            }
        }),
        ('Input and output', dict(CHECKPOINT_OPTION, **OUTPUT_OPTION))
    ]

    def _bench(self, model, tag):
        # type: (Model, str) -> BenchReport

        return bench_sampling(model, model.config.sample, runs=self.option('runs'), warmup=self.option('warmup'),
                              tag=tag, logger=self.logger)

    def _flat_model(self, config):
        # type: (Any) -> Model

        if self.option('flat-checkpoint'):
            return self.load_checkpoint_model(path=self.option('flat-checkpoint'), keys=SAMPLING_KEYS)

        return build_model(config.replace(model=MODEL_FLAT, blocks=self.option('flat-blocks')))

    def execute(self):
        # type: () -> None

        if self.option('checkpoint'):
            model = self.load_checkpoint_model()

        else:
            model = build_model(self.fresh_config())

        config = model.config
        ratio = None  # type: Optional[float]

        if self.option('compare'):
            if config.model != MODEL_PYRAMID:
                raise ConfigError("Comparison needs a pyramid model, got '{}'".format(config.model))

            flat = self._flat_model(config)

            if flat.config.size != config.size:
                raise ConfigError('Flat model samples {0}x{0}, pyramid {1}x{1}'.format(flat.config.size, config.size))

            reports = [self._bench(flat, 'flat'), self._bench(model, 'pyramid')]
            ratio = bench_ratio(reports[0], reports[1])

            self.info('pyramid samples a pixel {:.2f} times faster than the flat model'.format(ratio))

        else:
            reports = [self._bench(model, cast(str, config.model))]

        self.write_artifact('bench.txt', bench_to_text(reports, ratio=ratio))
        self.write_artifact('bench.csv', bench_to_csv(reports))

        self.write_reproducibility(config)
