from ..auxiliary import downsample2x
from ..config import run_options
from ..core import ConfigError, DataError
from ..dataset import decode_image, encode_png, make_grid, make_panel
from ..models import PyramidModel
from ..sampling import round_trip_deviation, sample_pyramid
from ..utils import normalize_path
from .base import RunCommand, CHECKPOINT_OPTION, OUTPUT_OPTION, SAMPLING_KEYS


class Superres(RunCommand):
    """
    Upsample a low-resolution image through all finer levels of a trained pyramid.

    The input becomes the coarsest level; larger inputs are downsampled to it first. Writes ``superres.png``
    with the finest level of every sample, ``panel.png`` with all levels, one sample per row, and
    ``report.txt`` with the mean absolute deviation between the input level and the samples downsampled
    back to it.
    """

    name = 'superres'
    description = 'Super-resolve an image with a pyramid model.'

    run_keys = SAMPLING_KEYS

    required_options = ['output', 'checkpoint', 'input']

    options = [
        ('Sampling', run_options(SAMPLING_KEYS)),
        ('Super-resolution', {
            'input': {
                'help': 'Low-resolution RGB image, at the coarsest resolution of the pyramid or any resolution'
                        ' that halves down to it.',
                'metavar': 'FILE'
            },
            'count': {
                'help': 'Number of samples (default: %(default)s).',
                'type': int,
                'default': 4
            }
        }),
        ('Input and output', dict(CHECKPOINT_OPTION, **OUTPUT_OPTION))
    ]

    def execute(self):
        # type: () -> None

        model = self.load_checkpoint_model()

        if not isinstance(model, PyramidModel):
            raise ConfigError("Super-resolution needs a pyramid model, checkpoint holds '{}'".format(model.kind))

        count = self.option('count')

        if count < 1:
            raise ConfigError('Number of samples must be positive, got {}'.format(count))

        coarse = decode_image(normalize_path(self.option('input')), channels=3)
        base = model.config.pyramid_spec.base

        while coarse.shape[1:] != base:
            if coarse.shape[1] < base[0] or coarse.shape[2] < base[1]:
                raise DataError('Input of {}x{} does not halve down to the coarsest level {}x{}'.format(
                    coarse.shape[1], coarse.shape[2], base[0], base[1]
                ))

            coarse = downsample2x(coarse)

        samples = [
            sample_pyramid(model, model.config.sample, coarse=coarse, image_index=index, logger=self.logger)
            for index in range(count)
        ]

        deviation = sum(round_trip_deviation(levels, coarse) for levels in samples) / len(samples)

        self.info('round-trip mean absolute deviation: {:.4f}'.format(deviation))

        self.write_artifact('superres.png', encode_png(make_grid([levels[0] for levels in samples], 1, count)))
        self.write_artifact('panel.png', encode_png(make_grid([make_panel(levels) for levels in samples],
                                                              count, 1)))
        self.write_artifact('report.txt', 'samples={}\nround_trip_mad={!r}\n'.format(count, deviation))

        self.write_reproducibility(model.config)
