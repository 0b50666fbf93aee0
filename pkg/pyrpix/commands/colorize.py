from ..auxiliary import gray4_to_rgb
from ..config import run_options
from ..core import ConfigError
from ..dataset import encode_png, load_aux_image, make_grid
from ..models import AuxModelPair
from ..sampling import gray_consistency, sample_conditional
from ..utils import normalize_path
from .base import RunCommand, CHECKPOINT_OPTION, OUTPUT_OPTION, SAMPLING_KEYS


class Colorize(RunCommand):
    """
    Sample color images conditioned on a grayscale image, using a trained ``grayscale-aux`` pair.

    The input is quantized to 4-bit levels first. Writes ``colorized.png`` - the quantized input followed by
    the samples - and ``report.txt`` with the fraction of sampled pixels whose 4-bit grayscale matches
    the input.
    """

    name = 'colorize'
    description = 'Colorize a grayscale image.'

    run_keys = SAMPLING_KEYS

    required_options = ['output', 'checkpoint', 'input']

    options = [
        ('Sampling', run_options(SAMPLING_KEYS)),
        ('Colorization', {
            'input': {
                'help': 'Grayscale (or color) image to colorize, at the resolution of the model.',
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

        if not isinstance(model, AuxModelPair):
            raise ConfigError("Colorization needs a grayscale-aux model, checkpoint holds '{}'".format(model.kind))

        count = self.option('count')

        if count < 1:
            raise ConfigError('Number of samples must be positive, got {}'.format(count))

        aux = load_aux_image(normalize_path(self.option('input')))

        samples = [
            sample_conditional(model, aux, model.config.sample, image_index=index, logger=self.logger)
            for index in range(count)
        ]

        consistency = sum(gray_consistency(sample, aux) for sample in samples) / len(samples)

        self.info('grayscale consistency of samples: {:.4f}'.format(consistency))

        self.write_artifact('colorized.png', encode_png(make_grid([gray4_to_rgb(aux)] + samples, 1, count + 1)))
        self.write_artifact('report.txt', 'samples={}\ngray_consistency={!r}\n'.format(count, consistency))

        self.write_reproducibility(model.config)
