from ..config import RunConfig
from ..core import ConfigError
from ..dataset import write_toy, TOY_COUNT
from .base import RunCommand


class Toy(RunCommand):
    """
    Write the procedural toy dataset - colored squares and discs on plain backgrounds - as PNG files
    plus ``manifest.tsv``, ready for ``--dataset``.
    """

    name = 'toy'
    description = 'Write the toy dataset.'

    required_options = ['output']

    options = {
        'size': {
            'help': 'Image resolution (default: %(default)s).',
            'type': int,
            'default': 8
        },
        'count': {
            'help': 'Number of images; every 16 split 12 train, 2 val, 2 test (default: %(default)s).',
            'type': int,
            'default': TOY_COUNT
        },
        'seed': {
            'help': 'Seed of the generator (default: %(default)s).',
            'type': int,
            'default': 0
        },
        'output': {
            'help': 'Directory to write images and manifest into.',
            'metavar': 'DIR'
        }
    }

    def sanity(self):
        # type: () -> None

        if self.option('size') < 1 or self.option('count') < 1:
            raise ConfigError('Toy dataset needs positive size and count')

    def execute(self):
        # type: () -> None

        manifest = write_toy(self.output_dir, self.option('size'), count=self.option('count'), seed=self.option('seed'))

        self.info("wrote {} toy images, manifest '{}'".format(self.option('count'), manifest))

        self.write_reproducibility(RunConfig(size=self.option('size'), seed=self.option('seed')))
