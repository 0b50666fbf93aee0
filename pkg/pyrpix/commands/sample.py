from ..auxiliary import gray4_to_rgb
from ..config import run_options
from ..dataset import encode_png, make_grid, make_panel, parse_grid
from ..likelihoods import MODE_REDUCED
from ..models import AuxModelPair, PyramidModel
from ..sampling import sample_model, LAMBDA_SWEEP
from .base import RunCommand, CHECKPOINT_OPTION, OUTPUT_OPTION, SAMPLING_KEYS

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, List, Optional  # noqa
from ..config import SampleConfig  # noqa
from ..models import Model  # noqa


class Sample(RunCommand):
    """
    Sample a grid of images from a trained model.

    Writes ``samples.png``; grayscale pairs add ``aux.png`` with the sampled grayscale views, pyramids add
    ``panel.png`` with all levels of every sample, one sample per row. With ``--sweep``, every row is one
    sample drawn at every variance reduction of the sweep, left to right.
    """

    name = 'sample'
    description = 'Sample images from a trained model.'

    run_keys = SAMPLING_KEYS

    required_options = ['output', 'checkpoint']

    options = [
        ('Sampling', run_options(SAMPLING_KEYS)),
        ('Layout', {
            'grid': {
                'help': 'Grid of samples, ROWSxCOLUMNS (default: %(default)s).',
                'default': '4x4'
            },
            'sweep': {
                'help': 'Sample every row at variance reductions 0.0, 0.1, ... 1.0 instead of a plain grid.',
                'action': 'store_true'
            }
        }),
        ('Input and output', dict(CHECKPOINT_OPTION, **OUTPUT_OPTION))
    ]

    def _draw(self, model, cfg, count):
        # type: (Model, SampleConfig, int) -> List[Dict[str, Any]]

        return [sample_model(model, cfg, image_index=index, logger=self.logger) for index in range(count)]

    def execute(self):
        # type: () -> None

        model = self.load_checkpoint_model()
        cfg = model.config.sample

        rows, columns = parse_grid(self.option('grid'))

        if self.option('sweep'):
            # one image index per row, the same pixel streams across the row
            samples = [
                sample_model(model, cfg.replace(mode=MODE_REDUCED, lam=lam), image_index=row, logger=self.logger)
                for row in range(rows)
                for lam in LAMBDA_SWEEP
            ]

            columns = len(LAMBDA_SWEEP)

        else:
            samples = self._draw(model, cfg, rows * columns)

        self.write_artifact('samples.png', encode_png(make_grid([sample['image'] for sample in samples],
                                                                rows, columns)))

        if isinstance(model, AuxModelPair):
            self.write_artifact('aux.png', encode_png(make_grid(
                [gray4_to_rgb(sample['aux']) for sample in samples], rows, columns
            )))

        if isinstance(model, PyramidModel) and model.levels > 1:
            panels = [make_panel(sample['levels']) for sample in samples]

            self.write_artifact('panel.png', encode_png(make_grid(panels, len(panels), 1)))

        self.info('sampled {} images, {} mode{}'.format(
            len(samples), 'sweep' if self.option('sweep') else cfg.mode,
            ', lam {}'.format(cfg.lam) if cfg.mode == MODE_REDUCED and not self.option('sweep') else ''
        ))

        self.write_reproducibility(model.config)
