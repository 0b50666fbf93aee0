from ..config import run_options
from ..core import ConfigError
from ..dataset import SPLITS
from ..evaluation import bound_report
from .base import RunCommand, CHECKPOINT_OPTION, OUTPUT_OPTION


class Eval(RunCommand):
    """
    Bits per dimension of a trained model on one split of a dataset.

    Writes ``report.txt`` (``key=value`` lines), ``report.csv`` (header
    ``model,split,n_images,dims_convention,aux_bpd,cond_bpd,combined_bpd``) and ``per_image_nll.csv``
    (header ``index,aux_nll_nats,cond_nll_nats``).
    """

    name = 'eval'
    description = 'Evaluate bits per dimension of a model.'

    run_keys = ['dataset', 'crop']

    required_options = ['output', 'checkpoint']

    options = [
        ('Dataset', dict(run_options(['dataset', 'crop']), **{
            'split': {
                'help': 'Split to evaluate (default: %(default)s).',
                'choices': SPLITS,
                'default': 'test'
            },
            'batch-size': {
                'help': 'Images evaluated at once (default: %(default)s).',
                'type': int,
                'default': 16
            }
        })),
        ('Input and output', dict(CHECKPOINT_OPTION, **OUTPUT_OPTION))
    ]

    def execute(self):
        # type: () -> None

        model = self.load_checkpoint_model()

        split = self.option('split')
        images = self.load_dataset(model.config).split(split).images

        if not len(images):
            raise ConfigError("Dataset has no '{}' images".format(split))

        report = bound_report(model, images, split=split, batch_size=self.option('batch-size'), logger=self.logger)

        self.write_artifact('report.txt', report.to_text())
        self.write_artifact('report.csv', report.to_csv())
        self.write_artifact('per_image_nll.csv', report.per_image_csv())

        self.write_reproducibility(model.config)
