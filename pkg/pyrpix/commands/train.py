from ..checkpoint import save_checkpoint
from ..config import run_options, FIELDS
from ..models import build_model
from ..training import format_loss_csv, train_model, LossRecord
from .base import RunCommand, OUTPUT_OPTION

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, List, Optional  # noqa
from ..training import TrainResult  # noqa


MODEL_CHECKPOINT = 'model.ckpt'


def combined_losses(results):
    # type: (Dict[str, TrainResult]) -> List[LossRecord]
    """
    Per-step sums over factors. Factors normalize by the same image dimensions, so their bits per dimension
    add up like their negative log-likelihoods do.
    """

    histories = [result.losses for result in results.values()]

    return [
        LossRecord(
            records[0].step,
            sum(record.nll_nats for record in records),
            sum(record.bpd for record in records)
        )
        for records in zip(*histories)
    ]


class Train(RunCommand):
    """
    Train all factors of a model on the ``train`` split of a dataset.

    Writes ``<factor>.last.ckpt`` after every epoch, ``<factor>.best.ckpt`` whenever the validation NLL
    improves, ``model.ckpt`` with all factors at the end, and loss curves ``loss.csv`` (all factors)
    and ``loss-<factor>.csv``.
    """

    name = 'train'
    description = 'Train a model.'

    run_keys = list(FIELDS.keys())

    options = [
        ('Run configuration', run_options()),
        ('Training', {
            'parallel': {
                'help': 'Train factors side by side, each on its own thread.',
                'action': 'store_true'
            }
        }),
        ('Output', OUTPUT_OPTION)
    ]

    def execute(self):
        # type: () -> None

        config = self.fresh_config()
        dataset = self.load_dataset(config)

        train_images = dataset.split('train').images
        val_images = dataset.split('val').images

        model = build_model(config)

        self.info('training {} on {} images, validating on {}'.format(model, len(train_images), len(val_images)))

        results = train_model(
            model, train_images, config.train,
            parallel=bool(self.option('parallel')),
            logger=self.logger,
            val_images=val_images if len(val_images) else None,
            run_config=config,
            checkpoint_dir=self.output_dir
        )

        save_checkpoint(self.output_path(MODEL_CHECKPOINT), config, model.state_dict(), logger=self.logger)
        self.info("wrote '{}'".format(self.output_path(MODEL_CHECKPOINT)))

        self.write_artifact('loss.csv', format_loss_csv(combined_losses(results)))

        for name, result in results.items():
            self.write_artifact('loss-{}.csv'.format(name), format_loss_csv(result.losses))

        self.write_reproducibility(config)
