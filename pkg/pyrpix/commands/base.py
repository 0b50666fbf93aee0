"""
Pieces shared by all commands: run configuration from options, output directory, datasets and
the reproducibility stanza.
"""

import os
import sys

from ..checkpoint import load_model
from ..config import parse_values, RunConfig
from ..core import Command, ConfigError
from ..dataset import load_images, toy_dataset, Dataset
from ..log import log_dict
from ..models import build_model, Model
from ..utils import cached_property, format_command_line, normalize_path, render_template, write_atomically
from ..version import __version__

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, Any, Dict, List, Optional, Tuple  # noqa


REPRODUCIBILITY_NAME = 'reproducibility.txt'

REPRODUCIBILITY_TEMPLATE = """\
seed={{ seed }}
config_hash={{ config_hash }}
code_version={{ code_version }}
command={{ command }}
"""

SAMPLING_KEYS = ['mode', 'lam', 'seed', 'cache']

OUTPUT_OPTION = {
    'output': {
        'help': 'Directory to write artifacts into.',
        'metavar': 'DIR'
    }
}

CHECKPOINT_OPTION = {
    'checkpoint': {
        'help': 'Model checkpoint, e.g. ``model.ckpt`` written by ``train``.',
        'metavar': 'FILE'
    }
}


class RunCommand(Command):
    """
    Base of commands driven by a run configuration. Subclasses list the configuration keys they expose
    in ``run_keys``; options with these names are collected into a :py:class:`pyrpix.config.RunConfig`.
    """

    run_keys = []  # type: List[str]

    required_options = ['output']

    def _option_values(self, keys=None):
        # type: (Optional[List[str]]) -> Dict[str, Any]

        return {
            key: self.option(key.replace('_', '-')) for key in (self.run_keys if keys is None else keys)
        }

    @cached_property
    def output_dir(self):
        # type: () -> str

        return normalize_path(self.option('output'))

    def output_path(self, name):
        # type: (str) -> str

        return os.path.join(self.output_dir, name)

    def write_artifact(self, name, payload):
        # type: (str, Any) -> str

        path = self.output_path(name)
        write_atomically(path, payload)

        self.info("wrote '{}'".format(path))

        return path

    def fresh_config(self):
        # type: () -> RunConfig
        """
        Configuration from option values; unset options take their defaults.
        """

        config = RunConfig.from_mapping(self._option_values())

        log_dict(self.debug, 'run configuration', config.as_dict())

        return config

    def load_checkpoint_model(self, path=None, keys=None):
        # type: (Optional[str], Optional[List[str]]) -> Model
        """
        Rebuild the model stored in a checkpoint, the one given by option ``checkpoint`` by default. Options
        that are set, of ``keys`` or ``run_keys``, replace the stored sampling and training values; architecture
        cannot change.
        """

        path = normalize_path(path or self.option('checkpoint'))
        model = load_model(path, overrides=parse_values(self._option_values(keys=keys)))

        log_dict(self.debug, 'run configuration', model.config.as_dict())
        self.info('loaded {} from checkpoint, configuration {}'.format(model, model.config.config_hash[:12]))

        return model

    def load_dataset(self, config):
        # type: (RunConfig) -> Dataset

        if config.dataset == 'toy':
            return toy_dataset(config.size, seed=0)

        dataset = load_images(normalize_path(config.dataset), channels=3, crop=config.crop_margins,
                              logger=self.logger)

        if dataset.resolution != (config.size, config.size):
            raise ConfigError('Dataset resolution {}x{} does not match configured size {}'.format(
                dataset.resolution[0], dataset.resolution[1], config.size
            ))

        return dataset

    def write_reproducibility(self, config):
        # type: (RunConfig) -> None

        self.write_artifact(REPRODUCIBILITY_NAME, render_template(
            REPRODUCIBILITY_TEMPLATE,
            logger=self.logger,
            seed=config.seed,
            config_hash=config.config_hash,
            code_version=__version__,
            command=format_command_line([sys.argv])
        ))
