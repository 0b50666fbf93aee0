"""
Commands of the ``pyrpix`` tool, one per verb.
"""

import collections

from .bench import Bench
from .colorize import Colorize
from .eval import Eval
from .sample import Sample
from .superres import Superres
from .toy import Toy
from .train import Train

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import Dict, Type  # noqa
from ..core import Command  # noqa


COMMANDS = collections.OrderedDict(
    (klass.name, klass) for klass in (Train, Sample, Colorize, Superres, Eval, Bench, Toy)
)  # type: collections.OrderedDict[str, Type[Command]]
