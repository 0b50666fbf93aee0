"""
Actions are pieces of workflow. Actions have a name and start/end time, and they are timed with
a monotonic clock, which makes them the timing primitive of the sampling benchmark as well.

.. code-block:: python

   with Action('train factor', tags={'factor': 'aux'}) as action:
      # do some work

      with Action('epoch', parent=action):
          # e.g. one pass over the dataset

   print(action.duration)

Actions form a tree - each has at most one parent - and each thread keeps its own stack of unfinished
actions, the top-most one being the "current" action of the thread.
"""

import threading
import time

from .core import PyrpixError
from .log import Logging

# Type annotations
# pylint: disable=unused-import, wrong-import-order
from typing import TYPE_CHECKING, cast, Any, Dict, List, Optional  # noqa

if TYPE_CHECKING:
    from .log import ContextAdapter  # noqa


class Action(object):
    """
    A piece of a workflow: it has a name, and starts and ends at some point of time.

    :param str label: a human-readable string which concisely represents the work done by the ``Action``.
    :param Action parent: parent ``Action``, if any. When not set, the current action of the thread is used.
    :param dict tags: additional key/value tags of this action, e.g. ``resolution=32``.
    :param ContextAdapter logger: logger to use for logging purposes.
    :param callable clock: source of time, :py:func:`time.perf_counter` by default. Must be monotonic.
    """

    _thread_actions = threading.local()

    @staticmethod
    def _action_stack():
        # type: () -> List[Action]

        if not hasattr(Action._thread_actions, 'stack'):
            Action._thread_actions.stack = []

        return cast(List['Action'], Action._thread_actions.stack)

    @staticmethod
    def current_action():
        # type: () -> Optional[Action]
        """
        Return the top-most - "current" - unfinished action of the current thread, or ``None``.
        """

        stack = Action._action_stack()

        return stack[-1] if stack else None

    # pylint: disable=too-many-arguments
    def __init__(self, label, parent=None, tags=None, logger=None, clock=None):
        # type: (str, Optional[Action], Optional[Dict[str, Any]], Optional[ContextAdapter], Optional[Any]) -> None

        self.label = label
        self.logger = logger or Logging.get_logger()
        self.parent = parent or Action.current_action()
        self.tags = tags or {}

        self._clock = clock or time.perf_counter

        self.started = self._clock()  # type: float
        self.finished = None  # type: Optional[float]

        Action._action_stack().append(self)

        self.logger.debug("action '{}', child of '{}', starts".format(
            self.label,
            self.parent.label if self.parent else '<no parent>'
        ))

    def __repr__(self):
        # type: () -> str

        return 'Action({}, parent={})'.format(
            self.label,
            self.parent.label if self.parent else 'none'
        )

    @property
    def duration(self):
        # type: () -> float
        """
        Seconds spent in the action so far, or in total once it finished.
        """

        end = self.finished if self.finished is not None else self._clock()

        return end - self.started

    def finish(self):
        # type: () -> None
        """
        Complete the action.
        """

        try:
            Action._action_stack().remove(self)

        except ValueError:
            raise PyrpixError('Cannot remove action {}, it is not active'.format(self))

        self.finished = self._clock()

        self.logger.debug("action '{}' finished after {:.6f} seconds".format(self.label, self.duration))

    def __enter__(self):
        # type: () -> Action

        return self

    def __exit__(self, *args, **kwargs):
        # type: (*Any, **Any) -> None

        self.finish()

    def set_tag(self, name, value):
        # type: (str, Any) -> None

        self.tags[name] = value
