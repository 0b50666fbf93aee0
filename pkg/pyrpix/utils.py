"""
Small helpers shared by commands and the model code: option value parsing, threads, templates and files.
"""

import io
import os
import shlex
import tempfile
import threading

import jinja2

from .core import ConfigError, DataError, PyrpixError
from .log import Logging, ContextAdapter, LoggerMixin, log_blob, log_dict

# Type annotations
# pylint: disable=unused-import, wrong-import-order
from typing import cast, Any, Callable, Dict, List, Optional, Tuple, Union  # noqa


#: Spellings of an enabled switch, compared case-insensitively.
TRUE_VALUES = ('yes', 'true', '1', 'y', 'on')


def normalize_bool_option(option_value):
    # type: (Union[str, bool, None]) -> bool

    """
    Read a switch given as text, e.g. ``--cache=yes`` or ``cache = off`` in a config file. Anything
    but :py:data:`TRUE_VALUES` means ``False``.
    """

    return str(option_value).strip().lower() in TRUE_VALUES


def normalize_multistring_option(option_value, separator=','):
    # type: (Union[str, List[str], None], str) -> List[str]

    """
    Split ``9, 12`` or ``['9', '12,15']`` into separate stripped items; empty items are dropped.
    """

    if option_value is None:
        return []

    pieces = [option_value] if isinstance(option_value, str) else option_value

    items = []  # type: List[str]

    for piece in pieces:
        items += [item.strip() for item in piece.split(separator) if item.strip()]

    return items


def normalize_int_list_option(option_value, name):
    # type: (Union[str, List[str], List[int], None], str) -> List[int]

    """
    Like :py:func:`normalize_multistring_option`, but every item must be an integer. Lists of integers
    pass unchanged.

    :param str name: option name, used in the error message.
    :raises ConfigError: when an item is not an integer.
    """

    if isinstance(option_value, (list, tuple)) and all(isinstance(item, int) for item in option_value):
        return list(cast(List[int], option_value))

    try:
        return [int(item) for item in normalize_multistring_option(cast(Union[str, List[str], None], option_value))]

    except ValueError as exc:
        raise ConfigError("Option '{}' expects comma-separated integers: {}".format(name, exc))


def normalize_path(path):
    # type: (str) -> str

    """
    Absolute path, with ``~`` expanded.
    """

    return os.path.abspath(os.path.expanduser(path))


class ThreadAdapter(ContextAdapter):
    """
    Adds name of the thread, e.g. the factor being trained, to messages.
    """

    def __init__(self, logger, thread):
        # type: (ContextAdapter, threading.Thread) -> None

        super(ThreadAdapter, self).__init__(logger, {'ctx_thread_name': (5, thread.name)})


class WorkerThread(LoggerMixin, threading.Thread):
    """
    Thread running a single call. When done, ``result`` holds what the call returned, or the exception
    it raised.

    :param ContextAdapter logger: parent logger.
    :param callable fn: the job.
    :param tuple fn_args: positional arguments of ``fn``.
    :param dict fn_kwargs: keyword arguments of ``fn``.
    """

    def __init__(self, logger, fn, fn_args=None, fn_kwargs=None, **kwargs):
        # type: (ContextAdapter, Callable[..., Any], Optional[Tuple[Any, ...]], Optional[Dict[str, Any]], **Any) -> None

        threading.Thread.__init__(self, **kwargs)
        LoggerMixin.__init__(self, ThreadAdapter(logger, self))

        self._job = (fn, fn_args or (), fn_kwargs or {})

        self.result = None  # type: Union[Exception, Any]

    def run(self):
        # type: () -> None

        fn, args, kwargs = self._job

        self.debug('job started')

        # pylint: disable=broad-except
        try:
            self.result = fn(*args, **kwargs)

        except Exception as exc:
            self.error('job failed: {}'.format(exc))
            self.result = exc

        else:
            self.debug('job finished')


def run_workers(logger, jobs):
    # type: (ContextAdapter, List[Tuple[str, Callable[..., Any], Tuple[Any, ...]]]) -> List[Any]

    """
    Run each job in its own :py:class:`WorkerThread`, wait for all of them, and return their results
    in the order of ``jobs``. The first exception raised by any job is re-raised.

    :param list jobs: ``(name, fn, args)`` triples.
    """

    threads = [
        WorkerThread(logger, fn, fn_args=args, name=name)
        for name, fn, args in jobs
    ]

    for thread in threads:
        thread.start()

    for thread in threads:
        thread.join()

    failed = [thread.result for thread in threads if isinstance(thread.result, Exception)]

    if failed:
        raise failed[0]

    return [thread.result for thread in threads]


class cached_property(object):
    # pylint: disable=invalid-name,too-few-public-methods
    """
    Like ``property``, but the method runs once; its value then shadows the descriptor in the instance
    ``__dict__``. ``del obj.attr`` forgets the value.
    """

    def __init__(self, method):
        # type: (Callable[..., Any]) -> None

        self._method = method
        self.__doc__ = method.__doc__

    def __get__(self, obj, cls):
        # type: (Any, Any) -> Any

        # instances only
        assert obj is not None

        value = obj.__dict__[self._method.__name__] = self._method(obj)

        return value


def format_command_line(cmdline):
    # type: (List[List[str]]) -> str

    """
    Shell-quoted command line, one group of arguments per line, continuation lines indented.

    :param list cmdline: groups of arguments, the first one being the command.
    """

    lines = [' '.join(shlex.quote(str(arg)) for arg in group) for group in cmdline]

    return '\n    '.join(lines)


def render_template(template, logger=None, **kwargs):
    # type: (Union[str, jinja2.Template], Optional[ContextAdapter], **Any) -> str

    """
    Render a Jinja2 template, given as a :py:class:`jinja2.Template` or as its source. Trailing newline
    of the source is kept.

    :raises PyrpixError: when rendering failed.
    """

    logger = logger or Logging.get_logger()

    try:
        if isinstance(template, str):
            log_blob(logger.debug, 'rendering template', template)
            template = jinja2.Template(template, keep_trailing_newline=True)

        log_dict(logger.verbose, 'template variables', kwargs)

        return template.render(**kwargs)

    except Exception as exc:
        raise PyrpixError('Cannot render template: {}'.format(exc))


def write_atomically(path, payload):
    # type: (str, Union[str, bytes]) -> None

    """
    Write ``payload`` into ``path`` so that readers never see a partial file: write a temporary
    file in the same directory, then rename it.

    :raises DataError: when writing failed.
    """

    directory = os.path.dirname(os.path.abspath(path))

    data = payload.encode('utf-8') if isinstance(payload, str) else payload

    tmp_path = None  # type: Optional[str]

    try:
        if not os.path.isdir(directory):
            os.makedirs(directory)

        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')

        with io.open(fd, 'wb') as f:
            f.write(data)

        os.replace(tmp_path, path)

    except (IOError, OSError) as exc:
        if tmp_path is not None and os.path.exists(tmp_path):
            os.unlink(tmp_path)

        raise DataError("Cannot write '{}': {}".format(path, exc))
