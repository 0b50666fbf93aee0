"""
Logging of the library and of the CLI.

One ``pyrpix`` logger, wrapped by :py:class:`ContextAdapter` instances which stack contexts in front
of every message, e.g. the command being run or the factor being trained:

.. code-block:: python

   logger = Logging.setup_logger()

   factor_logger = FactorAdapter(CommandAdapter(logger, 'train'), 'cond')
   factor_logger.info('validation nll 3.1415 nats per image')

   # [12:00:00] [+] [train] [cond] validation nll 3.1415 nats per image

The CLI calls :py:meth:`Logging.setup_logger` again once options are parsed, to apply the requested
level, colors and log files.
"""

import atexit
import hashlib
import json
import logging
import os
import time
import traceback

import colorama
import jinja2
import tabulate

# Type annotations
# pylint: disable=unused-import,wrong-import-order,line-too-long
from typing import Any, AnyStr, Callable, Dict, Iterable, List, MutableMapping, Optional, Tuple, Union  # noqa
from types import TracebackType  # noqa
from mypy_extensions import Arg, DefaultNamedArg  # noqa

# Type definitions
# pylint: disable=invalid-name
ExceptionInfoType = Union[
    Tuple[Optional[type], Optional[BaseException], Optional[TracebackType]],  # returned by sys.exc_info()
    Tuple[None, None, None]
]

LoggingFunctionType = Callable[
    [
        Arg(str),
        DefaultNamedArg(ExceptionInfoType, 'exc_info'),  # noqa: F821
        DefaultNamedArg(Dict[str, Any], 'extra')  # noqa: F821
    ],
    None
]

ContextInfoType = Tuple[int, Any]


BLOB_HEADER = '---v---v---v---v---v---'
BLOB_FOOTER = '---^---^---^---^---^---'

# Default log level is logging.INFO or logging.DEBUG if PYRPIX_DEBUG environment variable is set
DEFAULT_LOG_LEVEL = logging.DEBUG if os.getenv('PYRPIX_DEBUG') else logging.INFO

# Even below DEBUG: per-step losses, per-level sampling progress. Lost unless sent to a file
# or the terminal runs with ``-v``.
VERBOSE = 5


#: Record attributes, and raw payloads of structured messages, copied into JSON records.
_JSON_RECORD_FIELDS = (
    'created', 'filename', 'funcName', 'levelname', 'levelno', 'lineno', 'module', 'msecs', 'name', 'process',
    'thread', 'threadName', 'raw_blob', 'raw_struct', 'raw_table', 'raw_intro'
)


_TRACEBACK_TEMPLATE = """
{%- set label = '{}:'.format(label) %}
---v---v---v---v---v--- {{ label | center(10) }} ---v---v---v---v---v---

At {{ stack[-1][0] }}:{{ stack[-1][1] }}, in {{ stack[-1][2] }}:

{{ exception.__class__.__module__ }}.{{ exception.__class__.__name__ }}: {{ exception }}

{% for filepath, lineno, fn, text in stack %}
  File "{{ filepath }}", line {{ lineno }}, in {{ fn }}
    {{ text | default('') }}
{% endfor %}
---^---^---^---^---^---^----------^---^---^---^---^---^---
"""


def _style(text, fg):
    # type: (str, str) -> str

    return '{}{}{}'.format(getattr(colorama.Fore, fg.upper()), text, colorama.Style.RESET_ALL)


def _json_dump(struct, **kwargs):
    # type: (Any, **Any) -> str

    # numpy scalars and other odd types end up as their repr()
    return json.dumps(struct, default=repr, **kwargs)


def format_blob(blob):
    # type: (AnyStr) -> str
    """
    Text framed by header and footer lines, so its exact boundaries survive in the log.
    """

    text = blob.decode('utf-8') if isinstance(blob, bytes) else blob

    return '\n'.join([BLOB_HEADER, text, BLOB_FOOTER])


def format_dict(dictionary):
    # type: (Any) -> str

    return _json_dump(dictionary, sort_keys=True, indent=4, separators=(',', ': '))


def format_table(table, **kwargs):
    # type: (Iterable[Iterable[Any]], **Any) -> str
    """
    Rows rendered by ``tabulate``; keyword arguments, e.g. ``headers``, are passed to it.
    """

    return tabulate.tabulate(table, **kwargs)


def _log_structured(writer, intro, text, raw_key, raw):
    # type: (LoggingFunctionType, str, str, str, Any) -> None

    # JSON formatter picks the raw payload from the record, terminal shows the text
    writer('{}:\n{}'.format(intro, text), extra={
        'raw_intro': intro,
        raw_key: raw
    })


def log_dict(writer, intro, data):
    # type: (LoggingFunctionType, str, Any) -> None
    """
    Log a structure, e.g. a validated run configuration, as indented JSON.

    :param callable writer: logging method to use, e.g. ``logger.debug``.
    :param str intro: label of the structure.
    :param data: structure to log.
    """

    _log_structured(writer, intro, format_dict(data), 'raw_struct', data)


def log_blob(writer, intro, blob):
    # type: (LoggingFunctionType, str, AnyStr) -> None
    """
    Log a block of text, e.g. a canonical configuration, between :py:data:`BLOB_HEADER` and
    :py:data:`BLOB_FOOTER`.
    """

    _log_structured(writer, intro, format_blob(blob), 'raw_blob', blob)


def log_table(writer, intro, table, **kwargs):
    # type: (LoggingFunctionType, str, Iterable[Iterable[Any]], **Any) -> None
    """
    Log rows as a table, e.g. the per-factor training summary. Keyword arguments go to :py:func:`format_table`.
    """

    _log_structured(writer, intro, format_table(table, **kwargs), 'raw_table', table)



def _move_contexts(src, dst):
    # type: (Dict[str, ContextInfoType], Dict[str, ContextInfoType]) -> None

    for name in list(src.keys()):
        if not name.startswith('ctx_'):
            continue

        # Drop leading "ctx_" during the move.
        dst[name[4:]] = src[name]
        del src[name]


def _hint(msg, keep=12):
    # type: (str, int) -> str

    first_line = msg.split('\n', 1)[0]

    if len(msg) <= keep:
        return msg

    if len(first_line) <= keep:
        return first_line

    return '{}...'.format(msg[:keep])


def _add_thread_context(contexts, record):
    # type: (Dict[str, ContextInfoType], logging.LogRecord) -> None

    thread_name = getattr(record, 'threadName', None)

    if thread_name is None or thread_name == 'MainThread':
        return

    contexts.setdefault('thread_name', (5, thread_name))


class ContextAdapter(logging.LoggerAdapter):
    """
    Logger adapter prepending prioritized contexts to messages, ``[value]`` each. Lower priority
    means closer to the start of the line.

    Adapters wrap each other - a factor adapter wraps a command adapter, which wraps the main logger - and
    every one of them merges its contexts into ``extra['contexts']`` of the message passing through.

    :param logger: logger or adapter to wrap.
    :param dict extra: extra keys of every message. Keys with the ``ctx_`` prefix become contexts instead.
    :param dict contexts: context names mapped to ``(priority, value)`` pairs.
    """

    def __init__(self,
                 logger,  # type: Union[logging.Logger, ContextAdapter]
                 extra=None,  # type: Optional[Dict[str, Any]]
                 contexts=None  # type: Optional[Dict[str, ContextInfoType]]
                ):  # noqa
        # type: (...) -> None

        extra = extra or {}

        self._contexts = dict(contexts or {})  # type: Dict[str, ContextInfoType]

        _move_contexts(extra, self._contexts)

        super(ContextAdapter, self).__init__(logger, extra)  # type: ignore  # base class expects just Logger

        self._logger = logger

    def addHandler(self, *args, **kwargs):
        # type: (*Any, **Any) -> None

        self._logger.addHandler(*args, **kwargs)

    def process(self, msg, kwargs):
        # type: (str, MutableMapping[str, Any]) -> Tuple[str, MutableMapping[str, Any]]

        # merge into the caller's `extra` instead of replacing it, contexts of outer adapters must survive
        extra = kwargs.get('extra') or {}

        if not isinstance(extra, dict):
            extra = {'legacy-extra': extra}

        contexts = extra.get('contexts', {})
        contexts.update(self._contexts)

        _move_contexts(extra, contexts)

        extra.update(self.extra)  # type: ignore  # `self.extra` does exist
        extra['contexts'] = contexts

        kwargs['extra'] = extra

        return msg, kwargs

    # pylint: disable=arguments-differ
    def log(self, level, msg, exc_info=None, extra=None):  # type: ignore  # incompatible with supertype
        # type: (int, str, Optional[ExceptionInfoType], Optional[Dict[str, Any]]) -> None

        msg, kwargs = self.process(msg, {'exc_info': exc_info, 'extra': extra})

        self._logger.log(level, msg, **kwargs)

    def isEnabledFor(self, level):
        # type: (int) -> Any

        return self._logger.isEnabledFor(level)

    def verbose(self, msg, exc_info=None, extra=None):
        # type: (str, Optional[ExceptionInfoType], Optional[Dict[str, Any]]) -> None
        """
        Log ``msg`` on ``VERBOSE`` level. A short ``DEBUG`` placeholder, sharing a tag with the full message,
        points readers of the debug output to the verbose one.
        """

        if not self.isEnabledFor(VERBOSE):
            return

        # per-step messages repeat a lot, the clock keeps tags apart
        tag = hashlib.md5('{}: {}'.format(time.time(), msg).encode('utf-8')).hexdigest()

        extra = dict(extra or {}, ctx_verbose_tag=(1000, 'VERBOSE {}'.format(tag)))

        self.log(logging.DEBUG, '{} (See "verbose" log for the actual message)'.format(_hint(msg)),
                 exc_info=exc_info, extra=dict(extra))
        self.log(VERBOSE, msg, exc_info=exc_info, extra=extra)

    # pylint: disable=arguments-differ
    def debug(self, msg, exc_info=None, extra=None):  # type: ignore
        # type: (str, Optional[ExceptionInfoType], Optional[Dict[str, Any]]) -> None

        self.log(logging.DEBUG, msg, exc_info=exc_info, extra=extra)

    # pylint: disable=arguments-differ
    def info(self, msg, exc_info=None, extra=None):   # type: ignore
        # type: (str, Optional[ExceptionInfoType], Optional[Dict[str, Any]]) -> None

        self.log(logging.INFO, msg, exc_info=exc_info, extra=extra)

    # pylint: disable=arguments-differ
    def warning(self, msg, exc_info=None, extra=None):   # type: ignore
        # type: (str, Optional[ExceptionInfoType], Optional[Dict[str, Any]]) -> None

        self.log(logging.WARNING, msg, exc_info=exc_info, extra=extra)

    # pylint: disable=arguments-differ
    def error(self, msg, exc_info=None, extra=None):   # type: ignore
        # type: (str, Optional[ExceptionInfoType], Optional[Dict[str, Any]]) -> None

        self.log(logging.ERROR, msg, exc_info=exc_info, extra=extra)

    exception = error  # type: ignore



class CommandAdapter(ContextAdapter):
    """
    Custom logger adapter, adding command name as a context.

    :param logger: parent logger this adapter modifies.
    :param str name: name of the CLI command.
    """

    # pylint: disable=too-few-public-methods

    def __init__(self, logger, name):
        # type: (Union[logging.Logger, ContextAdapter], str) -> None

        super(CommandAdapter, self).__init__(logger, contexts={'command_name': (10, name)})


class FactorAdapter(ContextAdapter):
    """
    Adds the name of the model factor (``aux``, ``cond``, ``level-1``, ...) being trained or evaluated.
    """

    # pylint: disable=too-few-public-methods

    def __init__(self, logger, factor):
        # type: (Union[logging.Logger, ContextAdapter], str) -> None

        super(FactorAdapter, self).__init__(logger, contexts={'factor': (20, factor)})


class LevelAdapter(ContextAdapter):
    """
    Adds the pyramid level being sampled.
    """

    # pylint: disable=too-few-public-methods

    def __init__(self, logger, level):
        # type: (Union[logging.Logger, ContextAdapter], int) -> None

        super(LevelAdapter, self).__init__(logger, contexts={'level': (30, 'level {}'.format(level))})


class LoggerMixin(object):
    """
    Gives instances the logging methods of ``logger``: ``self.info(...)`` and friends.
    """

    # pylint: disable=too-few-public-methods

    def __init__(self, logger, *args, **kwargs):
        # type: (ContextAdapter, *Any, **Any) -> None

        super(LoggerMixin, self).__init__(*args, **kwargs)  # type: ignore  # Too many arguments - it's fine...

        self.attach_logger(logger)

    def attach_logger(self, logger):
        # type: (ContextAdapter) -> None

        self.logger = logger

        self.log = logger.log
        self.verbose = logger.verbose
        self.debug = logger.debug
        self.info = logger.info
        self.warning = logger.warning
        self.error = logger.error
        self.exception = logger.exception



def _extract_stack(tb):
    # type: (Any) -> List[Tuple[str, int, str, Optional[str]]]

    return [
        (frame.filename, frame.lineno, frame.name, frame.line)
        for frame in traceback.extract_tb(tb)
    ]


class LoggingFormatter(logging.Formatter):
    """
    Terminal and debug file format, ``[HH:MM:SS] [level tag] [context] ... message``.

    :param bool colors: color the line by its level.
    :param bool log_tracebacks: append exception chains. The terminal shows them only when asked, or when
        running on ``DEBUG`` level or below; debug files always do.
    """

    #: Tags used to express loglevel.
    _level_tags = {
        VERBOSE: 'V',
        logging.DEBUG: 'D',
        logging.INFO: '+',
        logging.WARNING: 'W',
        logging.ERROR: 'E',
        logging.CRITICAL: 'C'
    }

    _level_color = {
        logging.INFO: 'green',
        logging.WARNING: 'yellow',
        logging.ERROR: 'red',
        logging.CRITICAL: 'red'
    }

    def __init__(self, colors=False, log_tracebacks=False, prettify=False):
        # type: (bool, bool, bool) -> None

        # pylint: disable=unused-argument
        super(LoggingFormatter, self).__init__()

        self.colors = colors
        self.log_tracebacks = log_tracebacks

    @staticmethod
    def _format_exception_chain(exc_info):
        # type: (Any) -> str
        """
        Render the exception and every exception found by following ``caused_by``.
        """

        template = jinja2.Template(_TRACEBACK_TEMPLATE)
        blocks = []

        label = 'Exception'

        while exc_info is not None and exc_info[1] is not None:
            exc = exc_info[1]
            stack = _extract_stack(exc_info[2])

            if stack:
                blocks.append(template.render(label=label, exception=exc, stack=stack))

            else:
                blocks.append('{}: {}.{}: {}'.format(label, exc.__class__.__module__, exc.__class__.__name__, exc))

            label = 'Caused by'
            exc_info = getattr(exc, 'caused_by', None)

        return '\n'.join(blocks).strip()

    def _wants_traceback(self):
        # type: () -> bool

        if self.log_tracebacks:
            return True

        return Logging.stderr_handler is not None and Logging.stderr_handler.level in (logging.DEBUG, VERBOSE)

    def format(self, record):
        # type: (logging.LogRecord) -> str

        contexts = dict(getattr(record, 'contexts', {}))

        _add_thread_context(contexts, record)

        parts = [
            '[{}]'.format(self.formatTime(record, datefmt='%H:%M:%S')),
            '[{}]'.format(self._level_tags.get(record.levelno, '?'))
        ]

        parts += ['[{}]'.format(value) for _, value in sorted(contexts.values(), key=lambda context: context[0])]
        parts.append(record.getMessage())

        if record.exc_info and record.exc_info != (None, None, None) and self._wants_traceback():
            parts.append('\n\n' + LoggingFormatter._format_exception_chain(record.exc_info))

        msg = ' '.join(parts)

        if self.colors and record.levelno in self._level_color:
            msg = _style(msg, self._level_color[record.levelno])

        return msg



class JSONLoggingFormatter(logging.Formatter):
    """
    One JSON object per record: record attributes, contexts, raw payloads of ``log_dict`` and friends,
    and the exception chain.
    """

    def __init__(self, colors=False, log_tracebacks=False, prettify=False):
        # type: (bool, bool, bool) -> None
        # pylint: disable=unused-argument

        super(JSONLoggingFormatter, self).__init__()

        self._emit = format_dict if prettify else _json_dump  # type: Callable[..., str]

    @staticmethod
    def _serialize_exception(exc, trace):
        # type: (BaseException, Any) -> Dict[str, Any]

        return {
            'exception': {
                'class': '{}.{}'.format(exc.__class__.__module__, exc.__class__.__name__),
                'message': str(exc)
            },
            'traceback': [
                dict(zip(('filename', 'lineno', 'fnname', 'text'), frame)) for frame in _extract_stack(trace)
            ]
        }

    def format(self, record):
        # type: (logging.LogRecord) -> str

        serialized = {
            field: getattr(record, field, None) for field in _JSON_RECORD_FIELDS
        }  # type: Dict[str, Any]

        serialized['message'] = record.getMessage()

        contexts = dict(getattr(record, 'contexts', {}))

        _add_thread_context(contexts, record)

        serialized['contexts'] = {
            name: {'priority': priority, 'value': value} for name, (priority, value) in contexts.items()
        }

        if record.exc_info:
            chain = []

            exc_info = record.exc_info  # type: Any

            while exc_info is not None and exc_info[1] is not None:
                chain.append(JSONLoggingFormatter._serialize_exception(exc_info[1], exc_info[2]))
                exc_info = getattr(exc_info[1], 'caused_by', None)

            serialized['caused_by'] = chain

        return self._emit(serialized)


class Logging(object):
    """
    Owner of the single ``pyrpix`` logger and its handlers. Class attributes only, never instantiated.
    """

    #: What :py:meth:`get_logger` hands out.
    adapted_logger = None  # type: Optional[ContextAdapter]

    #: The ``pyrpix`` logger wrapped by ``adapted_logger``.
    logger = None  # type: Optional[logging.Logger]

    stderr_handler = None  # type: Optional[logging.StreamHandler]

    debug_file_handler = None  # type: Optional[logging.FileHandler]
    json_file_handler = None  # type: Optional[logging.FileHandler]

    @staticmethod
    def get_logger():
        # type: () -> ContextAdapter

        if Logging.logger is None:
            Logging.setup_logger()

        if Logging.adapted_logger is None:
            assert Logging.logger is not None

            Logging.adapted_logger = ContextAdapter(Logging.logger)

        return Logging.adapted_logger

    @staticmethod
    def _file_handler(filepath, level, formatter):
        # type: (str, int, Union[LoggingFormatter, JSONLoggingFormatter]) -> logging.FileHandler

        handler = logging.FileHandler(filepath, 'w')
        handler.setLevel(level)
        handler.setFormatter(formatter)

        def _close():
            # type: () -> None

            handler.flush()
            handler.close()

            if Logging.logger is not None:
                Logging.logger.removeHandler(handler)

        atexit.register(_close)

        return handler

    # pylint: disable=too-many-arguments
    @staticmethod
    def setup_logger(level=DEFAULT_LOG_LEVEL,  # type: int
                     debug_file=None,  # type: Optional[str]
                     json_file=None,  # type: Optional[str]
                     json_output=False,  # type: bool
                     colors=False,  # type: bool
                     show_traceback=False  # type: bool
                    ):  # noqa
        # type: (...) -> ContextAdapter

        """
        Install handlers of the ``pyrpix`` logger, or adjust those already installed.

        The first call, made before options are known, leaves just the terminal handler on ``INFO``.
        Once options are parsed, :py:class:`pyrpix.core.Session` calls it again with what was asked for.
        Log files are opened once, repeated calls do not replace them.

        :param int level: level of terminal output.
        :param str debug_file: file receiving ``DEBUG`` and above, with tracebacks.
        :param str json_file: file receiving everything, one JSON object per message.
        :param bool json_output: terminal output as JSON as well.
        :param bool colors: colorize terminal output.
        :param bool show_traceback: print tracebacks on the terminal.
        :rtype: ContextAdapter
        """

        if Logging.logger is None:
            Logging.logger = logging.getLogger('pyrpix')
            Logging.logger.propagate = False
            Logging.logger.setLevel(VERBOSE)

            Logging.stderr_handler = logging.StreamHandler()
            Logging.logger.addHandler(Logging.stderr_handler)

        assert Logging.stderr_handler is not None

        terminal_formatter = JSONLoggingFormatter() if json_output \
            else LoggingFormatter(colors=colors, log_tracebacks=show_traceback)  # type: logging.Formatter

        Logging.stderr_handler.setFormatter(terminal_formatter)
        Logging.stderr_handler.setLevel(level or logging.INFO)

        logger = Logging.get_logger()

        if debug_file and Logging.debug_file_handler is None:
            Logging.debug_file_handler = Logging._file_handler(
                debug_file, logging.DEBUG, LoggingFormatter(log_tracebacks=True)
            )
            logger.addHandler(Logging.debug_file_handler)

        if json_file and Logging.json_file_handler is None:
            Logging.json_file_handler = Logging._file_handler(json_file, VERBOSE, JSONLoggingFormatter())
            logger.addHandler(Logging.json_file_handler)

        logger.debug('logging: level={} debug-file={} json-file={} traceback={}'.format(
            logging.getLevelName(level), debug_file, json_file, show_traceback
        ))

        return logger


logging.addLevelName(VERBOSE, 'VERBOSE')
