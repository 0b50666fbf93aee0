"""
Core of ``pyrpix``: errors, the options machinery shared by the session and its commands, and
the :py:class:`Command` base class every CLI verb derives from.
"""

import argparse
import collections
import configparser
import logging
import os
import sys
import textwrap

from .log import Logging, LoggerMixin, ContextAdapter, CommandAdapter, log_dict, VERBOSE

# Type annotations
# pylint: disable=unused-import,wrong-import-order
from typing import cast, overload, Any, Callable, Dict, Iterable, List, Optional, Tuple, Union  # noqa
from .log import ExceptionInfoType  # noqa


#: Exit codes, by error category.
EXIT_CODES = {
    'config': 2,
    'io': 3,
    'numeric': 4
}

#: Exit code of failures not raised by ``pyrpix`` itself.
EXIT_CODE_UNKNOWN = 1


class PyrpixError(Exception):
    """
    Base of errors ``pyrpix`` raises on purpose. The category decides the exit code.

    :param str message: what happened.
    :param tuple caused_by: :py:func:`sys.exc_info` of the exception being handled when this one was
        raised. Taken from the interpreter when not given.

    :ivar tuple caused_by: the cause, ``None`` when there was none.
    :cvar str category: ``config``, ``io`` or ``numeric``.
    """

    category = None  # type: Optional[str]

    def __init__(self, message, caused_by=None, **kwargs):
        # type: (str, Optional[ExceptionInfoType], **Any) -> None

        super(PyrpixError, self).__init__(message, **kwargs)

        self.message = message

        if caused_by is None:
            caused_by = sys.exc_info()

        self.caused_by = None if caused_by == (None, None, None) else caused_by

    @property
    def exit_code(self):
        # type: () -> int

        return EXIT_CODES.get(self.category or '', EXIT_CODE_UNKNOWN)


class ConfigError(PyrpixError):
    """
    Invalid configuration: unknown keys, values out of range, incompatible knobs.
    """

    category = 'config'


class DataError(PyrpixError):
    """
    Reading or writing files failed: manifests, images, checkpoints.
    """

    category = 'io'


class NumericError(PyrpixError):
    """
    Numeric contract violated - non-finite parameters, bad tensor usage.
    """

    category = 'numeric'


class TensorError(NumericError):
    """
    Misuse of the tensor library, e.g. backward from a non-scalar loss.
    """


class ShapeError(TensorError):
    """
    Tensor shapes do not match.

    :param str message: what happened.
    :param str axis: name of the offending axis, e.g. ``channels`` or ``height``.
    """

    def __init__(self, message, axis=None, **kwargs):
        # type: (str, Optional[str], **Any) -> None

        if axis is not None:
            message = '{} (axis: {})'.format(message, axis)

        super(ShapeError, self).__init__(message, **kwargs)

        self.axis = axis


class CacheDesyncError(NumericError):
    """
    Activation cache was asked for a position it is not ready for.
    """


class CheckpointError(DataError):
    """
    Checkpoint is damaged, or does not belong to the requested architecture.
    """


class Failure(object):
    # pylint: disable=too-few-public-methods

    """
    What went wrong, handed to :py:meth:`Command.destroy` when the command did not finish.

    :param Command command: failed command, ``None`` when the session itself failed.
    :param tuple exc_info: the triple of :py:func:`sys.exc_info`.

    :ivar Exception exception: the raised exception, ``None`` when ``exc_info`` is empty.
    :ivar int exit_code: what the process exits with.
    """

    def __init__(self, command, exc_info):
        # type: (Optional[Command], ExceptionInfoType) -> None

        self.command = command
        self.exc_info = exc_info

        self.exception = exc_info[1] if exc_info else None

        if isinstance(self.exception, PyrpixError):
            self.exit_code = self.exception.exit_code

        else:
            self.exit_code = EXIT_CODE_UNKNOWN


class ArgumentParser(argparse.ArgumentParser):
    """
    :py:class:`argparse.ArgumentParser` raising :py:class:`ConfigError` instead of printing usage and exiting.
    """

    def error(self, message):  # type: ignore
        # type: (str) -> None

        raise ConfigError('Invalid command-line options: {}'.format(message))


def option_help(txt):
    # type: (str) -> str

    """
    Reduce a docstring-like, possibly multi-line help text to a single line.
    """

    return ' '.join(line.strip() for line in textwrap.dedent(txt).strip().splitlines() if line.strip())


#: One option of a :py:class:`Configurable`: identifying name, command-line flags, ``add_argument``
#: keywords and the name of its help group.
OptionSpec = collections.namedtuple('OptionSpec', ['name', 'flags', 'params', 'group'])


def _option_groups(options):
    # type: (Any) -> List[Tuple[Optional[str], Dict[Any, Dict[str, Any]]]]

    if isinstance(options, dict):
        return [(None, options)]

    return [(None, group) if isinstance(group, dict) else (group[0], group[1]) for group in options]


def _option_flags(names, raw=False):
    # type: (Any, bool) -> Tuple[str, Tuple[str, ...]]

    if isinstance(names, str):
        return names, ((names,) if raw else ('--{}'.format(names),))

    if not isinstance(names, tuple) or len(names) < 2 \
            or not isinstance(names[0], str) or len(names[0]) != 1 \
            or not all(isinstance(name, str) and len(name) >= 2 for name in names[1:]):
        raise ConfigError("Option must be named by a string or by (<letter>, <string>, ...), not '{}'".format(names))

    return names[1], ('-{}'.format(names[0]),) + tuple('--{}'.format(name) for name in names[1:])


class Configurable(LoggerMixin, object):
    """
    Base class of :py:class:`Session` and :py:class:`Command`: named options, set by a configuration file,
    by the command line, or both. Command line wins.

    :ivar dict _config: option values by option name. Unset options are ``None``.
    """

    options = {}  # type: Union[Dict[Any, Any], List[Any]]
    """
    Accepted options. Keys are long names, or ``(<letter>, <long name>, ...)`` tuples, without leading dashes;
    values are keyword arguments of :py:meth:`argparse.ArgumentParser.add_argument`, plus ``raw`` for
    a positional argument. The first long name identifies the option.

    Options shown under a heading are listed as ``(<heading>, <options>)`` pairs::

        options = [
            ('Output', {
                ('o', 'output'): {'help': 'Where to write.'}
            }),
            {
                'input': {'help': 'What to read.'}
            }
        ]
    """

    required_options = []  # type: Iterable[str]
    """Options without which the command cannot run."""

    name = None  # type: Optional[str]

    def __repr__(self):
        # type: () -> str

        return '<{} {}:{}>'.format(self.__class__.__name__, self.name, id(self))

    def __init__(self, logger):
        # type: (ContextAdapter) -> None

        super(Configurable, self).__init__(logger)

        self._specs = self.option_specs()

        self._config = {spec.name: None for spec in self._specs}  # type: Dict[str, Any]

        # values read from configuration files become defaults of the command line
        self._file_values = {}  # type: Dict[str, Any]

    @classmethod
    def option_specs(cls):
        # type: () -> List[OptionSpec]

        specs = []

        for group, options in _option_groups(cls.options):
            for names, params in sorted(options.items(), key=lambda item: _option_flags(item[0])[0]):
                params = dict(params)

                name, flags = _option_flags(names, raw=params.pop('raw', False))

                if 'help' in params:
                    params['help'] = option_help(params['help'])

                specs.append(OptionSpec(name, flags, params, group))

        return specs

    def parse_config(self, paths):
        # type: (List[str]) -> None

        """
        Read flat ``key = value`` files. Keys are long option names, with dashes or underscores. Files
        that do not exist are skipped, keys no option claims are an error.

        :param list paths: files to read, later files override earlier ones.
        """

        parser = configparser.ConfigParser(interpolation=None)

        for path in paths:
            if not os.path.exists(path):
                self.debug("configuration file '{}' does not exist".format(path))
                continue

            try:
                with open(path, 'r') as f:
                    parser.read_string('[default]\n' + f.read(), source=path)

            except (IOError, OSError) as exc:
                raise DataError("Cannot read configuration file '{}': {}".format(path, exc))

            except configparser.Error as exc:
                raise ConfigError("Cannot parse configuration file '{}': {}".format(path, exc))

            self.debug("read configuration file '{}'".format(path))

        if not parser.has_section('default'):
            return

        keys = set(parser.options('default'))

        for spec in self._specs:
            key = next((key for key in (spec.name, spec.name.replace('-', '_')) if key in keys), None)

            if key is None:
                continue

            keys.discard(key)

            if spec.params.get('action') in ('store_true', 'store_false'):
                getter = parser.getboolean  # type: Callable[..., Any]

            else:
                getter = parser.get

            try:
                value = getter('default', key)

                if 'type' in spec.params:
                    value = spec.params['type'](value)

            except ValueError as exc:
                raise ConfigError("Configuration file sets invalid '{}': {}".format(spec.name, exc))

            self._file_values[spec.name] = self._config[spec.name] = value

        if keys:
            raise ConfigError('Unknown configuration keys: {}'.format(', '.join(sorted(keys))))

        log_dict(self.debug, 'options from configuration files', self._file_values)

    def args_parser(self, **kwargs):
        # type: (**Any) -> ArgumentParser

        """
        Command-line parser of this object's options, values from configuration files serving as defaults.

        :param dict kwargs: passed to :py:class:`ArgumentParser`.
        """

        parser = ArgumentParser(**kwargs)
        groups = {}  # type: Dict[str, Any]

        for spec in self._specs:
            if spec.group is None:
                target = parser

            else:
                if spec.group not in groups:
                    groups[spec.group] = parser.add_argument_group(spec.group)

                target = groups[spec.group]

            params = dict(spec.params)

            if spec.name in self._file_values:
                params['default'] = self._file_values[spec.name]

            target.add_argument(*spec.flags, **params)

        return parser

    def parse_args(self, args, **kwargs):
        # type: (List[str], **Any) -> None

        """
        Parse command-line arguments into the option store.

        :param list args: arguments, without the program name.
        """

        kwargs.setdefault('prog', self.name)

        parsed = self.args_parser(**kwargs).parse_args(args)

        for spec in self._specs:
            self._config[spec.name] = getattr(parsed, spec.params.get('dest', spec.name.replace('-', '_')))

        log_dict(self.debug, 'options', self._config)

    def check_required_options(self):
        # type: () -> None

        missing = [name for name in self.required_options if self._config.get(name) is None]

        if missing:
            raise ConfigError('Missing required options: {}'.format(', '.join(
                '--{}'.format(name) for name in missing
            )))

    # pylint: disable=function-redefined

    @overload
    def option(self, name):
        # type: (str) -> Any

        pass

    @overload  # noqa
    def option(self, *names):
        # type: (*str) -> List[Any]

        pass

    def option(self, *names):  # type: ignore  # noqa
        """
        Values of options. A single name gives its value, more names give a tuple. Unknown options are ``None``.
        """

        if not names:
            raise ConfigError('Specify at least one option')

        values = tuple(self._config.get(name) for name in names)

        return values[0] if len(values) == 1 else values


class Command(Configurable):
    """
    Base class of all ``pyrpix`` commands.

    :param Session session: ``Session`` instance running the command.
    """

    description = None  # type: Optional[str]
    """Short command description, displayed in the command listing."""

    def __init__(self, session):
        # type: (Session) -> None

        super(Command, self).__init__(CommandAdapter(session.logger, self.name or 'command'))

        self.session = session

    def sanity(self):
        # type: () -> None

        # pylint: disable-msg=no-self-use
        """
        Checks before execution: validate options, build the run configuration. Nothing
        expensive happens here.
        """

    def execute(self):
        # type: () -> None

        # pylint: disable-msg=no-self-use
        """
        Do the actual work of the command.
        """

    def destroy(self, failure=None):
        # type: (Optional[Failure]) -> None

        # pylint: disable-msg=no-self-use,unused-argument
        """
        Run on exit, also when the command failed.

        :param Failure failure: if set, carries information about failure that killed the command.
        """

    def run(self):
        # type: () -> Optional[Failure]

        """
        Run the whole command lifecycle and return a failure, if any.
        """

        failure = None  # type: Optional[Failure]

        # pylint: disable=broad-except
        try:
            self.check_required_options()
            self.sanity()
            self.execute()

        except (SystemExit, KeyboardInterrupt, Exception):
            failure = Failure(self, sys.exc_info())

        try:
            self.destroy(failure=failure)

        except (SystemExit, KeyboardInterrupt, Exception):
            if failure is None:
                failure = Failure(self, sys.exc_info())

            else:
                self.exception('Exception raised when destroying command', exc_info=sys.exc_info())

        return failure


class Session(Configurable):
    """
    Global, command-independent state of a ``pyrpix`` run: output control and the optional
    key=value configuration file that feeds the command options.
    """

    name = 'pyrpix'

    options = [
        ('Global options', {
            ('V', 'version'): {
                'help': 'Print version and exit.',
                'action': 'store_true'
            },
            ('C', 'config'): {
                'help': 'Flat key=value file with command options; command-line wins over the file.',
                'metavar': 'FILE',
                'default': None
            }
        }),
        ('Output control', {
            ('c', 'colors'): {
                'help': 'Colored terminal output.',
                'action': 'store_true'
            },
            ('d', 'debug'): {
                'help': 'Show debugging messages on the terminal.',
                'action': 'store_true'
            },
            ('j', 'json-file'): {
                'help': 'Write every message into this file, one JSON object per line.',
                'default': None
            },
            ('J', 'json-output'): {
                'help': 'Terminal output as JSON objects.',
                'action': 'store_true'
            },
            ('o', 'debug-file'): {
                'help': 'Write debugging messages, with tracebacks, into this file.'
            },
            ('q', 'quiet'): {
                'help': 'Show only warnings and errors.',
                'action': 'store_true'
            },
            'show-traceback': {
                'help': 'Print tracebacks of failures on the terminal.',
                'action': 'store_true',
                'default': False
            },
            ('v', 'verbose'): {
                'help': 'Show per-step messages on the terminal, even more than ``-d``.',
                'action': 'store_true'
            }
        }),
        {
            'command': {
                'raw': True,
                'help': 'Command and its options, passed after global options.',
                'nargs': argparse.REMAINDER
            }
        }
    ]

    def __init__(self):
        # type: () -> None

        super(Session, self).__init__(Logging.setup_logger())

    def parse_args(self, args, **kwargs):
        # type: (List[str], **Any) -> None

        kwargs.setdefault('description', 'Autoregressive image models with auxiliary variables.')

        super(Session, self).parse_args(args, **kwargs)

        if self.option('verbose'):
            level = VERBOSE

        elif self.option('debug'):
            level = logging.DEBUG

        elif self.option('quiet'):
            level = logging.WARNING

        else:
            level = logging.INFO

        self.attach_logger(Logging.setup_logger(
            level=level,
            debug_file=self.option('debug-file'),
            json_file=self.option('json-file'),
            json_output=self.option('json-output'),
            colors=self.option('colors'),
            show_traceback=self.option('show-traceback')
        ))
