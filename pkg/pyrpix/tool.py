"""
Heart of the "pyrpix" script. Referred to by setuptools' entry point.
"""

from __future__ import print_function

import functools
import logging
import signal
import sys
import traceback

import tabulate

from .core import ConfigError, Failure, Session, EXIT_CODE_UNKNOWN
from .commands import COMMANDS
from .log import Logging, LoggingFormatter
from .utils import cached_property, format_command_line, normalize_path

# Type annotations
# pylint: disable=unused-import,wrong-import-order,ungrouped-imports
from typing import cast, Any, Callable, List, Optional, NoReturn, Union  # noqa
from types import FrameType  # noqa
from .core import Command  # noqa
from .log import ContextAdapter  # noqa


#: Exit code of interrupted runs.
EXIT_CODE_INTERRUPTED = 130


def handle_exc(func):
    # type: (Callable[..., Any]) -> Callable[..., Any]

    @functools.wraps(func)
    def wrapped(self, *args, **kwargs):
        # type: (Pyrpix, *Any, **Any) -> Any

        # pylint: disable=broad-except, protected-access

        try:
            return func(self, *args, **kwargs)

        except (SystemExit, KeyboardInterrupt, Exception):
            self._handle_failure(Failure(self.command, sys.exc_info()))

    return wrapped


class Pyrpix(object):
    def __init__(self):
        # type: () -> None

        self.session = None  # type: Optional[Session]
        self.command = None  # type: Optional[Command]

    @cached_property
    def _version(self):
        # type: () -> str

        # pylint: disable=no-self-use
        from .version import __version__

        return __version__.strip()

    def log_cmdline(self, argv):
        # type: (List[str]) -> None

        assert self.session is not None
        self.session.info('command-line:\n{}'.format(format_command_line([[sys.argv[0]] + argv])))

    @cached_property
    def _exit_logger(self):
        # type: () -> Union[logging.Logger, ContextAdapter]

        # pylint: disable=no-self-use

        try:
            return Logging.get_logger()

        # pylint: disable=broad-except
        except Exception:
            logging.basicConfig(level=logging.DEBUG)

            fallback = logging.getLogger('pyrpix.exit')
            fallback.warning('logging setup failed, using plain logging')

            return fallback

    def _quit(self, exit_status):
        # type: (int) -> NoReturn

        if exit_status == 0:
            self._exit_logger.debug('exit status 0')

        else:
            self._exit_logger.error('exit status {}'.format(exit_status))

        sys.exit(exit_status)

    def _handle_failure_core(self, failure):
        # type: (Failure) -> NoReturn

        logger = self._exit_logger

        exc = failure.exception

        assert exc is not None

        if isinstance(exc, SystemExit) and exc.code == 0:
            self._quit(0)

        if isinstance(exc, KeyboardInterrupt):
            logger.warning('Interrupted')

            self._quit(EXIT_CODE_INTERRUPTED)

        reason = str(exc) or repr(exc)

        if failure.command:
            logger.error("Command '{}' failed: {}".format(failure.command.name, reason), exc_info=failure.exc_info)

        else:
            logger.error('Run failed: {}'.format(reason), exc_info=failure.exc_info)

        self._quit(failure.exit_code)

    def _handle_failure(self, failure):
        # type: (Failure) -> NoReturn

        try:
            self._handle_failure_core(failure)

        # pylint: disable=broad-except
        except Exception:
            # logging itself may be broken here, stderr only
            print('\nFailed while reporting a failure:\n', file=sys.stderr)

            try:
                # pylint: disable=protected-access
                print(LoggingFormatter._format_exception_chain(sys.exc_info()), file=sys.stderr)

            # pylint: disable=broad-except
            except Exception:
                traceback.print_exc()

            sys.exit(EXIT_CODE_UNKNOWN)

    @handle_exc
    def setup(self, argv):
        # type: (List[str]) -> None

        # SIGTERM ends the run the same way Ctrl+C does.
        orig_sigint_handler = signal.getsignal(signal.SIGINT)

        def _signal_handler(signum, frame):
            # type: (int, FrameType) -> Any

            Logging.get_logger().warning('Interrupted by SIGTERM')

            if callable(orig_sigint_handler):
                return orig_sigint_handler(signum, frame)

            raise KeyboardInterrupt()

        self.session = session = Session()

        signal.signal(signal.SIGTERM, _signal_handler)

        session.parse_args(argv)

        if session.option('version'):
            session.info('pyrpix {}'.format(self._version))
            sys.exit(0)

    @handle_exc
    def check_options(self):
        # type: () -> None

        session = self.session
        assert session is not None

        remainder = session.option('command') or []

        if not remainder or remainder[0] in ('-h', '--help', 'help'):
            sys.stdout.write('Available commands\n\n{}\n'.format(tabulate.tabulate(
                [[name, klass.description] for name, klass in COMMANDS.items()],
                ['Command', 'Description'],
                tablefmt='simple'
            )))

            if not remainder:
                raise ConfigError('No command specified')

            sys.exit(0)

        name, argv = remainder[0], remainder[1:]

        if name not in COMMANDS:
            raise ConfigError("Unknown command '{}', available: {}".format(name, ', '.join(COMMANDS)))

        self.command = command = COMMANDS[name](session)

        if session.option('config'):
            command.parse_config([normalize_path(session.option('config'))])

        command.parse_args(argv)

    def run_command(self, argv):
        # type: (List[str]) -> Optional[Failure]

        assert self.command is not None

        self.log_cmdline(argv)

        return self.command.run()

    def main(self, argv=None):
        # type: (Optional[List[str]]) -> None

        argv = list(sys.argv[1:] if argv is None else argv)

        self.setup(argv)
        self.check_options()

        failure = self.run_command(argv)

        if failure:
            self._handle_failure(failure)

        self._quit(0)


def main():
    # type: () -> None

    app = Pyrpix()
    app.main()
