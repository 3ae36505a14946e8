"""
Pieces shared by the command-line scripts: argument parsing, exit codes and the logged session.
"""
import os
import sys
import time
import argparse
from contextlib import contextmanager

from bdl_utils.utils import utils
from bdl_utils.autodiff.tensor import NumericError, ShapeError
from bdl_utils.analysis.datasets import DataError
from bdl_utils.utils.config_parser import ConfigError, ParseError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class ArgumentParser(argparse.ArgumentParser):
    """An argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def add_common_args(parser, command, config=True, preset=True):
    """Adds the flags the commands share: --config, --preset, --seed, --quiet and -l/--log."""
    if config:
        parser.add_argument(
            '-c',
            '--config',
            type=str,
            help='A key = value configuration file. Its settings override the preset and are overridden \
                by explicit command-line flags.'
        )
    if config and preset:
        parser.add_argument(
            '-p',
            '--preset',
            type=str,
            help='A packaged preset (xsinx-paper, moons-paper or membrane-style).'
        )
    parser.add_argument(
        '--seed',
        type=int,
        help='Seed of the random number generator.'
    )
    parser.add_argument(
        '-q',
        '--quiet',
        action='store_true',
        help='Do not print to the terminal. Everything is still written to the log file.'
    )
    parser.add_argument(
        '-l',
        '--log',
        type=str,
        default=f'{command}.log',
        help=f'The log file. The default is {command}.log.'
    )


def exit_code(err):
    """Maps an exception to the exit status of the command."""
    if isinstance(err, NumericError):
        return EXIT_NUMERIC
    if isinstance(err, (DataError, ShapeError, OSError)):
        return EXIT_DATA
    return EXIT_USAGE


def guarded(work):
    """
    Runs ``work()`` and converts the expected failures into an error message and exit status.

    Returns
    -------
    code : int
        0 on success, otherwise the status given by :func:`exit_code`.
    """
    try:
        work()
    except (NumericError, DataError, ConfigError, ParseError, OSError, ValueError) as err:
        print(f"Error: {err}", file=sys.stderr)
        return exit_code(err)
    return EXIT_OK


@contextmanager
def logged_run(command, argv, log, quiet=False):
    """
    Tees the standard streams into the log file for the duration of a command.

    The command line and the working directory are printed first and the elapsed time last;
    the original streams are restored on exit.
    """
    t1 = time.time()
    stdout, stderr = sys.stdout, sys.stderr
    sys.stdout = utils.Logger(log, stdout, quiet)
    sys.stderr = utils.Logger(log, stderr)
    utils.setup_logging(quiet)
    print(f"\nCommand line: {' '.join([command] + list(argv))}")
    print(f"Current working directory: {os.getcwd()}")
    try:
        yield
    finally:
        print(f"Elapsed time: {utils.format_time(time.time() - t1)}")
        utils.teardown_logging()
        for stream in (sys.stdout, sys.stderr):
            stream.close()
        sys.stdout, sys.stderr = stdout, stderr
