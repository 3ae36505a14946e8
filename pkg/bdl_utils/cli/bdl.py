"""
The ``bdl`` command, which forwards ``bdl <command> [options]`` to the individual scripts.
"""
import sys

from bdl_utils.cli import cli_utils
from bdl_utils.cli.analysis import run_benchmark
from bdl_utils.cli.data import generate_data
from bdl_utils.cli.inference import inspect_bdl, predict_bdl, train_bdl

COMMANDS = {
    'generate': generate_data.main,
    'train': train_bdl.main,
    'predict': predict_bdl.main,
    'inspect': inspect_bdl.main,
    'benchmark': run_benchmark.main,
}

USAGE = f"usage: bdl {{{','.join(COMMANDS)}}} [options]\n       bdl <command> --help"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv or argv[0] in ('-h', '--help'):
        print(USAGE)
        return cli_utils.EXIT_OK if argv else cli_utils.EXIT_USAGE
    command, rest = argv[0], argv[1:]
    if command not in COMMANDS:
        print(f"{USAGE}\nbdl: error: unknown command {command!r}", file=sys.stderr)
        return cli_utils.EXIT_USAGE
    return COMMANDS[command](rest)


if __name__ == '__main__':
    sys.exit(main())
