import sys

from bdl_utils.analysis import datasets
from bdl_utils.cli import cli_utils

DEFAULTS = {
    'xsinx': dict(n_samples=30, sigma=0.0),
    'two-moons': dict(n_samples=900, sigma=0.1),
}


def initialize(args):
    parser = cli_utils.ArgumentParser(
        prog='generate_data',
        description='Generate a synthetic dataset: noisy samples of y = x sin(x) or the two-moons \
            classification problem. The dataset is written as a CSV file.'
    )
    parser.add_argument(
        '-k',
        '--kind',
        type=str,
        required=True,
        choices=['xsinx', 'two-moons'],
        help='The kind of dataset to generate.'
    )
    parser.add_argument(
        '-n',
        '--n_samples',
        type=int,
        help='Number of samples. The default is 30 for xsinx and 900 for two-moons.'
    )
    parser.add_argument(
        '-s',
        '--sigma',
        type=float,
        help='Standard deviation of the Gaussian noise. The default is 0 for xsinx and 0.1 for two-moons.'
    )
    parser.add_argument(
        '--lo',
        type=float,
        default=-10.0,
        help='Lower bound of the sampling interval (xsinx only). The default is -10.'
    )
    parser.add_argument(
        '--hi',
        type=float,
        default=10.0,
        help='Upper bound of the sampling interval (xsinx only). The default is 10.'
    )
    parser.add_argument(
        '-o',
        '--out',
        type=str,
        help='The output CSV file. The default is <kind>.csv.'
    )
    cli_utils.add_common_args(parser, 'generate_data', config=False)
    args_parse = parser.parse_args(args)

    return args_parse


def generate(args):
    n = args.n_samples if args.n_samples is not None else DEFAULTS[args.kind]['n_samples']
    sigma = args.sigma if args.sigma is not None else DEFAULTS[args.kind]['sigma']
    seed = 0 if args.seed is None else args.seed
    if args.kind == 'xsinx':
        ds = datasets.gen_xsinx(n, sigma, args.lo, args.hi, seed=seed)
    else:
        ds = datasets.gen_two_moons(n, sigma, seed=seed)
    out = args.out if args.out else f"{args.kind}.csv"
    datasets.save_csv(ds, out)
    print(f"Wrote {len(ds)} rows of {args.kind} data (noise {sigma:g}, seed {seed}) to {out}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = initialize(argv)
    with cli_utils.logged_run('generate_data', argv, args.log, args.quiet):
        return cli_utils.guarded(lambda: generate(args))


if __name__ == '__main__':
    sys.exit(main())
