import sys

from bdl_utils.analysis import benchmark
from bdl_utils.cli import cli_utils
from bdl_utils.utils.config_parser import RunConfig


def initialize(args):
    parser = cli_utils.ArgumentParser(
        prog='run_benchmark',
        description='Run one of the benchmark suites (x sin(x) regression across noise levels, two-moons \
            classification across priors, or the variance of the ELBO gradient estimators) and write \
            one row per cell to a CSV file.'
    )
    parser.add_argument(
        '-s',
        '--suite',
        type=str,
        required=True,
        choices=benchmark.SUITES,
        help='The benchmark suite to run.'
    )
    parser.add_argument(
        '--seeds',
        type=int,
        nargs='+',
        default=[0, 1, 2, 3, 4],
        help='Replicate seeds; every cell is repeated once per seed. The default is 0 1 2 3 4.'
    )
    parser.add_argument(
        '-j',
        '--n_jobs',
        type=int,
        default=1,
        help='Number of worker processes. The default is 1.'
    )
    parser.add_argument(
        '-e',
        '--epochs',
        type=int,
        help='Number of training epochs per cell. The default is the value of the preset.'
    )
    parser.add_argument(
        '--n_estimates',
        type=int,
        default=10000,
        help='Number of single-sample gradients per estimator (estimator-variance only). The default is 10000.'
    )
    parser.add_argument(
        '--grid_steps',
        type=int,
        default=50,
        help='Grid points per axis for the uncertainty maps (two-moons only). The default is 50.'
    )
    parser.add_argument(
        '-o',
        '--out',
        type=str,
        help='The output CSV file. The default is <suite>.csv.'
    )
    cli_utils.add_common_args(parser, 'run_benchmark')
    args_parse = parser.parse_args(args)

    return args_parse


def benchmark_config(args):
    """The training settings of the suite, or None for suites that do not train."""
    preset = args.preset if args.preset else benchmark.PRESETS[args.suite]
    if preset is None and args.config is None:
        return None
    return RunConfig.resolve(preset, args.config, {'epochs': args.epochs})


def run(args):
    options = benchmark.BenchmarkOptions(
        suite=args.suite,
        seeds=tuple(args.seeds),
        master_seed=0 if args.seed is None else args.seed,
        n_jobs=args.n_jobs,
        config=benchmark_config(args),
        grid_steps=args.grid_steps,
        n_estimates=args.n_estimates,
    )
    n_cells = len(benchmark.cells(options))
    print(f"Running the {args.suite} suite: {n_cells} cells on {options.n_jobs} worker(s)")
    results = benchmark.run_benchmark(options)
    out = benchmark.write_results(results, args.out if args.out else f"{args.suite}.csv")
    print(f"Wrote {len(results)} rows to {out}\n")
    print(benchmark.summarize_results(results, args.suite).to_string())


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = initialize(argv)
    with cli_utils.logged_run('run_benchmark', argv, args.log, args.quiet):
        return cli_utils.guarded(lambda: run(args))


if __name__ == '__main__':
    sys.exit(main())
