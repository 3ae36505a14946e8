import re
import sys

import numpy as np

from bdl_utils.analysis import datasets
from bdl_utils.cli import cli_utils
from bdl_utils.inference.predictive import predict_samples, summarize
from bdl_utils.utils.config_parser import ConfigError, RunConfig
from bdl_utils.utils.model_io import load_model


def initialize(args):
    parser = cli_utils.ArgumentParser(
        prog='predict_bdl',
        description='Compute the Monte Carlo predictive distribution of a trained model at the rows of a CSV \
            file or on a regular grid, and write the mean, variance and credible intervals per input.'
    )
    parser.add_argument(
        '-m',
        '--model',
        type=str,
        required=True,
        help='The model file written by train_bdl.'
    )
    inputs = parser.add_mutually_exclusive_group(required=True)
    inputs.add_argument(
        '-i',
        '--inputs',
        type=str,
        help='A CSV file with one column per input feature and an optional header line.'
    )
    inputs.add_argument(
        '-g',
        '--grid',
        type=str,
        help='A regular grid, "(lo,hi)@steps" for one input or "(lo,hi)x(lo,hi)@steps" for two inputs, \
            e.g. "(-3,3)x(-3,3)@100".'
    )
    parser.add_argument(
        '-k',
        '--k',
        type=int,
        help='Number of predictive draws. The default is the value stored with the model.'
    )
    parser.add_argument(
        '--levels',
        type=float,
        nargs='+',
        help='Credible levels, e.g. 0.95 0.97. The default is the value stored with the model.'
    )
    parser.add_argument(
        '-o',
        '--out',
        type=str,
        default='predictions.csv',
        help='The output CSV file. The default is predictions.csv.'
    )
    cli_utils.add_common_args(parser, 'predict_bdl', preset=False)
    args_parse = parser.parse_args(args)

    return args_parse


_NUM = r'\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*'
_RANGE = r'\(' + _NUM + ',' + _NUM + r'\)'
GRID_1D = re.compile(r'^\s*' + _RANGE + r'\s*@\s*(\d+)\s*$')
GRID_2D = re.compile(r'^\s*' + _RANGE + r'\s*[x×]\s*' + _RANGE + r'\s*@\s*(\d+)\s*$')


def parse_grid(text):
    """
    Expands a grid specification into input rows.

    Parameters
    ----------
    text : str
        ``(lo,hi)@steps`` or ``(lo,hi)x(lo,hi)@steps``. Each axis gets ``steps`` equally spaced
        points including both ends.

    Returns
    -------
    X : np.ndarray
        Shape ``(steps, 1)`` or ``(steps**2, 2)``; the first input varies slowest.
    """
    m2, m1 = GRID_2D.match(text), GRID_1D.match(text)
    if m2:
        bounds, steps = [float(v) for v in m2.groups()[:4]], int(m2.group(5))
    elif m1:
        bounds, steps = [float(v) for v in m1.groups()[:2]], int(m1.group(3))
    else:
        raise ConfigError(f"Invalid grid {text!r}. Expected (lo,hi)@steps or (lo,hi)x(lo,hi)@steps.")
    if steps < 1:
        raise ConfigError(f"A grid needs at least one step per axis, got {steps}")
    axes = []
    for lo, hi in zip(bounds[::2], bounds[1::2]):
        if not lo < hi:
            raise ConfigError(f"Invalid grid range ({lo}, {hi}): lo must be smaller than hi")
        axes.append(np.linspace(lo, hi, steps))
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.column_stack([g.ravel() for g in mesh])


def load_inputs(path, n_inputs):
    X = datasets.read_csv_rows(path)
    if X.shape[1] != n_inputs:
        raise datasets.DataError(f"{path!r} has {X.shape[1]} columns but the model expects {n_inputs} inputs")
    return X


def predict(args):
    model = load_model(args.model)
    cfg = model.config
    if args.config:
        cfg = RunConfig.from_file(args.config, base=cfg)
    cfg = cfg.merge({k: v for k, v in dict(k=args.k, levels=args.levels, seed=args.seed).items() if v is not None},
                    source='command line').validate()

    X = parse_grid(args.grid) if args.grid else load_inputs(args.inputs, model.spec.n_inputs)
    if X.shape[1] != model.spec.n_inputs:
        raise datasets.DataError(f"The grid has {X.shape[1]} inputs but the model expects {model.spec.n_inputs}")
    rng = np.random.default_rng(cfg.seed)
    samples = predict_samples(model.spec, model.state, model.prepare_inputs(X), cfg.k, rng, task=model.task)
    summary = summarize(samples, model.state.tau_eps, cfg.levels, task=model.task)
    summary.to_frame(X).to_csv(args.out, index=False, float_format='%.17g')
    print(f"Wrote predictions for {X.shape[0]} inputs ({cfg.k} draws each) to {args.out}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = initialize(argv)
    with cli_utils.logged_run('predict_bdl', argv, args.log, args.quiet):
        return cli_utils.guarded(lambda: predict(args))


if __name__ == '__main__':
    sys.exit(main())
