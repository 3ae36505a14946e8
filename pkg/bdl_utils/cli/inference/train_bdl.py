import os
import sys
import dataclasses

import numpy as np
import pandas as pd

from bdl_utils.analysis import datasets, metrics
from bdl_utils.cli import cli_utils
from bdl_utils.inference import optimizer
from bdl_utils.inference.predictive import predict_samples, summarize
from bdl_utils.inference.variational import VariationalState
from bdl_utils.utils.config_parser import RunConfig
from bdl_utils.utils.model_io import TrainedModel, save_model


def initialize(args):
    parser = cli_utils.ArgumentParser(
        prog='train_bdl',
        description='Train a Bayesian neural network by variational inference (or a deterministic network \
            by maximum likelihood when the prior is none) and save the model and the training trace.'
    )
    parser.add_argument(
        '-d',
        '--data',
        type=str,
        help='The training data as a CSV file: the feature columns, then the target columns or one label column.'
    )
    parser.add_argument(
        '-o',
        '--out',
        type=str,
        help='The output model file. The default is model.bdl.'
    )
    parser.add_argument(
        '-t',
        '--trace',
        type=str,
        help='The output CSV file of the training trace. The default is <model name>_trace.csv.'
    )
    parser.add_argument(
        '--task',
        type=str,
        choices=['regression', 'classification'],
        help='The learning task.'
    )
    parser.add_argument(
        '-w',
        '--widths',
        type=int,
        nargs='+',
        help='Layer widths, inputs first and outputs last, e.g. 1 20 1.'
    )
    parser.add_argument(
        '--prior',
        type=str,
        help='The prior, e.g. gaussian(0,1), laplace(0,1), cauchy(1,1), hier-gauss-gamma(1,1), \
            hier(laplace,ig(1,1)) or none.'
    )
    parser.add_argument(
        '-e',
        '--epochs',
        type=int,
        help='Number of epochs.'
    )
    parser.add_argument(
        '-b',
        '--batch_size',
        type=int,
        help='Mini-batch size.'
    )
    parser.add_argument(
        '-S',
        '--n_samples',
        type=int,
        help='Number of Monte Carlo samples per ELBO gradient.'
    )
    parser.add_argument(
        '--lr',
        type=float,
        help='The initial learning rate.'
    )
    parser.add_argument(
        '--tau_eps',
        type=float,
        help='The observation-noise precision (regression).'
    )
    cli_utils.add_common_args(parser, 'train_bdl')
    args_parse = parser.parse_args(args)

    return args_parse


OVERRIDES = ('task', 'widths', 'prior', 'epochs', 'batch_size', 'n_samples', 'lr', 'tau_eps', 'seed', 'data', 'out')


def load_training_data(cfg):
    """Loads ``cfg.data`` with the column layout implied by the network."""
    if not cfg.data:
        raise datasets.DataError("No training data given (use -d/--data or the data key)")
    spec = cfg.network_spec()
    n_targets = spec.n_outputs if cfg.task == 'regression' else 1
    ds = datasets.load_csv(cfg.data, datasets.CSVSchema(spec.n_inputs, n_targets, cfg.task))
    if cfg.task == 'classification':
        if ds.n_classes > spec.n_outputs:
            raise datasets.DataError(
                f"The data holds {ds.n_classes} classes but the network has {spec.n_outputs} outputs")
        ds = dataclasses.replace(ds, n_classes=spec.n_outputs)
    return ds


def prepare(cfg, ds):
    """Splits off the validation set and standardizes the inputs as configured."""
    train, valid = (ds, None) if cfg.train_fraction >= 1 else datasets.split(ds, cfg.train_fraction, cfg.seed)
    record = None
    if cfg.standardize:
        train, record = datasets.standardize(train)
        if valid is not None:
            valid = datasets.standardize(valid, record)[0]
    return train, valid, record


def fit(cfg, train, valid=None, record=None):
    """
    Trains a model as configured.

    Returns
    -------
    model : TrainedModel
    trace : pd.DataFrame
        The per-epoch training trace.
    """
    spec = cfg.network_spec()
    rng = np.random.default_rng(cfg.seed)
    if cfg.deterministic:
        result = optimizer.train_deterministic(spec, train, cfg.train_config(), rng)
        tau = result.tau_eps if cfg.task == 'regression' else 1.0
        state = VariationalState.point_mass(result.params, tau)
        trace = pd.DataFrame({'epoch': np.arange(1, len(result.losses) + 1), 'loss': result.losses})
        model = TrainedModel(spec, state, cfg, record, deterministic=True, tau_flagged=result.flagged)
        if cfg.task == 'regression':
            print(f"Maximum-likelihood noise precision: {tau:.6g}{' (perfect fit)' if result.flagged else ''}")
    else:
        state, trace = optimizer.train_variational(spec, train, cfg.train_config(), cfg.prior_spec(), rng,
                                                   validation=valid)
        trace = trace.to_frame()
        model = TrainedModel(spec, state, cfg, record)
        if len(trace):
            last = trace.iloc[-1]
            print(f"Final ELBO: {last['elbo']:.6g} (data term {last['data_term']:.6g}, KL term {last['kl_term']:.6g})")
    return model, trace


def evaluate(model, valid, rng):
    k = 1 if model.deterministic else model.config.k
    levels = () if k < 2 else model.config.levels
    samples = predict_samples(model.spec, model.state, valid.X, k, rng, task=model.task)
    summary = summarize(samples, model.state.tau_eps, levels, task=model.task)
    return metrics.MetricReport.from_summary(valid, summary)


def train(args):
    overrides = {key: getattr(args, key) for key in OVERRIDES}
    cfg = RunConfig.resolve(args.preset, args.config, overrides)
    ds = load_training_data(cfg)
    train_set, valid, record = prepare(cfg, ds)
    print(f"Training on {len(train_set)} rows" + (f", validating on {len(valid)} rows" if valid is not None else ''))
    print(f"Network: widths {cfg.widths}, prior {cfg.prior}, {cfg.epochs} epochs")

    model, trace = fit(cfg, train_set, valid, record)
    out = cfg.out if cfg.out else 'model.bdl'
    trace_path = args.trace if args.trace else f"{os.path.splitext(out)[0]}_trace.csv"
    trace.to_csv(trace_path, index=False, float_format='%.17g')
    save_model(model, out)
    print(f"Model written to {out}, training trace to {trace_path}")

    if valid is not None:
        report = evaluate(model, valid, np.random.default_rng([cfg.seed, 2]))
        print("Validation metrics:")
        for line in report.lines():
            print(f"  {line}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = initialize(argv)
    with cli_utils.logged_run('train_bdl', argv, args.log, args.quiet):
        return cli_utils.guarded(lambda: train(args))


if __name__ == '__main__':
    sys.exit(main())
