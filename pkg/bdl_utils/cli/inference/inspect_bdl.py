import sys

import numpy as np
import pandas as pd

from bdl_utils.cli import cli_utils
from bdl_utils.utils.config_parser import ConfigError
from bdl_utils.utils.model_io import load_model


def initialize(args):
    parser = cli_utils.ArgumentParser(
        prog='inspect_bdl',
        description='Dump the variational marginals of one layer of a trained model and histograms of \
            weights sampled from them, with the weight and bias slices labeled separately.'
    )
    parser.add_argument(
        '-m',
        '--model',
        type=str,
        required=True,
        help='The model file written by train_bdl.'
    )
    parser.add_argument(
        '-L',
        '--layer',
        type=int,
        default=1,
        help='The layer to inspect, counted from 1 at the input side. The default is 1.'
    )
    parser.add_argument(
        '-b',
        '--bins',
        type=int,
        default=30,
        help='Number of histogram bins. The default is 30.'
    )
    parser.add_argument(
        '-n',
        '--n_draws',
        type=int,
        default=1000,
        help='Number of draws per parameter pooled into the histograms. The default is 1000.'
    )
    parser.add_argument(
        '-o',
        '--out',
        type=str,
        default='inspect',
        help='Prefix of the output files <out>_params.csv and <out>_hist.csv. The default is inspect.'
    )
    cli_utils.add_common_args(parser, 'inspect_bdl', config=False)
    args_parse = parser.parse_args(args)

    return args_parse


def layer_marginals(model, layer):
    """
    Per-parameter means and standard deviations of one layer.

    Parameters
    ----------
    model : TrainedModel
        The model.
    layer : int
        The layer, 1-based.

    Returns
    -------
    frame : pd.DataFrame
        Columns ``layer, slice, row, col, index, mu, sigma``; ``slice`` is ``bias`` for row 0 of the
        layer block and ``weight`` otherwise, ``row`` counts the weight rows from 1.
    """
    spec = model.spec
    if not 1 <= layer <= spec.n_layers:
        raise ConfigError(f"Invalid layer {layer}: the network has layers 1 to {spec.n_layers}")
    start, stop = spec.layer_slices()[layer - 1]
    rows, cols = spec.layer_shapes()[layer - 1]
    r, c = np.divmod(np.arange(rows * cols), cols)
    mu = np.asarray(model.state.mu)[start:stop]
    sigma = model.state.sigma[start:stop]
    return pd.DataFrame({
        'layer': layer,
        'slice': np.where(r == 0, 'bias', 'weight'),
        'row': r,
        'col': c + 1,
        'index': np.arange(start, stop),
        'mu': mu,
        'sigma': sigma,
    })


def sampled_histograms(marginals, bins, n_draws, rng):
    """
    Pooled histograms of draws from the per-parameter Gaussians, one per slice.

    Returns
    -------
    frame : pd.DataFrame
        Columns ``slice, bin_lo, bin_hi, count, density``.
    """
    if bins < 1:
        raise ConfigError(f"At least one bin is needed, got {bins}")
    if n_draws < 1:
        raise ConfigError(f"At least one draw is needed, got {n_draws}")
    frames = []
    for name in ('weight', 'bias'):
        part = marginals[marginals['slice'] == name]
        mu, sigma = part['mu'].to_numpy(), part['sigma'].to_numpy()
        draws = (mu[:, np.newaxis] + sigma[:, np.newaxis] * rng.standard_normal((mu.size, n_draws))).ravel()
        counts, edges = np.histogram(draws, bins=bins)
        frames.append(pd.DataFrame({
            'slice': name,
            'bin_lo': edges[:-1],
            'bin_hi': edges[1:],
            'count': counts,
            'density': counts / (draws.size * np.diff(edges)),
        }))
    return pd.concat(frames, ignore_index=True)


def inspect_model(args):
    model = load_model(args.model)
    marginals = layer_marginals(model, args.layer)
    rng = np.random.default_rng(model.config.seed if args.seed is None else args.seed)
    hist = sampled_histograms(marginals, args.bins, args.n_draws, rng)
    params_path, hist_path = f"{args.out}_params.csv", f"{args.out}_hist.csv"
    marginals.to_csv(params_path, index=False, float_format='%.17g')
    hist.to_csv(hist_path, index=False, float_format='%.17g')
    for name in ('weight', 'bias'):
        part = marginals[marginals['slice'] == name]
        print(f"Layer {args.layer} {name}s: {len(part)} parameters, mean mu = {part['mu'].mean():.4g}, "
              f"mean sigma = {part['sigma'].mean():.4g}")
    print(f"Wrote {params_path} and {hist_path}")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = initialize(argv)
    with cli_utils.logged_run('inspect_bdl', argv, args.log, args.quiet):
        return cli_utils.guarded(lambda: inspect_model(args))


if __name__ == '__main__':
    sys.exit(main())
