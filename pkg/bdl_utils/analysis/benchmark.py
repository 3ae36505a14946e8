"""
Benchmark suites: x sin(x) regression across noise levels, two-moons classification across priors,
and the variance of the two ELBO gradient estimators.

Each suite is a list of independent cells. A cell trains with its own generator seeded from
``(master_seed, cell_index)``; datasets are seeded from ``(master_seed, seed)`` so that models
compared at the same seed see the same data. The x sin(x) models of one seed also share a
maximum-likelihood fit seeded from ``(master_seed, seed, 1)``: it is the ``nn`` baseline and the
starting point of every variational fit when the configuration asks for a warm start. Rows are sorted
by cell index.
"""
import logging
from dataclasses import dataclass, replace
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd

from bdl_utils.analysis import conjugate, metrics
from bdl_utils.analysis.datasets import (
    Dataset, boundary_gap, distance_to_moons, gen_two_moons, gen_xsinx, split, standardize
)
from bdl_utils.inference.optimizer import train_deterministic, train_variational, warm_start_state
from bdl_utils.inference.predictive import predict_samples, summarize
from bdl_utils.inference.variational import VariationalState, elbo_grad_pathwise, elbo_grad_score, inverse_softplus
from bdl_utils.model.network import forward
from bdl_utils.model.priors import MOONS_PRIORS, parse_prior
from bdl_utils.utils.config_parser import RunConfig

logger = logging.getLogger(__name__)

SUITES = ('xsinx-grid', 'two-moons', 'estimator-variance')
NOISE_LEVELS = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)
XSINX_MODELS = ('nn', 'bdl-direct', 'bdl-hier', 'bdl-reference')

COLUMNS = {
    'xsinx-grid': (
        'cell', 'noise', 'model', 'prior', 'seed', 'r2', 'rmse', 'test_loglik', 'tau_eps', 'min_var_minus_floor'
    ),
    'two-moons': ('cell', 'prior', 'seed', 'accuracy', 'test_loglik', 'band_var', 'other_var'),
    'estimator-variance': (
        'cell', 'seed', 'coordinate', 'mean_pathwise', 'mean_score', 'var_pathwise', 'var_score', 'variance_ratio'
    ),
}
PRESETS = {'xsinx-grid': 'xsinx-paper', 'two-moons': 'moons-paper', 'estimator-variance': None}


@dataclass
class BenchmarkOptions:
    """
    Settings of a benchmark run.

    Parameters
    ----------
    suite : str
        One of ``xsinx-grid``, ``two-moons`` or ``estimator-variance``.
    seeds : tuple of int
        Replicate seeds; every cell is repeated once per seed.
    master_seed : int
        Root of all generator seeds.
    n_jobs : int
        Number of worker processes (1 runs the cells in this process).
    config : RunConfig, Optional
        Training settings. Defaults to the suite's preset.
    models : tuple of str
        The x sin(x) models to run: ``nn`` (the maximum-likelihood fit), ``bdl-direct`` (the
        configured prior), ``bdl-hier`` (``hier_prior``) and ``bdl-reference`` (``reference_prior``).
    band : float
        Half-width, in difference of distances to the two arcs, of the class-separation band.
    reach : float
        Only grid points within this distance of the arcs can belong to the band.
    """
    suite: str
    seeds: tuple = (0, 1, 2, 3, 4)
    master_seed: int = 0
    n_jobs: int = 1
    config: RunConfig = None
    noise_levels: tuple = NOISE_LEVELS
    models: tuple = XSINX_MODELS
    n_train: int = 30
    n_test: int = 200
    hier_prior: str = 'hier(gaussian,ig(1,1))'
    reference_prior: str = 'gaussian(0,1)'
    priors: tuple = MOONS_PRIORS
    moons_n: int = 900
    moons_noise: float = 0.1
    grid_steps: int = 50
    band: float = 0.2
    reach: float = 1.0
    n_estimates: int = 10000

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"Unknown suite {self.suite!r}. Supported: {', '.join(SUITES)}.")
        if not self.seeds:
            raise ValueError("At least one seed is needed")
        if self.n_jobs < 1:
            raise ValueError(f"n_jobs must be at least 1, got {self.n_jobs}")
        unknown = [m for m in self.models if m not in XSINX_MODELS]
        if unknown:
            raise ValueError(f"Unknown model(s) {', '.join(unknown)}. Supported: {', '.join(XSINX_MODELS)}.")
        if self.config is None and PRESETS[self.suite] is not None:
            self.config = RunConfig.resolve(preset=PRESETS[self.suite])


def cell_generator(master_seed, cell):
    return np.random.default_rng(np.random.SeedSequence([master_seed, cell]))


def data_seed(master_seed, seed):
    return int(np.random.SeedSequence([master_seed, seed]).generate_state(1)[0])


def init_generator(master_seed, seed):
    """Generator of the maximum-likelihood fit shared by all x sin(x) models of one seed."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, seed, 1]))


def cells(options):
    """The ``(cell_index, parameters)`` pairs of a suite, in cell order."""
    if options.suite == 'xsinx-grid':
        grid = [
            dict(noise=noise, model=model, seed=seed)
            for noise in options.noise_levels for model in options.models for seed in options.seeds
        ]
    elif options.suite == 'two-moons':
        grid = [dict(prior=prior, seed=seed) for prior in options.priors for seed in options.seeds]
    else:
        grid = [dict(seed=seed) for seed in options.seeds]
    return list(enumerate(grid))


def xsinx_prior(options, model):
    """The prior string of a Bayesian x sin(x) model."""
    return {
        'bdl-direct': options.config.prior, 'bdl-hier': options.hier_prior, 'bdl-reference': options.reference_prior,
    }[model]


def _xsinx_cell(options, cell, params):
    cfg = options.config
    train = gen_xsinx(options.n_train, params['noise'], seed=data_seed(options.master_seed, params['seed']))
    x_test = np.linspace(-10.0, 10.0, options.n_test).reshape(-1, 1)
    test = Dataset(x_test, x_test * np.sin(x_test))
    if cfg.standardize:
        train, record = standardize(train)
        test = standardize(test, record)[0]
    spec = cfg.network_spec()
    base = cfg.train_config()
    init_rng = init_generator(options.master_seed, params['seed'])
    row = dict(cell=cell, noise=params['noise'], model=params['model'], seed=params['seed'])

    if params['model'] == 'nn':
        fit_cfg = replace(base, epochs=base.warm_start or base.epochs, prior='none')
        result = train_deterministic(spec, train, fit_cfg, init_rng)
        pred = forward(spec, result.params, test.X).numpy()
        row.update(prior='none', r2=metrics.r2(test.y, pred), rmse=metrics.rmse(test.y, pred), tau_eps=result.tau_eps)
        return row

    prior = xsinx_prior(options, params['model'])
    train_cfg = replace(base, prior=prior)
    state = warm_start_state(spec, train, train_cfg, init_rng)[0] if train_cfg.warm_start else None
    rng = cell_generator(options.master_seed, cell)
    vs, _ = train_variational(spec, train, train_cfg, parse_prior(prior), rng, state=state)
    summary = summarize(predict_samples(spec, vs, test.X, cfg.k, rng), vs.tau_eps, levels=())
    report = metrics.MetricReport.from_summary(test, summary)
    row.update(
        prior=prior, r2=report.r2, rmse=report.rmse, test_loglik=report.test_loglik, tau_eps=vs.tau_eps,
        min_var_minus_floor=float(np.min(summary.variance) - 1.0 / vs.tau_eps),
    )
    return row


def moons_grid(steps, lo=-3.0, hi=3.0):
    axis = np.linspace(lo, hi, steps)
    g1, g2 = np.meshgrid(axis, axis, indexing='ij')
    return np.column_stack([g1.ravel(), g2.ravel()])


def separation_band(grid, band, reach):
    """Grid points near the true class separation: ``|d_0 - d_1| <= band`` within ``reach`` of the arcs."""
    return (boundary_gap(grid) <= band) & (distance_to_moons(grid) <= reach)


def _moons_cell(options, cell, params):
    cfg = options.config
    rng = cell_generator(options.master_seed, cell)
    ds = gen_two_moons(options.moons_n, options.moons_noise, seed=data_seed(options.master_seed, params['seed']))
    train, valid = split(ds, cfg.train_fraction if cfg.train_fraction < 1 else 0.7, seed=params['seed'])
    spec = cfg.network_spec()
    train_cfg = replace(cfg.train_config(), prior=params['prior'])
    vs, _ = train_variational(spec, train, train_cfg, parse_prior(params['prior']), rng)

    summary = summarize(predict_samples(spec, vs, valid.X, cfg.k, rng, task='classification'), levels=(),
                        task='classification')
    report = metrics.MetricReport.from_summary(valid, summary)
    grid = moons_grid(options.grid_steps)
    grid_var = summarize(predict_samples(spec, vs, grid, cfg.k, rng, task='classification'), levels=(),
                         task='classification').variance.mean(axis=1)
    in_band = separation_band(grid, options.band, options.reach)
    return dict(
        cell=cell, prior=params['prior'], seed=params['seed'], accuracy=report.accuracy,
        test_loglik=report.test_loglik, band_var=float(grid_var[in_band].mean()),
        other_var=float(grid_var[~in_band].mean()),
    )


def estimator_state(toy, offset=0.5, spread=1.5):
    """A fixed proxy away from the optimum: shifted means and inflated standard deviations."""
    mean, std = conjugate.posterior(toy)
    return VariationalState(mean + offset * std, inverse_softplus(spread * std), toy.tau_eps)


def gradient_draws(toy, vs, n_estimates, rng):
    """``n_estimates`` single-sample gradients of each estimator, as two ``(n, 2P)`` arrays."""
    ds = toy.dataset
    path = np.empty((n_estimates, 2 * vs.n_params))
    score = np.empty_like(path)
    for i in range(n_estimates):
        path[i] = elbo_grad_pathwise(toy.spec, vs, toy.prior, ds, len(ds), 1, rng).flat
        score[i] = elbo_grad_score(toy.spec, vs, toy.prior, ds, len(ds), 1, rng).flat
    return path, score


def _estimator_cell(options, cell, params):
    rng = cell_generator(options.master_seed, cell)
    toy = conjugate.make_conjugate_toy(seed=data_seed(options.master_seed, params['seed']))
    vs = estimator_state(toy)
    path, score = gradient_draws(toy, vs, options.n_estimates, rng)
    names = [f"mu_{i + 1}" for i in range(vs.n_params)] + [f"rho_{i + 1}" for i in range(vs.n_params)]
    var_path, var_score = path.var(axis=0), score.var(axis=0)
    return [
        dict(
            cell=cell, seed=params['seed'], coordinate=name, mean_pathwise=float(path[:, j].mean()),
            mean_score=float(score[:, j].mean()), var_pathwise=float(var_path[j]), var_score=float(var_score[j]),
            variance_ratio=float(var_score[j] / var_path[j]),
        )
        for j, name in enumerate(names)
    ]


_RUNNERS = {'xsinx-grid': _xsinx_cell, 'two-moons': _moons_cell, 'estimator-variance': _estimator_cell}


def run_cell(options, cell, params):
    logger.info("Running %s cell %d: %s", options.suite, cell, params)
    rows = _RUNNERS[options.suite](options, cell, params)
    return rows if isinstance(rows, list) else [rows]


def _run_cell_star(args):
    return run_cell(*args)


def run_benchmark(options):
    """
    Runs every cell of a suite.

    Returns
    -------
    results : pd.DataFrame
        One row per cell (per cell and gradient coordinate for ``estimator-variance``), with the
        suite's fixed columns, sorted by cell index.
    """
    jobs = [(options, cell, params) for cell, params in cells(options)]
    if options.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=options.n_jobs) as pool:
            chunks = list(pool.map(_run_cell_star, jobs))
    else:
        chunks = [_run_cell_star(job) for job in jobs]
    rows = sorted((row for chunk in chunks for row in chunk), key=lambda r: r['cell'])
    return pd.DataFrame(rows, columns=list(COLUMNS[options.suite]))


def summarize_results(results, suite):
    """Per-setting means over seeds, for printing."""
    if suite == 'xsinx-grid':
        return results.groupby(['noise', 'model'], sort=False)[['r2', 'rmse']].mean()
    if suite == 'two-moons':
        return results.groupby('prior', sort=False)[['accuracy', 'band_var', 'other_var']].mean()
    return results.groupby('coordinate', sort=False)[['var_pathwise', 'var_score', 'variance_ratio']].mean()


def write_results(results, path):
    results.to_csv(path, index=False, float_format='%.17g')
    return path
