"""
ADAM with a step-decay learning rate, and the deterministic and variational training loops.
"""
import math
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from bdl_utils.autodiff import tensor as ops
from bdl_utils.autodiff.tensor import Tape, NumericError, ShapeError, backward
from bdl_utils.model.network import forward, init_params
from bdl_utils.model.priors import parse_prior
from bdl_utils.inference.variational import (
    SIGMA_INIT, VariationalState, elbo_grad_pathwise, inverse_softplus, log_likelihood
)
from bdl_utils.inference.predictive import predict_samples, predictive_mean
from bdl_utils.analysis import metrics

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    First and second moment estimates of ADAM over one flat parameter vector.

    Parameters
    ----------
    m, v : np.ndarray
        Moment estimates, zero-initialized.
    t : int
        Number of steps taken.
    beta1, beta2 : float
        Exponential decay rates of the moments.
    eps : float
        Stabilizer added to the denominator.
    """
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError(f"The decay rates must lie in (0, 1), got {self.beta1} and {self.beta2}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @classmethod
    def zeros(cls, n, **kwargs):
        return cls(np.zeros(n), np.zeros(n), **kwargs)


def adam_step(state, grad, lr):
    """
    One ADAM update of a loss to be minimized.

    Parameters
    ----------
    state : AdamState
        Updated in place.
    grad : array_like
        Gradient of the loss.
    lr : float
        The learning rate of this step.

    Returns
    -------
    delta : np.ndarray
        ``-lr * m_hat / (sqrt(v_hat) + eps)``, to be added to the parameters.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        raise ShapeError(f"The gradient has shape {grad.shape}, the optimizer state {state.m.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return -lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(frozen=True)
class LRSchedule:
    """
    Step decay ``lr0 * factor ** floor(epoch / interval)``; ``interval = 0`` keeps the rate constant.
    """
    lr0: float = 0.001
    factor: float = 1.0
    interval: int = 0

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError(f"The learning rate must be positive, got {self.lr0}")
        if not self.factor > 0:
            raise ValueError(f"The decay factor must be positive, got {self.factor}")
        if self.interval < 0:
            raise ValueError(f"The decay interval must be non-negative, got {self.interval}")

    def lr_at(self, epoch):
        if epoch < 0:
            raise ValueError(f"The epoch must be non-negative, got {epoch}")
        if self.interval == 0:
            return self.lr0
        return self.lr0 * self.factor ** (epoch // self.interval)


def lr_at(schedule, epoch):
    return schedule.lr_at(epoch)


@dataclass
class TrainConfig:
    """
    Settings of a training run.

    Parameters
    ----------
    epochs : int
        Number of passes over the data. Training always runs the full budget.
    batch_size : int
        Mini-batch size M; it is capped at the dataset size.
    n_samples : int
        Monte Carlo samples S per ELBO gradient.
    schedule : LRSchedule
        Learning-rate schedule.
    seed : int
        Seed of the run generator.
    task : str
        ``regression`` or ``classification``.
    tau_eps : float
        Fixed observation-noise precision (regression).
    prior : str
        Prior string; ``none`` selects deterministic training.
    tau_refresh : bool
        Re-estimate ``tau_eps`` after each epoch by maximum likelihood at the predictive mean.
    warm_start : int
        Epochs of maximum-likelihood training whose weights become the starting means (0 draws
        the means at random).
    sigma_init : float
        Starting standard deviation of every weight.
    refresh_draws : int
        Predictive draws used by the refresh.
    test_frequency : int
        Evaluate the held-out log-likelihood every that many epochs (0 disables it).
    test_draws : int
        Predictive draws used by the held-out evaluation.
    log_every : int
        Log a progress line every that many epochs (0 disables it).
    """
    epochs: int = 1000
    batch_size: int = 30
    n_samples: int = 1
    schedule: LRSchedule = field(default_factory=LRSchedule)
    seed: int = 0
    task: str = 'regression'
    tau_eps: float = 1.0
    prior: str = 'gaussian(0,1)'
    tau_refresh: bool = False
    warm_start: int = 0
    sigma_init: float = SIGMA_INIT
    refresh_draws: int = 20
    test_frequency: int = 0
    test_draws: int = 100
    log_every: int = 0

    def validate(self, n_total=None):
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if n_total is not None and n_total < 1:
            raise ValueError("The training set is empty")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be at least 1, got {self.n_samples}")
        if self.task not in ('regression', 'classification'):
            raise ValueError(f"Unknown task {self.task!r}")
        if not self.tau_eps > 0:
            raise ValueError(f"tau_eps must be positive, got {self.tau_eps}")
        if self.refresh_draws < 1 or self.test_draws < 1:
            raise ValueError("refresh_draws and test_draws must be at least 1")
        if self.test_frequency < 0 or self.log_every < 0:
            raise ValueError("test_frequency and log_every must be non-negative")
        if self.warm_start < 0:
            raise ValueError(f"warm_start must be non-negative, got {self.warm_start}")
        if not self.sigma_init > 0:
            raise ValueError(f"sigma_init must be positive, got {self.sigma_init}")
        parse_prior(self.prior)
        return self


def estimate_noise_precision(y, yhat):
    """
    Maximum-likelihood noise precision ``[ (1/(N n_out)) sum ||y_i - yhat_i||^2 ]^-1``.

    Returns
    -------
    tau : float
        The estimate, or ``inf`` when every residual is zero.
    flagged : bool
        True when the residuals are all zero.
    """
    y, yhat = np.asarray(y, dtype=float), np.asarray(yhat, dtype=float)
    mse = float(np.mean((y - yhat) ** 2))
    if mse == 0.0:
        return math.inf, True
    return 1.0 / mse, False


def _batches(rng, n_total, batch_size):
    order = rng.permutation(n_total)
    m = min(batch_size, n_total)
    for b, start in enumerate(range(0, n_total, m)):
        yield b, order[start:start + m]


def _point_loss(spec, w, batch):
    """Per-row squared error summed over outputs (regression) or cross-entropy (classification)."""
    if batch.task == 'regression':
        return ops.reduce_sum(ops.square(forward(spec, w, batch.X) - batch.y)) / float(len(batch))
    return -log_likelihood(spec, w, batch, task='classification') / float(len(batch))


@dataclass
class DeterministicResult:
    """
    Point estimate from maximum-likelihood training.

    Parameters
    ----------
    params : np.ndarray
        The flat weights.
    tau_eps : float or None
        Noise precision estimated from the final residuals (regression), ``inf`` for a perfect fit.
    flagged : bool
        True if the residuals vanished and ``tau_eps`` is the ``inf`` sentinel.
    losses : list of float
        Mean training loss per epoch.
    """
    params: np.ndarray
    tau_eps: float = None
    flagged: bool = False
    losses: list = field(default_factory=list)


def train_deterministic(spec, data, config, rng=None, params=None):
    """
    Minimizes the squared error (regression) or cross-entropy (classification) by mini-batch ADAM.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    data : Dataset
        The training set.
    config : TrainConfig
        Epochs, batch size, schedule and seed are used.
    rng : np.random.Generator, Optional
        The run generator. Defaults to one seeded with ``config.seed``.
    params : array_like, Optional
        Initial weights. Drawn from the initialization distribution if not given.

    Returns
    -------
    result : DeterministicResult
    """
    config.validate(len(data))
    rng = np.random.default_rng(config.seed) if rng is None else rng
    w = init_params(spec, rng) if params is None else np.array(params, dtype=float)
    adam = AdamState.zeros(w.shape[0])
    losses = []
    for epoch in range(config.epochs):
        lr = config.schedule.lr_at(epoch)
        total = 0.0
        for b, idx in _batches(rng, len(data), config.batch_size):
            batch = data.subset(idx)
            with Tape() as tape:
                wt = tape.watch(w)
                loss = _point_loss(spec, wt, batch)
            grad = backward(loss)[wt].numpy()
            if not (np.isfinite(loss.item()) and np.all(np.isfinite(grad))):
                raise NumericError(f"Non-finite loss at epoch {epoch}, batch {b}")
            w = w + adam_step(adam, grad, lr)
            total += loss.item() * len(batch)
        losses.append(total / len(data))
        if config.log_every and (epoch + 1) % config.log_every == 0:
            logger.info("Epoch %d: loss = %.6g, lr = %.3g", epoch + 1, losses[-1], lr)

    result = DeterministicResult(w, losses=losses)
    if data.task == 'regression':
        result.tau_eps, result.flagged = estimate_noise_precision(data.y, forward(spec, w, data.X).numpy())
        if result.flagged:
            logger.warning("All training residuals are zero: the noise precision is reported as inf")
    return result


def warm_start_state(spec, data, config, rng=None):
    """
    Centers a proxy posterior on a maximum-likelihood fit.

    The weights are trained by :func:`train_deterministic` for ``config.warm_start`` epochs. The
    means start at the fitted weights and every standard deviation at ``config.sigma_init``.

    Returns
    -------
    state : VariationalState
    fit : DeterministicResult
    """
    fit = train_deterministic(spec, data, replace(config, epochs=config.warm_start, prior='none'), rng)
    rho = np.full(fit.params.shape, float(inverse_softplus(config.sigma_init)))
    return VariationalState(fit.params, rho, config.tau_eps), fit


TRACE_COLUMNS = ('epoch', 'elbo', 'data_term', 'kl_term', 'lr')


class TrainingTrace:
    """
    Per-epoch record of variational training.

    Each row holds the epoch number (1-based), the batch-averaged ELBO with its data and KL terms
    and the learning rate. A ``test_loglik`` column is added when held-out evaluation is enabled;
    epochs without an evaluation hold NaN.
    """

    def __init__(self, with_test=False):
        self.columns = TRACE_COLUMNS + (('test_loglik',) if with_test else ())
        self.rows = []

    def __len__(self):
        return len(self.rows)

    def append(self, **values):
        self.rows.append(tuple(values.get(c, math.nan) for c in self.columns))

    def column(self, name):
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def to_frame(self):
        frame = pd.DataFrame(list(self.rows), columns=list(self.columns))
        frame['epoch'] = frame['epoch'].astype(int)
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.17g')


def train_variational(spec, data, config, prior=None, rng=None, state=None, validation=None):
    """
    Maximizes the mini-batch ELBO with pathwise gradients and ADAM.

    Every epoch shuffles the data, visits all mini-batches (the last one may be shorter) and takes
    one ADAM step per batch on the concatenated ``(mu, rho)`` vector, descending the negative ELBO.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    data : Dataset
        The training set of size N.
    config : TrainConfig
        Run settings.
    prior : PriorSpec, Optional
        Defaults to ``parse_prior(config.prior)``.
    rng : np.random.Generator, Optional
        The run generator. Defaults to one seeded with ``config.seed``.
    state : VariationalState, Optional
        Starting state. If not given, the means come from a warm start when ``config.warm_start``
        is set and from a fresh initialization otherwise.
    validation : Dataset, Optional
        Held-out data for the ``test_loglik`` trace column.

    Returns
    -------
    state : VariationalState
        The trained proxy posterior.
    trace : TrainingTrace
        One row per epoch.
    """
    config.validate(len(data))
    prior = parse_prior(config.prior) if prior is None else prior
    if prior is None:
        raise ValueError("Variational training needs a prior; use train_deterministic for prior 'none'")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    if state is not None:
        vs = state.copy()
    elif config.warm_start:
        logger.info("Warm start: %d epochs of maximum-likelihood training", config.warm_start)
        vs, _ = warm_start_state(spec, data, config, rng)
    else:
        vs = VariationalState.initialize(spec, rng, config.tau_eps, config.sigma_init)
    n_total = len(data)
    evaluate = validation is not None and config.test_frequency > 0
    eval_rng = np.random.default_rng([config.seed, 1])
    adam = AdamState.zeros(2 * vs.n_params)
    trace = TrainingTrace(with_test=evaluate)

    for epoch in range(config.epochs):
        lr = config.schedule.lr_at(epoch)
        elbos, data_terms, kl_terms = [], [], []
        for b, idx in _batches(rng, n_total, config.batch_size):
            batch = data.subset(idx)
            try:
                grad = elbo_grad_pathwise(spec, vs, prior, batch, n_total, config.n_samples, rng, task=data.task)
            except NumericError as err:
                raise NumericError(f"Numeric failure at epoch {epoch + 1}, batch {b}: {err}") from err
            est = grad.estimate
            if not (np.isfinite(est.elbo) and np.all(np.isfinite(grad.flat))):
                raise NumericError(f"Non-finite ELBO at epoch {epoch + 1}, batch {b} (ELBO = {est.elbo})")
            vs.set_flat(vs.flat() + adam_step(adam, -grad.flat, lr))
            elbos.append(est.elbo)
            data_terms.append(est.data_term)
            kl_terms.append(est.kl_term)

        if config.tau_refresh and data.task == 'regression':
            samples = predict_samples(spec, vs, data.X, config.refresh_draws, eval_rng)
            tau, flagged = estimate_noise_precision(data.y, predictive_mean(samples))
            if not flagged:
                vs.tau_eps = tau

        data_term, kl_term = float(np.mean(data_terms)), float(np.mean(kl_terms))
        row = dict(epoch=epoch + 1, elbo=data_term - kl_term, data_term=data_term, kl_term=kl_term, lr=lr)
        if evaluate and (epoch + 1) % config.test_frequency == 0:
            row['test_loglik'] = metrics.test_log_likelihood(spec, vs, validation, config.test_draws, eval_rng)
        trace.append(**row)
        if config.log_every and (epoch + 1) % config.log_every == 0:
            logger.info(
                "Epoch %d: ELBO = %.6g (data = %.6g, KL = %.6g), lr = %.3g",
                epoch + 1, row['elbo'], data_term, kl_term, lr
            )
    return vs, trace
