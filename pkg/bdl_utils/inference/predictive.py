"""
Monte Carlo predictive distribution: draws, moments and credible intervals.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from bdl_utils.autodiff.tensor import ShapeError
from bdl_utils.model.network import forward, softmax_rows
from bdl_utils.analysis.datasets import feature_names

logger = logging.getLogger(__name__)

DEFAULT_DRAWS = 1000


def predict_samples(spec, vs, x, k=DEFAULT_DRAWS, rng=None, task='regression'):
    """
    Runs ``k`` forward passes, each with an independent weight draw from the proxy posterior.

    Parameters
    ----------
    spec : NetworkSpec
        The architecture.
    vs : VariationalState
        The proxy posterior.
    x : array_like
        Inputs of shape ``(B, d_0)``.
    k : int, Optional
        The number of draws. The default is 1000.
    rng : np.random.Generator
        Source of the weight noise.
    task : str, Optional
        For ``classification`` the outputs are class probabilities (a softmax is applied if the
        network does not end in one).

    Returns
    -------
    samples : np.ndarray
        Shape ``(k, B, d_K)``.
    """
    if k < 1:
        raise ValueError(f"At least one predictive draw is needed, got k={k}")
    if rng is None:
        raise ValueError("A random generator is required")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[1] != spec.n_inputs:
        raise ShapeError(f"The model expects {spec.n_inputs} input features, got {x.shape[1]}")
    mu = np.asarray(vs.mu, dtype=float)
    sigma = vs.sigma
    samples = np.empty((k, x.shape[0], spec.n_outputs))
    for s in range(k):
        omega = mu + sigma * rng.standard_normal(mu.shape)
        out = forward(spec, omega, x)
        if task == 'classification' and spec.activations[-1] != 'softmax':
            out = softmax_rows(out)
        samples[s] = out.numpy()
    return samples


def _check_samples(samples):
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        # A plain vector holds k draws of one output.
        samples = samples.reshape(-1, 1)
    if samples.ndim < 2 or samples.shape[0] < 1:
        raise ValueError(f"Expected a non-empty block of draws along axis 0, got shape {samples.shape}")
    return samples


def predictive_mean(samples):
    """Mean over the draws (axis 0)."""
    return _check_samples(samples).mean(axis=0)


def predictive_variance(samples, tau_eps=None, full=True):
    """
    Predictive variance ``(1/k) sum_i [tau^-1 I + y_i y_i^T] - ybar ybar^T``.

    It is evaluated as the aleatoric part ``tau^-1 I`` plus the 1/k sample covariance of the draws.

    Parameters
    ----------
    samples : array_like
        Draws of shape ``(k, n_out)`` or ``(k, B, n_out)``.
    tau_eps : float, Optional
        The noise precision. If None (classification) the aleatoric part is omitted.
    full : bool, Optional
        If True, the ``n_out x n_out`` matrices are returned, otherwise only their diagonals.

    Returns
    -------
    variance : np.ndarray
        Shape ``(..., n_out, n_out)`` if ``full`` else ``(..., n_out)``.
    """
    samples = _check_samples(samples)
    centered = samples - samples.mean(axis=0)
    k = samples.shape[0]
    aleatoric = 0.0 if tau_eps is None else 1.0 / tau_eps
    if not full:
        return np.mean(centered ** 2, axis=0) + aleatoric
    cov = np.einsum('k...i,k...j->...ij', centered, centered) / k
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    return cov + aleatoric * np.eye(samples.shape[-1])


def credible_interval(samples, level):
    """
    Equal-tailed empirical interval at the given level.

    Quantiles ``(1 - level)/2`` and ``(1 + level)/2`` over the draws, with linear interpolation
    between order statistics.

    Returns
    -------
    lo, hi : np.ndarray
        Each of shape ``samples.shape[1:]``.
    """
    samples = _check_samples(samples)
    if not 0 < level < 1:
        raise ValueError(f"The credible level must lie in (0, 1), got {level}")
    if samples.shape[0] < 2:
        raise ValueError("Credible intervals need at least two draws")
    lo = np.quantile(samples, (1.0 - level) / 2.0, axis=0)
    hi = np.quantile(samples, (1.0 + level) / 2.0, axis=0)
    return lo, hi


@dataclass
class PredictiveSummary:
    """
    Draws and derived statistics at a batch of inputs.

    Parameters
    ----------
    samples : np.ndarray
        Draws of shape ``(k, B, n_out)``.
    mean : np.ndarray
        Shape ``(B, n_out)``; per-class mean probabilities for classification.
    variance : np.ndarray
        Diagonal of the predictive variance, shape ``(B, n_out)``.
    tau_eps : float or None
        The noise precision used (None for classification).
    intervals : dict
        Maps each credible level to a ``(lo, hi)`` pair of ``(B, n_out)`` arrays.
    """
    samples: np.ndarray = field(repr=False)
    mean: np.ndarray
    variance: np.ndarray
    tau_eps: float = None
    intervals: dict = field(default_factory=dict)
    task: str = 'regression'

    @property
    def n_draws(self):
        return self.samples.shape[0]

    def to_frame(self, x):
        """One row per input: the inputs, then the mean, variance and interval columns per output."""
        x = np.asarray(x, dtype=float).reshape(self.mean.shape[0], -1)
        frame = pd.DataFrame(x, columns=feature_names(x.shape[1]))
        label = 'p' if self.task == 'classification' else 'y'
        for j in range(self.mean.shape[1]):
            frame[f"mean_{label}{j + 1}"] = self.mean[:, j]
            frame[f"var_{label}{j + 1}"] = self.variance[:, j]
            for level, (lo, hi) in self.intervals.items():
                frame[f"lo{level:g}_{label}{j + 1}"] = lo[:, j]
                frame[f"hi{level:g}_{label}{j + 1}"] = hi[:, j]
        return frame


def summarize(samples, tau_eps=None, levels=(0.95,), task='regression'):
    """
    Builds a :class:`PredictiveSummary` from a block of draws.

    With a single draw the credible intervals are undefined; they are skipped with a warning.
    """
    samples = _check_samples(samples)
    tau = tau_eps if task == 'regression' else None
    intervals = {}
    if samples.shape[0] < 2:
        if levels:
            logger.warning("Only one predictive draw: credible intervals are omitted")
    else:
        for level in levels:
            intervals[float(level)] = credible_interval(samples, level)
    return PredictiveSummary(
        samples=samples,
        mean=predictive_mean(samples),
        variance=predictive_variance(samples, tau, full=False),
        tau_eps=tau,
        intervals=intervals,
        task=task,
    )
