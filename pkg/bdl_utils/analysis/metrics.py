"""
Evaluation metrics for regression and classification predictions.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from bdl_utils.inference.predictive import DEFAULT_DRAWS, predict_samples

logger = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    """Error raised when a metric is undefined for the given data."""


def _pair(y_true, y_pred):
    y_true, y_pred = np.asarray(y_true, dtype=float), np.asarray(y_pred, dtype=float)
    if y_true.size == 0:
        raise ValueError("Metrics need at least one observation")
    if y_true.size != y_pred.size:
        raise ValueError(f"y_true has {y_true.size} entries but y_pred has {y_pred.size}")
    return y_true.reshape(-1), y_pred.reshape(-1)


def r2(y_true, y_pred):
    """
    Coefficient of determination ``1 - SS_res / SS_tot``.

    Multi-output targets are flattened and share one pooled mean.
    """
    y_true, y_pred = _pair(y_true, y_pred)
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined when all targets are identical")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


def rmse(y_true, y_pred):
    y_true, y_pred = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def predicted_labels(probs, atol=1e-9):
    """
    Most probable class per row; ties go to the lowest class index.

    Parameters
    ----------
    probs : array_like
        Probability rows of shape ``(N, n_classes)``, each summing to 1 within ``atol``.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 2 or probs.shape[1] < 1:
        raise ValueError(f"Expected probability rows of shape (N, n_classes), got {probs.shape}")
    if np.any(probs < 0) or not np.allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=atol):
        raise ValueError("Every probability row must be non-negative and sum to 1")
    return np.argmax(probs, axis=1)


def accuracy(labels, probs):
    """Fraction of rows whose most probable class equals the label."""
    labels = np.asarray(labels, dtype=int).reshape(-1)
    pred = predicted_labels(probs)
    if labels.shape[0] != pred.shape[0]:
        raise ValueError(f"Got {labels.shape[0]} labels for {pred.shape[0]} probability rows")
    return float(np.mean(pred == labels))


def coverage(y_true, interval):
    """
    Fraction of truths lying inside their interval, bounds included.

    Parameters
    ----------
    y_true : array_like
        Truths.
    interval : tuple of array_like
        ``(lo, hi)`` with the shape of ``y_true``.
    """
    lo, hi = interval
    y_true = np.asarray(y_true, dtype=float)
    lo, hi = np.broadcast_to(lo, y_true.shape), np.broadcast_to(hi, y_true.shape)
    if y_true.size == 0:
        raise ValueError("Coverage needs at least one observation")
    return float(np.mean((lo <= y_true) & (y_true <= hi)))


def log_predictive_density(ds, samples, tau_eps=None):
    """
    Mean per-point log predictive density of ``ds`` from a block of draws at ``ds.X``.

    ``(1/N) sum_i ln (1/k) sum_s p(y_i | w_s)``, evaluated with log-sum-exp over the draws.
    """
    samples = np.asarray(samples, dtype=float)
    if ds.task == 'classification':
        with np.errstate(divide='ignore'):
            per_draw = np.log(samples[:, np.arange(len(ds)), ds.y])
    else:
        if tau_eps is None or not 0 < tau_eps < np.inf:
            raise ValueError(f"A finite positive noise precision is needed, got {tau_eps!r}")
        resid = samples - ds.y[np.newaxis]
        per_draw = np.sum(0.5 * math.log(tau_eps / (2.0 * math.pi)) - 0.5 * tau_eps * resid ** 2, axis=-1)
    return float(np.mean(logsumexp(per_draw, axis=0) - math.log(samples.shape[0])))


def test_log_likelihood(spec, vs, ds, k=DEFAULT_DRAWS, rng=None):
    """
    Held-out log-likelihood under the Monte Carlo predictive distribution.

    Parameters
    ----------
    spec : NetworkSpec
    vs : VariationalState
    ds : Dataset
        The held-out data.
    k : int, Optional
        The number of draws. The default is 1000.
    rng : np.random.Generator
        Source of the weight noise.

    Returns
    -------
    value : float
        See :func:`log_predictive_density`.
    """
    samples = predict_samples(spec, vs, ds.X, k, rng, task=ds.task)
    return log_predictive_density(ds, samples, vs.tau_eps)


@dataclass
class MetricReport:
    """Metrics of one set of predictions; fields that do not apply to the task stay None."""
    r2: Optional[float] = None
    rmse: Optional[float] = None
    accuracy: Optional[float] = None
    coverage: dict = field(default_factory=dict)
    test_loglik: Optional[float] = None

    @classmethod
    def from_summary(cls, ds, summary):
        """Evaluates a :class:`PredictiveSummary` computed at ``ds.X`` against ``ds``."""
        report = cls()
        if ds.task == 'classification':
            report.accuracy = accuracy(ds.y, summary.mean)
            report.test_loglik = log_predictive_density(ds, summary.samples)
            return report
        try:
            report.r2 = r2(ds.y, summary.mean)
        except UndefinedMetricError as err:
            logger.warning("%s", err)
        report.rmse = rmse(ds.y, summary.mean)
        report.coverage = {level: coverage(ds.y, interval) for level, interval in summary.intervals.items()}
        if summary.tau_eps is not None and np.isfinite(summary.tau_eps):
            report.test_loglik = log_predictive_density(ds, summary.samples, summary.tau_eps)
        return report

    def lines(self):
        """Human-readable summary lines of the metrics that are set."""
        out = []
        for name in ('r2', 'rmse', 'accuracy', 'test_loglik'):
            value = getattr(self, name)
            if value is not None:
                out.append(f"{name}: {value:.6g}")
        for level, frac in self.coverage.items():
            out.append(f"coverage at {level:g}: {frac:.4f}")
        return out
