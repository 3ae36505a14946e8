"""
A linear-Gaussian model with a closed-form posterior and evidence.

The network is a single identity layer ``y = b + w x`` with a ``N(0, s0^2)`` prior on ``(b, w)``
and Gaussian noise of precision ``tau``. The inputs are centered, so the exact posterior has no
correlation between ``b`` and ``w`` and the mean-field Gaussian family contains it.
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import multivariate_normal

from bdl_utils.model.network import NetworkSpec
from bdl_utils.model.priors import GaussianPrior
from bdl_utils.analysis.datasets import Dataset


@dataclass(frozen=True)
class ConjugateToy:
    dataset: Dataset
    prior_sigma: float
    tau_eps: float

    @property
    def spec(self):
        return NetworkSpec((1, 1), ('identity',))

    @property
    def prior(self):
        return GaussianPrior(0.0, self.prior_sigma)


def make_conjugate_toy(n=20, intercept=0.5, slope=1.5, prior_sigma=1.0, tau_eps=4.0, seed=0):
    """
    Samples a dataset from the linear-Gaussian model.

    Parameters
    ----------
    n : int, Optional
        Number of observations. The default is 20.
    intercept, slope : float, Optional
        The generating line.
    prior_sigma : float, Optional
        Prior standard deviation of both parameters. The default is 1.
    tau_eps : float, Optional
        Noise precision. The default is 4.
    seed : int, Optional
        Seed of the random generator.

    Returns
    -------
    toy : ConjugateToy
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=n)
    x = x - x.mean()
    y = intercept + slope * x + rng.normal(0.0, 1.0 / np.sqrt(tau_eps), size=n)
    return ConjugateToy(Dataset(x.reshape(-1, 1), y.reshape(-1, 1)), float(prior_sigma), float(tau_eps))


def log_evidence(toy):
    """``ln p(D)`` with ``y ~ N(0, tau^-1 I + s0^2 (1 1^T + x x^T))``."""
    x, y = toy.dataset.X[:, 0], toy.dataset.y[:, 0]
    design = np.column_stack([np.ones_like(x), x])
    cov = np.eye(x.size) / toy.tau_eps + toy.prior_sigma ** 2 * design @ design.T
    return float(multivariate_normal(mean=np.zeros(x.size), cov=cov).logpdf(y))


def posterior(toy):
    """
    Exact posterior of the flat parameters ``(b, w)``.

    Returns
    -------
    mean, std : np.ndarray
        Each of length 2, in flat-parameter order (bias first).
    """
    x, y = toy.dataset.X[:, 0], toy.dataset.y[:, 0]
    design = np.column_stack([np.ones_like(x), x])
    precision = np.eye(2) / toy.prior_sigma ** 2 + toy.tau_eps * design.T @ design
    cov = np.linalg.inv(precision)
    mean = cov @ (toy.tau_eps * design.T @ y)
    return mean, np.sqrt(np.diag(cov))
